//! Caching collision tables on disk and reusing them across runs.
//!
//! The fast method's gain/loss tables depend only on the grid, kernel,
//! restitution model, and quadrature sizes, so they can be built once and
//! memory-mapped into every later run. This example builds tables for a
//! small grid, writes them next to a fingerprint of those inputs, reloads
//! them, and shows that a changed physics parameter invalidates the cache.
//!
//! Takes a few seconds.

use granular::collision::{
    cache_fingerprint, precompute_gain, precompute_loss, read_cache, write_cache,
    CollisionQuadrature, DEFAULT_MEMORY_BUDGET,
};
use granular::grid::GridSpec;
use granular::physics::{KernelSpec, RestitutionModel};

fn main() -> granular::Result<()> {
    let dir = std::env::temp_dir().join("granular-cache-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("tables.ggw");

    let grid = GridSpec::new(2, 16, 4.0)?;
    let kernel = KernelSpec::maxwell_2d();
    let restitution = RestitutionModel::Constant { e: 0.9 };
    let (n_rho, m_angular) = (16, 16);
    let quadrature = CollisionQuadrature::new(grid, n_rho, m_angular)?;

    let gain = precompute_gain(grid, &kernel, &restitution, &quadrature, DEFAULT_MEMORY_BUDGET)?;
    let loss = precompute_loss(grid, &kernel, &quadrature);
    let fingerprint = cache_fingerprint(grid, &kernel, &restitution, n_rho, m_angular);
    write_cache(&path, fingerprint, &gain, &loss)?;
    println!(
        "wrote {} ({} bytes), fingerprint {fingerprint:016x}",
        path.display(),
        std::fs::metadata(&path)?.len()
    );

    match read_cache(&path, fingerprint, grid, &kernel, n_rho, m_angular)? {
        Some(_) => println!("reload with the same parameters: tables accepted"),
        None => println!("reload with the same parameters: unexpectedly rejected"),
    }

    let other = RestitutionModel::Constant { e: 0.5 };
    let other_print = cache_fingerprint(grid, &kernel, &other, n_rho, m_angular);
    match read_cache(&path, other_print, grid, &kernel, n_rho, m_angular)? {
        Some(_) => println!("reload with e = 0.5: cache wrongly accepted"),
        None => println!("reload with e = 0.5: fingerprint mismatch, cache skipped"),
    }

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
