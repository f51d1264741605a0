//! Scratch: dump the v2 ~ 0 slice of the heated hard-sphere steady state
//! at production resolution so the tail-fit window can be verified on
//! real data before the long acceptance runs.

use granular::diagnostics::{self, nearest_bin};
use granular::grid::GridSpec;
use granular::integrator::{run, Method, SolverConfig};
use granular::physics::{InitialCondition, KernelSpec, RestitutionModel};

fn main() -> granular::Result<()> {
    let grid = GridSpec::new(2, 128, 10.0)?;
    let config = SolverConfig {
        tau: 0.1,
        dt: 0.01,
        t_final: 30.0,
        method: Method::Fast,
        output_every: 500,
        n_rho: Some(32),
        m_angular: Some(16),
        ..SolverConfig::default()
    };
    let ic = InitialCondition::Flat2D {
        w0: 2.0 * 6.0f64.sqrt(),
    };
    for (kernel, label) in [(KernelSpec::hard_spheres_2d(), "hard_spheres")] {
        let output = run(
            grid,
            &kernel,
            &RestitutionModel::Constant { e: 0.5 },
            &ic,
            &config,
        )?;
        let field = &output.final_field;
        let t = diagnostics::moments(field)?.temperature;
        let j = nearest_bin(grid, 0.17);
        let n = grid.n();
        let values = field.values();
        println!("# {label} T={t:.6} slice_j={j} v2={:.4}", grid.node(j));
        for i in 0..n {
            println!("{label},{:.6},{:.6e}", grid.node(i), values[i * n + j]);
        }
        match diagnostics::tail_exponent(field, j) {
            Ok(fit) => println!("# fit alpha={} residuals={:?}", fit.alpha, fit.residuals),
            Err(err) => println!("# fit error: {err}"),
        }
    }
    Ok(())
}
