//! Direct versus fast collision evaluation on the same field.
//!
//! Precomputes both table sets on a small 2-D grid, evaluates the collision
//! operator on a random nonnegative field with each method, and prints the
//! relative l2 discrepancy together with table-build and evaluation times.
//! The two discretize the identical quadrature, so they agree to rounding;
//! the fast path just factorizes the gain term through FFTs.
//!
//! Takes a few seconds.

use std::time::Instant;

use granular::collision::{
    eval_direct, eval_fast, precompute_direct, precompute_gain, precompute_loss,
    CollisionQuadrature, FastWorkspace, DEFAULT_MEMORY_BUDGET,
};
use granular::fft::MultiFft;
use granular::grid::{DistributionField, GridSpec};
use granular::physics::{KernelSpec, RestitutionModel};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> granular::Result<()> {
    let grid = GridSpec::new(2, 16, 4.0)?;
    let kernel = KernelSpec::maxwell_2d();
    let restitution = RestitutionModel::Constant { e: 0.8 };
    let quadrature = CollisionQuadrature::new(grid, 32, 16)?;

    let start = Instant::now();
    let direct = precompute_direct(grid, &kernel, &restitution, &quadrature, DEFAULT_MEMORY_BUDGET)?;
    let direct_build = start.elapsed();

    let start = Instant::now();
    let gain = precompute_gain(grid, &kernel, &restitution, &quadrature, DEFAULT_MEMORY_BUDGET)?;
    let loss = precompute_loss(grid, &kernel, &quadrature);
    let fast_build = start.elapsed();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let values: Vec<f64> = (0..grid.total()).map(|_| rng.random::<f64>()).collect();
    let mut field = DistributionField::from_values(grid, values)?;
    let mut fft = MultiFft::new(grid.dim(), grid.n());
    let coeffs = field.coeffs(&mut fft).to_vec();

    let start = Instant::now();
    let q_direct = eval_direct(&direct, &coeffs, None)?;
    let direct_eval = start.elapsed();

    let mut workspace = FastWorkspace::new(grid);
    let start = Instant::now();
    let q_fast = eval_fast(&gain, &loss, &coeffs, None, &mut workspace)?;
    let fast_eval = start.elapsed();

    let norm: f64 = q_direct.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let diff: f64 = q_direct
        .iter()
        .zip(&q_fast)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();

    println!("grid 16^2, 32 radial x 16 angular quadrature, e = 0.8");
    println!("direct: build {direct_build:?}, eval {direct_eval:?}");
    println!("fast:   build {fast_build:?}, eval {fast_eval:?}");
    println!("relative l2 discrepancy: {:.3e}", diff / norm);
    Ok(())
}
