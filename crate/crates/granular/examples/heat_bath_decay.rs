//! Spectral accuracy of the heat-bath (diffusion) term in isolation.
//!
//! With collisions switched off the equation reduces to the heat equation
//! in velocity, which the Fourier discretization solves mode by mode:
//! every coefficient decays like exp(-tau (pi/L)^2 |k|^2 t). This example
//! time-steps only the bath term with the classical RK4 scheme and prints
//! the worst deviation from that analytic decay.
//!
//! Runs in well under a second.

use granular::fft::MultiFft;
use granular::grid::GridSpec;
use granular::integrator::{heat_bath_rhs, rk4_step};
use granular::physics::{build_initial, InitialCondition};
use num_complex::Complex64;

fn main() -> granular::Result<()> {
    let grid = GridSpec::new(2, 16, 10.0)?;
    let tau = 0.05;
    let dt = 0.01;
    let steps = 100;

    let ic = InitialCondition::Maxwellian2D {
        rho0: 1.0,
        u0: [1.0, -0.5],
        t0: 4.0,
    };
    let mut field = build_initial(&ic, grid)?;
    let mut fft = MultiFft::new(grid.dim(), grid.n());
    let initial = field.coeffs(&mut fft).to_vec();

    let mut coeffs = initial.clone();
    let mut rhs =
        |state: &[Complex64]| -> granular::Result<Vec<Complex64>> {
            Ok(heat_bath_rhs(state, grid, tau))
        };
    for _ in 0..steps {
        coeffs = rk4_step(&coeffs, &mut rhs, dt)?;
    }

    let base = tau * (std::f64::consts::PI / grid.half_width()).powi(2);
    let t = dt * steps as f64;
    let mut worst = 0.0f64;
    grid.for_each_index(|lin, idx| {
        let k_sq: i64 = idx.iter().map(|&i| grid.frequency(i).pow(2)).sum();
        let exact = initial[lin] * (-base * k_sq as f64 * t).exp();
        worst = worst.max((coeffs[lin] - exact).norm());
    });

    println!("bath-only evolution, tau = {tau}, {steps} RK4 steps of dt = {dt}");
    println!("worst |mode - analytic| over all {} modes: {worst:.3e}", grid.total());
    Ok(())
}
