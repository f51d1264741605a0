//! Deterministic Fourier spectral solver for the space-homogeneous
//! inelastic Boltzmann equation with an optional heat bath,
//!
//! ```text
//! ∂_t f = Q(f, f) + τ Δ_v f,
//! ```
//!
//! where `f(t, v)` is the velocity distribution of a granular gas and `Q`
//! is the inelastic collision operator with restitution coefficient
//! `e ∈ (0, 1]` (constant or a function of the impact speed).
//!
//! The velocity domain is truncated and periodized ([`grid`]), the collision
//! operator is discretized by Fourier-Galerkin projection ([`collision`])
//! with two interchangeable evaluators — a direct `O(N^{2d})` reference and
//! a fast `O(M N_ρ N^d log N)` method built from FFT convolutions — and the
//! resulting ODE system is advanced with explicit RK4 ([`integrator`]).
//! Physical set-ups (collision kernels, restitution laws, initial states)
//! live in [`physics`], quadrature rules in [`quadrature`], measurement and
//! regression tools in [`diagnostics`], and config/serialization plumbing
//! for the `granular` binary in [`cli_io`].
//!
//! Everything is deterministic: identical inputs produce identical outputs
//! byte for byte, independent of worker count.
//!
//! # Example
//!
//! Relax a Maxwellian under moderate inelasticity with a heat bath and
//! check the temperature against the analytic law for the Maxwell kernel:
//!
//! ```
//! use granular::physics::{InitialCondition, KernelSpec, RestitutionModel};
//! use granular::grid::GridSpec;
//! use granular::integrator::{run, Method, SolverConfig};
//!
//! let grid = GridSpec::new(2, 32, 10.0)?;
//! let kernel = KernelSpec::maxwell_2d();
//! let restitution = RestitutionModel::Constant { e: 0.95 };
//! let ic = InitialCondition::Maxwellian2D { rho0: 1.0, u0: [0.0, 0.0], t0: 8.0 };
//! let config = SolverConfig {
//!     tau: 0.05,
//!     dt: 0.01,
//!     t_final: 0.1,
//!     method: Method::Fast,
//!     output_every: 5,
//!     ..SolverConfig::default()
//! };
//! let output = run(grid, &kernel, &restitution, &ic, &config)?;
//! let last = output.trajectory.last().unwrap();
//! assert!((last.moments.temperature - 8.0).abs() < 0.1);
//! # Ok::<(), granular::error::GranularError>(())
//! ```

pub mod cli_io;
pub mod collision;
pub mod diagnostics;
pub mod error;
pub mod fft;
pub mod grid;
pub mod integrator;
pub mod physics;
pub mod quadrature;

pub use error::{GranularError, Result};
