//! Collision kernels, restitution-coefficient laws, and initial conditions.
//!
//! The collision kernel is of variable-hard-sphere type with an optional
//! energy factor,
//!
//! ```text
//! B(|g|, E) = C_λ |g|^λ · E(f)^γ,    0 ≤ λ ≤ 1,
//! ```
//!
//! independent of the scattering angle; `λ = 0` is the Maxwell
//! (pseudo-molecule) kernel, `λ = 1` hard spheres. The `E^γ` factor is not
//! part of [`KernelSpec::amplitude`]: it depends on the solution and is
//! applied by the collision module at evaluation time.

use crate::error::{GranularError, Result};
use crate::grid::{DistributionField, GridSpec};

/// Variable-hard-sphere collision kernel `C_λ |g|^λ E^γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    /// Velocity exponent `λ ∈ [0, 1]`.
    pub lambda: f64,
    /// Positive prefactor `C_λ`.
    pub c_lambda: f64,
    /// Energy exponent `γ` (0 disables the energy factor).
    pub gamma: f64,
}

impl KernelSpec {
    /// Validated constructor.
    pub fn new(lambda: f64, c_lambda: f64, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(GranularError::InvalidParameter {
                name: "lambda",
                value: lambda,
                constraint: "kernel exponent must lie in [0, 1]",
            });
        }
        if !(c_lambda > 0.0) {
            return Err(GranularError::InvalidParameter {
                name: "c_lambda",
                value: c_lambda,
                constraint: "kernel prefactor must be positive",
            });
        }
        if !gamma.is_finite() {
            return Err(GranularError::InvalidParameter {
                name: "gamma",
                value: gamma,
                constraint: "energy exponent must be finite",
            });
        }
        Ok(KernelSpec {
            lambda,
            c_lambda,
            gamma,
        })
    }

    /// Maxwell pseudo-molecules in 2-D: `B = 1/(2π)`.
    pub fn maxwell_2d() -> Self {
        KernelSpec {
            lambda: 0.0,
            c_lambda: 0.5 / std::f64::consts::PI,
            gamma: 0.0,
        }
    }

    /// Hard spheres in 2-D: `B = |g|/(2π)`.
    pub fn hard_spheres_2d() -> Self {
        KernelSpec {
            lambda: 1.0,
            c_lambda: 0.5 / std::f64::consts::PI,
            gamma: 0.0,
        }
    }

    /// Hard spheres in 3-D: `B = |g|/(4π)`.
    pub fn hard_spheres_3d() -> Self {
        KernelSpec {
            lambda: 1.0,
            c_lambda: 0.25 / std::f64::consts::PI,
            gamma: 0.0,
        }
    }

    /// Speed-dependent amplitude `C_λ ρ^λ` (without the `E^γ` factor).
    pub fn amplitude(&self, rho: f64) -> f64 {
        debug_assert!(rho >= 0.0);
        if self.lambda == 0.0 {
            self.c_lambda
        } else {
            self.c_lambda * rho.powf(self.lambda)
        }
    }
}

/// Restitution-coefficient law `e(ρ)`, `ρ = |g|` the impact speed.
///
/// Every law maps `ρ ≥ 0` into `(0, 1]`; `e = 1` is elastic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RestitutionModel {
    /// Speed-independent coefficient `e ∈ (0, 1]`.
    Constant { e: f64 },
    /// Smooth step `e(ρ) = (e0-1)/2 · tanh(ρ - 4) + (e0+1)/2`, decaying
    /// from ≈1 at small speeds to `e0 ∈ (0, 1)` at large speeds.
    Tanh { e0: f64 },
    /// Rational law `e(ρ) = 1 / (1 + c ρ^{γ_t})`, elastic at `c = 0`.
    Toscani { c: f64, gamma_t: f64 },
    /// Viscoelastic hard spheres: the root `e ∈ (0, 1]` of
    /// `e + a ρ^{1/5} e^{3/5} = 1`.
    Viscoelastic { a: f64 },
}

impl RestitutionModel {
    /// Checks the parameter-domain invariants.
    pub fn validate(&self) -> Result<()> {
        match *self {
            RestitutionModel::Constant { e } => {
                if !(e > 0.0 && e <= 1.0) {
                    return Err(GranularError::InvalidParameter {
                        name: "e",
                        value: e,
                        constraint: "constant restitution must lie in (0, 1]",
                    });
                }
            }
            RestitutionModel::Tanh { e0 } => {
                if !(e0 > 0.0 && e0 < 1.0) {
                    return Err(GranularError::InvalidParameter {
                        name: "e0",
                        value: e0,
                        constraint: "tanh restitution limit must lie in (0, 1)",
                    });
                }
            }
            RestitutionModel::Toscani { c, gamma_t } => {
                if !(c >= 0.0) {
                    return Err(GranularError::InvalidParameter {
                        name: "c",
                        value: c,
                        constraint: "must be nonnegative",
                    });
                }
                if !(gamma_t >= 0.0) {
                    return Err(GranularError::InvalidParameter {
                        name: "gamma_t",
                        value: gamma_t,
                        constraint: "must be nonnegative",
                    });
                }
            }
            RestitutionModel::Viscoelastic { a } => {
                if !(a >= 0.0) {
                    return Err(GranularError::InvalidParameter {
                        name: "a",
                        value: a,
                        constraint: "must be nonnegative",
                    });
                }
            }
        }
        Ok(())
    }

    /// Evaluates `e(ρ)` for an impact speed `ρ ≥ 0`.
    pub fn evaluate(&self, rho: f64) -> Result<f64> {
        debug_assert!(rho >= 0.0);
        match *self {
            RestitutionModel::Constant { e } => Ok(e),
            RestitutionModel::Tanh { e0 } => {
                Ok(0.5 * (e0 - 1.0) * (rho - 4.0).tanh() + 0.5 * (e0 + 1.0))
            }
            RestitutionModel::Toscani { c, gamma_t } => Ok(1.0 / (1.0 + c * rho.powf(gamma_t))),
            RestitutionModel::Viscoelastic { a } => viscoelastic_root(a, rho),
        }
    }

    /// True when the law is identically elastic.
    pub fn is_elastic(&self) -> bool {
        match *self {
            RestitutionModel::Constant { e } => e == 1.0,
            RestitutionModel::Tanh { .. } => false,
            RestitutionModel::Toscani { c, .. } => c == 0.0,
            RestitutionModel::Viscoelastic { a } => a == 0.0,
        }
    }
}

/// Solves `e + a ρ^{1/5} e^{3/5} = 1` for `e ∈ (0, 1]` by bisection.
///
/// The left-hand side is strictly increasing in `e` with value `-1` at
/// `e = 0` and `a ρ^{1/5} ≥ 0` at `e = 1`, so the root is always bracketed
/// for `a ≥ 0`; the bracket check is kept as a defensive guard.
fn viscoelastic_root(a: f64, rho: f64) -> Result<f64> {
    let coefficient = a * rho.powf(0.2);
    let residual = |e: f64| e + coefficient * e.powf(0.6) - 1.0;
    if residual(1.0) < 0.0 {
        return Err(GranularError::RootNotBracketed { rho });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Initial velocity distributions used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// Maxwellian `ρ0/(2πT0) · exp(-|v-u0|²/(2T0))` in 2-D.
    Maxwellian2D { rho0: f64, u0: [f64; 2], t0: f64 },
    /// Uniform density `1/(4w0²)` on the square `[-w0, w0]²`, zero outside.
    Flat2D { w0: f64 },
    /// Maxwellian `ρ0/(2πT0)^{3/2} · exp(-|v-u0|²/(2T0))` in 3-D.
    Maxwellian3D { rho0: f64, u0: [f64; 3], t0: f64 },
}

impl InitialCondition {
    /// Velocity dimension the condition lives in.
    pub fn dim(&self) -> usize {
        match self {
            InitialCondition::Maxwellian2D { .. } | InitialCondition::Flat2D { .. } => 2,
            InitialCondition::Maxwellian3D { .. } => 3,
        }
    }

    /// Checks the parameter-domain invariants.
    pub fn validate(&self) -> Result<()> {
        let (name, value) = match *self {
            InitialCondition::Maxwellian2D { rho0, t0, .. }
            | InitialCondition::Maxwellian3D { rho0, t0, .. } => {
                if !(rho0 > 0.0) {
                    ("rho0", rho0)
                } else if !(t0 > 0.0) {
                    ("t0", t0)
                } else {
                    return Ok(());
                }
            }
            InitialCondition::Flat2D { w0 } => {
                if !(w0 > 0.0) {
                    ("w0", w0)
                } else {
                    return Ok(());
                }
            }
        };
        Err(GranularError::InvalidParameter {
            name,
            value,
            constraint: "must be positive",
        })
    }

    /// Pointwise density at a velocity (first `dim` components used).
    pub fn density(&self, v: &[f64]) -> f64 {
        match *self {
            InitialCondition::Maxwellian2D { rho0, u0, t0 } => {
                let dx = v[0] - u0[0];
                let dy = v[1] - u0[1];
                rho0 / (2.0 * std::f64::consts::PI * t0) * (-(dx * dx + dy * dy) / (2.0 * t0)).exp()
            }
            InitialCondition::Flat2D { w0 } => {
                // Edge-inclusive: a node exactly at ±w0 gets the interior
                // value (a deterministic measure-zero choice).
                if v[0].abs() <= w0 && v[1].abs() <= w0 {
                    0.25 / (w0 * w0)
                } else {
                    0.0
                }
            }
            InitialCondition::Maxwellian3D { rho0, u0, t0 } => {
                let dx = v[0] - u0[0];
                let dy = v[1] - u0[1];
                let dz = v[2] - u0[2];
                rho0 / (2.0 * std::f64::consts::PI * t0).powf(1.5)
                    * (-(dx * dx + dy * dy + dz * dz) / (2.0 * t0)).exp()
            }
        }
    }
}

/// Samples an initial condition pointwise on the grid.
pub fn build_initial(ic: &InitialCondition, grid: GridSpec) -> Result<DistributionField> {
    if ic.dim() != grid.dim() {
        return Err(GranularError::DimensionMismatch {
            ic_dim: ic.dim(),
            grid_dim: grid.dim(),
        });
    }
    ic.validate()?;
    let nodes = grid.axis_nodes();
    let mut values = vec![0.0; grid.total()];
    let mut v = [0.0f64; 3];
    grid.for_each_index(|lin, idx| {
        for (ax, &i) in idx.iter().enumerate() {
            v[ax] = nodes[i];
        }
        values[lin] = ic.density(&v[..grid.dim()]);
    });
    DistributionField::from_values(grid, values)
}
