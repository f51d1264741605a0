//! Spectral evaluation of the inelastic collision operator.
//!
//! In the Fourier-Galerkin discretization the operator is a weighted
//! convolution of the coefficient vector with itself,
//!
//! ```text
//! Q̂_k = Σ_{l+m≡k} G(l, m) f̂_l f̂_m,
//! ```
//!
//! with mode sums taken modulo N (the box is periodic, so products of
//! Fourier modes fold back into the representable set; the anti-aliasing
//! bound on `L` keeps folded contributions out of the ball where the
//! solution lives). The weight splits into a gain and a loss part,
//!
//! ```text
//! G(l, m) = ∫_{B_R} e^{-i(π/L) m·g} [∫_{S^{d-1}} B (e^{i(π/L)((1+e)/4)(l+m)·(g - |g|σ)} - 1) dσ] dg,
//! ```
//!
//! discretized with a Gauss-Legendre rule in `|g|` and a sphere rule shared
//! by the `ĝ` and `σ` integrals. Two evaluators consume the same
//! discretization:
//!
//! * [`DirectWeights`]: the full `O(N^{2d})` table `G(l, m)`, used as the
//!   reference oracle for small `N`;
//! * [`GainTensor`] + [`LossTable`]: the low-rank factorization of the gain
//!   term over quadrature pairs `(ρ_j, ĝ_m)`, each contributing one FFT
//!   convolution, for a fast `O(N_ρ M N^d log N)` evaluation.
//!
//! Because both paths are built from identical quadrature sums, they agree
//! to FFT roundoff — and the zero mode vanishes exactly: the σ-bracket above
//! is identically zero at `l + m = 0`, which the tables realize bitwise.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{GranularError, Result};
use crate::fft::MultiFft;
use crate::grid::GridSpec;
use crate::physics::{KernelSpec, RestitutionModel};
use crate::quadrature::{Quadrature1D, SphereQuadrature};

/// Default memory budget (bytes) for precomputed tables: 8 GB.
pub const DEFAULT_MEMORY_BUDGET: u64 = 8_000_000_000;

/// Pairs per parallel work unit during evaluation and precomputation.
/// Fixing the chunk size (instead of deriving it from the worker count)
/// fixes the floating-point reduction order, so results are bit-identical
/// for any number of threads.
const PAIR_CHUNK: usize = 64;

/// Radial × angular product quadrature for the collision integrals.
///
/// One sphere rule serves both the `ĝ` (relative-velocity direction) and
/// `σ` (scattering direction) integrals, as the low-rank construction
/// requires.
#[derive(Debug, Clone)]
pub struct CollisionQuadrature {
    radial: Quadrature1D,
    sphere: SphereQuadrature,
}

impl CollisionQuadrature {
    /// Gauss-Legendre with `n_rho` nodes on `[0, R]` × sphere rule with
    /// `m_angular` directions (uniform circle in 2-D, spherical design in
    /// 3-D).
    pub fn new(grid: GridSpec, n_rho: usize, m_angular: usize) -> Result<Self> {
        Ok(CollisionQuadrature {
            radial: Quadrature1D::gauss_legendre(n_rho, 0.0, grid.truncation_radius())?,
            sphere: SphereQuadrature::for_dimension(grid.dim(), m_angular)?,
        })
    }

    /// Conventional sizes: `n_rho = N`, `m_angular = 16` (2-D) or 32 (3-D).
    pub fn default_for(grid: GridSpec) -> Result<Self> {
        Self::new(grid, grid.n(), default_m_angular(grid.dim()))
    }

    pub fn n_radial(&self) -> usize {
        self.radial.len()
    }

    pub fn m_angular(&self) -> usize {
        self.sphere.len()
    }

    pub fn radial(&self) -> &Quadrature1D {
        &self.radial
    }

    pub fn sphere(&self) -> &SphereQuadrature {
        &self.sphere
    }
}

/// Conventional angular quadrature size for a dimension.
pub fn default_m_angular(dim: usize) -> usize {
    if dim == 3 {
        32
    } else {
        16
    }
}

/// Loss-term multiplier table `G_loss(m)`, one complex entry per mode.
#[derive(Debug, Clone)]
pub struct LossTable {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl LossTable {
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Values in FFT bin order.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

/// Low-rank gain factorization: for each quadrature pair `p = (ρ_j, ĝ_m)`
/// the mode table `F(k, ρ_j, ĝ_m)`, the scalar weight
/// `w_ρ w_ĝ ρ^{d-1}`, and the separable per-axis phase
/// `e^{-i(π/L)ρ_j ĝ_m·(axis component)}` that modulates the convolution.
#[derive(Debug, Clone)]
pub struct GainTensor {
    grid: GridSpec,
    kernel: KernelSpec,
    n_rho: usize,
    m_angular: usize,
    /// Pair-major `F` tables: `f[p * N^d + bin]`.
    f: Vec<Complex64>,
    /// Quadrature weight per pair.
    weights: Vec<f64>,
    /// Per-pair, per-axis modulation tables: `phase[(p*d + ax)*N + bin]`.
    phase_axes: Vec<Complex64>,
}

impl GainTensor {
    /// Bytes the gain tensor will occupy: the dominant `N_ρ·M·N^d` complex
    /// `F` entries plus the per-pair weights and axis phase tables.
    pub fn estimate_bytes(grid: GridSpec, n_rho: usize, m_angular: usize) -> u64 {
        let pairs = (n_rho * m_angular) as u64;
        let total = grid.total() as u64;
        let complex = std::mem::size_of::<Complex64>() as u64;
        pairs * total * complex + pairs * (8 + (grid.dim() * grid.n()) as u64 * complex)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn n_rho(&self) -> usize {
        self.n_rho
    }

    pub fn m_angular(&self) -> usize {
        self.m_angular
    }

    /// Number of quadrature pairs `N_ρ · M`.
    pub fn pairs(&self) -> usize {
        self.n_rho * self.m_angular
    }

    /// `F(k, ρ_j, ĝ_m)` for pair `p = j·M + m` at linear mode `bin`.
    pub fn f_value(&self, pair: usize, bin: usize) -> Complex64 {
        self.f[pair * self.grid.total() + bin]
    }

    /// Quadrature weight of a pair.
    pub fn weight(&self, pair: usize) -> f64 {
        self.weights[pair]
    }

    /// The loss-side σ-integral for a pair, `C_λ ρ^λ |S^{d-1}|`, realized
    /// bitwise as the zero mode of `F` (whose imaginary part is exactly 0).
    fn loss_sigma_integral(&self, pair: usize) -> f64 {
        self.f[pair * self.grid.total()].re
    }

    fn phase_axis(&self, pair: usize, axis: usize) -> &[Complex64] {
        let n = self.grid.n();
        let start = (pair * self.grid.dim() + axis) * n;
        &self.phase_axes[start..start + n]
    }

    /// Writes `out[bin] = phase_p[bin] * f̂[bin]` with the separable
    /// modulation `phase_p[m] = e^{-i(π/L)ρ_j m·ĝ}`.
    fn modulate(&self, pair: usize, coeffs: &[Complex64], out: &mut [Complex64]) {
        let n = self.grid.n();
        match self.grid.dim() {
            2 => {
                let t0 = self.phase_axis(pair, 0);
                let t1 = self.phase_axis(pair, 1);
                for i0 in 0..n {
                    let p0 = t0[i0];
                    let row = i0 * n;
                    for i1 in 0..n {
                        out[row + i1] = p0 * t1[i1] * coeffs[row + i1];
                    }
                }
            }
            _ => {
                let t0 = self.phase_axis(pair, 0);
                let t1 = self.phase_axis(pair, 1);
                let t2 = self.phase_axis(pair, 2);
                for i0 in 0..n {
                    let p0 = t0[i0];
                    for i1 in 0..n {
                        let p01 = p0 * t1[i1];
                        let row = (i0 * n + i1) * n;
                        for i2 in 0..n {
                            out[row + i2] = p01 * t2[i2] * coeffs[row + i2];
                        }
                    }
                }
            }
        }
    }

    /// Evaluates `phase_p` at one linear bin (test/reference helper).
    #[cfg(test)]
    fn phase_at(&self, pair: usize, bin_indices: &[usize]) -> Complex64 {
        let mut phase = Complex64::new(1.0, 0.0);
        for (ax, &i) in bin_indices.iter().enumerate() {
            phase *= self.phase_axis(pair, ax)[i];
        }
        phase
    }
}

/// Full `O(N^{2d})` weight table for the direct evaluator.
#[derive(Debug, Clone)]
pub struct DirectWeights {
    grid: GridSpec,
    kernel: KernelSpec,
    /// Row-major `values[l * N^d + m] = G(l, m)` in FFT bin order.
    values: Vec<Complex64>,
}

impl DirectWeights {
    /// Bytes the direct table will occupy.
    pub fn estimate_bytes(grid: GridSpec) -> u64 {
        let total = grid.total() as u64;
        total * total * std::mem::size_of::<Complex64>() as u64
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// `G(l, m)` by linear bin indices.
    pub fn value(&self, l: usize, m: usize) -> Complex64 {
        self.values[l * self.grid.total() + m]
    }
}

/// Builds the loss table `G_loss(m) = ∫_{B_R} e^{-i(π/L)m·g} [∫ B dσ] dg`
/// with the product quadrature (the inner σ-integral is `C_λ ρ^λ |S^{d-1}|`
/// for speed-independent angular kernels).
pub fn precompute_loss(
    grid: GridSpec,
    kernel: &KernelSpec,
    quadrature: &CollisionQuadrature,
) -> LossTable {
    let total = grid.total();
    let surface = quadrature.sphere().surface();
    let mut values = vec![Complex64::default(); total];
    let mut axis_tables = vec![Complex64::default(); grid.dim() * grid.n()];
    for (&rho, &w_rho) in quadrature
        .radial()
        .nodes()
        .iter()
        .zip(quadrature.radial().weights())
    {
        let sigma_integral = kernel.amplitude(rho) * surface;
        let radial_factor = w_rho * rho.powi(grid.dim() as i32 - 1) * sigma_integral;
        for (ghat, &w_ghat) in quadrature
            .sphere()
            .points()
            .iter()
            .zip(quadrature.sphere().weights())
        {
            fill_phase_axes(&grid, ghat, -rho * std::f64::consts::PI / grid.half_width(),
                &mut axis_tables);
            accumulate_separable(
                &grid,
                &axis_tables,
                Complex64::new(radial_factor * w_ghat, 0.0),
                &mut values,
            );
        }
    }
    LossTable { grid, values }
}

/// Fills `tables[ax*N + bin] = e^{i scale * u_ax * freq(bin)}` for each axis.
fn fill_phase_axes(grid: &GridSpec, u: &[f64; 3], scale: f64, tables: &mut [Complex64]) {
    let n = grid.n();
    for ax in 0..grid.dim() {
        for bin in 0..n {
            let theta = scale * u[ax] * grid.frequency(bin) as f64;
            tables[ax * n + bin] = Complex64::from_polar(1.0, theta);
        }
    }
}

/// Adds `factor * Π_ax tables[ax][bin_ax]` into `out` over all modes.
fn accumulate_separable(
    grid: &GridSpec,
    tables: &[Complex64],
    factor: Complex64,
    out: &mut [Complex64],
) {
    let n = grid.n();
    match grid.dim() {
        2 => {
            let (t0, t1) = tables.split_at(n);
            for i0 in 0..n {
                let p0 = factor * t0[i0];
                let row = i0 * n;
                for i1 in 0..n {
                    out[row + i1] += p0 * t1[i1];
                }
            }
        }
        _ => {
            let (t0, rest) = tables.split_at(n);
            let (t1, t2) = rest.split_at(n);
            for i0 in 0..n {
                let p0 = factor * t0[i0];
                for i1 in 0..n {
                    let p01 = p0 * t1[i1];
                    let row = (i0 * n + i1) * n;
                    for i2 in 0..n {
                        out[row + i2] += p01 * t2[i2];
                    }
                }
            }
        }
    }
}

/// Precomputes the gain tensor `F(k, ρ_j, ĝ_m)` for every quadrature pair.
///
/// Call [`GainTensor::estimate_bytes`] for the allocation size in advance;
/// the builder refuses to exceed `memory_budget`.
pub fn precompute_gain(
    grid: GridSpec,
    kernel: &KernelSpec,
    restitution: &RestitutionModel,
    quadrature: &CollisionQuadrature,
    memory_budget: u64,
) -> Result<GainTensor> {
    restitution.validate()?;
    let n_rho = quadrature.n_radial();
    let m_angular = quadrature.m_angular();
    let required = GainTensor::estimate_bytes(grid, n_rho, m_angular);
    if required > memory_budget {
        return Err(GranularError::MemoryBudgetExceeded {
            required_bytes: required,
            budget_bytes: memory_budget,
        });
    }
    let total = grid.total();
    let dim = grid.dim();
    let n = grid.n();
    let pairs = n_rho * m_angular;

    // Restitution enters only through e(ρ) at the radial nodes.
    let mut phase_scales = Vec::with_capacity(n_rho);
    for &rho in quadrature.radial().nodes() {
        let e = restitution.evaluate(rho)?;
        phase_scales.push(std::f64::consts::PI / grid.half_width() * rho * (1.0 + e) / 4.0);
    }

    let mut f = vec![Complex64::default(); pairs * total];
    let mut weights = vec![0.0f64; pairs];
    let mut phase_axes = vec![Complex64::default(); pairs * dim * n];

    // Radial nodes are independent; each owns a contiguous slab of every
    // output array, so the parallel split is free of shared mutable state
    // and the result is identical for any worker count.
    let radial_nodes = quadrature.radial().nodes();
    let radial_weights = quadrature.radial().weights();
    let sphere = quadrature.sphere();
    f.par_chunks_mut(m_angular * total)
        .zip(weights.par_chunks_mut(m_angular))
        .zip(phase_axes.par_chunks_mut(m_angular * dim * n))
        .enumerate()
        .for_each(|(j, ((f_slab, weight_slab), phase_slab))| {
            let rho = radial_nodes[j];
            let w_rho = radial_weights[j];
            let amplitude = kernel.amplitude(rho);
            let c = phase_scales[j];
            // σ-sum shared by every ĝ of this radial node:
            // S_σ(k) = Σ_σ w_σ e^{-i c k·σ}.
            let mut sigma_sum = vec![Complex64::default(); total];
            let mut axis_tables = vec![Complex64::default(); dim * n];
            for (sigma, &w_sigma) in sphere.points().iter().zip(sphere.weights()) {
                fill_phase_axes(&grid, sigma, -c, &mut axis_tables);
                accumulate_separable(
                    &grid,
                    &axis_tables,
                    Complex64::new(w_sigma, 0.0),
                    &mut sigma_sum,
                );
            }
            for (mg, (ghat, &w_ghat)) in sphere
                .points()
                .iter()
                .zip(sphere.weights())
                .enumerate()
            {
                weight_slab[mg] = w_rho * w_ghat * rho.powi(dim as i32 - 1);
                // Eval-time modulation e^{-i(π/L)ρ m·ĝ}.
                fill_phase_axes(
                    &grid,
                    ghat,
                    -rho * std::f64::consts::PI / grid.half_width(),
                    &mut phase_slab[mg * dim * n..(mg + 1) * dim * n],
                );
                // F(k) = amplitude * e^{i c k·ĝ} * S_σ(k).
                fill_phase_axes(&grid, ghat, c, &mut axis_tables);
                let f_pair = &mut f_slab[mg * total..(mg + 1) * total];
                write_separable_product(&grid, &axis_tables, amplitude, &sigma_sum, f_pair);
            }
        });

    Ok(GainTensor {
        grid,
        kernel: *kernel,
        n_rho,
        m_angular,
        f,
        weights,
        phase_axes,
    })
}

/// Writes `out[bin] = amplitude * Π_ax tables[ax][bin_ax] * extra[bin]`.
fn write_separable_product(
    grid: &GridSpec,
    tables: &[Complex64],
    amplitude: f64,
    extra: &[Complex64],
    out: &mut [Complex64],
) {
    let n = grid.n();
    match grid.dim() {
        2 => {
            let (t0, t1) = tables.split_at(n);
            for i0 in 0..n {
                let p0 = amplitude * t0[i0];
                let row = i0 * n;
                for i1 in 0..n {
                    out[row + i1] = p0 * t1[i1] * extra[row + i1];
                }
            }
        }
        _ => {
            let (t0, rest) = tables.split_at(n);
            let (t1, t2) = rest.split_at(n);
            for i0 in 0..n {
                let p0 = amplitude * t0[i0];
                for i1 in 0..n {
                    let p01 = p0 * t1[i1];
                    let row = (i0 * n + i1) * n;
                    for i2 in 0..n {
                        out[row + i2] = p01 * t2[i2] * extra[row + i2];
                    }
                }
            }
        }
    }
}

/// Precomputes the dense direct table `G(l, m)` from the same quadrature
/// sums as the fast tables, so the two evaluators agree to roundoff.
///
/// Refuses grids whose `N^{2d}` complex entries exceed `memory_budget`.
pub fn precompute_direct(
    grid: GridSpec,
    kernel: &KernelSpec,
    restitution: &RestitutionModel,
    quadrature: &CollisionQuadrature,
    memory_budget: u64,
) -> Result<DirectWeights> {
    let required = DirectWeights::estimate_bytes(grid)
        + GainTensor::estimate_bytes(grid, quadrature.n_radial(), quadrature.m_angular());
    if required > memory_budget {
        return Err(GranularError::MemoryBudgetExceeded {
            required_bytes: required,
            budget_bytes: memory_budget,
        });
    }
    let gain = precompute_gain(grid, kernel, restitution, quadrature, memory_budget)?;
    let total = grid.total();
    let n = grid.n();
    let dim = grid.dim();
    let pairs = gain.pairs();

    let mut values = vec![Complex64::default(); total * total];
    // Row l: G(l, m) = Σ_p w_p phase_p(m) (F_p(fold(l+m)) - S_B,p), the
    // bracket subtracted per pair so the l+m=0 entry vanishes bitwise.
    values
        .par_chunks_mut(total)
        .enumerate()
        .for_each(|(l_lin, row)| {
            let mut l_idx = [0usize; 3];
            let mut rem = l_lin;
            for ax in (0..dim).rev() {
                l_idx[ax] = rem % n;
                rem /= n;
            }
            let mut fold = vec![0usize; dim * n];
            for ax in 0..dim {
                for mb in 0..n {
                    fold[ax * n + mb] = (l_idx[ax] + mb) % n;
                }
            }
            for pair in 0..pairs {
                let w = Complex64::new(gain.weight(pair), 0.0);
                let f_table = &gain.f[pair * total..(pair + 1) * total];
                let s_b = gain.loss_sigma_integral(pair);
                let phase0 = gain.phase_axis(pair, 0);
                let phase1 = gain.phase_axis(pair, 1);
                match dim {
                    2 => {
                        let fold0 = &fold[..n];
                        let fold1 = &fold[n..2 * n];
                        for m0 in 0..n {
                            let p0 = w * phase0[m0];
                            let k0 = fold0[m0] * n;
                            let row_m = m0 * n;
                            for m1 in 0..n {
                                let f_fold = f_table[k0 + fold1[m1]];
                                row[row_m + m1] +=
                                    p0 * phase1[m1] * (f_fold - s_b);
                            }
                        }
                    }
                    _ => {
                        let phase2 = gain.phase_axis(pair, 2);
                        let fold0 = &fold[..n];
                        let fold1 = &fold[n..2 * n];
                        let fold2 = &fold[2 * n..3 * n];
                        for m0 in 0..n {
                            let p0 = w * phase0[m0];
                            let k0 = fold0[m0] * n;
                            for m1 in 0..n {
                                let p01 = p0 * phase1[m1];
                                let k01 = (k0 + fold1[m1]) * n;
                                let row_m = (m0 * n + m1) * n;
                                for m2 in 0..n {
                                    let f_fold = f_table[k01 + fold2[m2]];
                                    row[row_m + m2] +=
                                        p01 * phase2[m2] * (f_fold - s_b);
                                }
                            }
                        }
                    }
                }
            }
        });

    Ok(DirectWeights {
        grid,
        kernel: *kernel,
        values,
    })
}

/// The `E^γ` prefactor shared by both evaluators.
fn energy_factor(kernel: &KernelSpec, energy: Option<f64>) -> Result<f64> {
    if kernel.gamma == 0.0 {
        return Ok(1.0);
    }
    match energy {
        None => Err(GranularError::MissingEnergy),
        Some(e) if e > 0.0 && e.is_finite() => Ok(e.powf(kernel.gamma)),
        Some(e) => Err(GranularError::InvalidParameter {
            name: "energy",
            value: e,
            constraint: "kinetic energy must be positive and finite",
        }),
    }
}

/// Direct `O(N^{2d})` evaluation `Q̂_k = Σ_{l+m≡k} G(l,m) f̂_l f̂_m`.
pub fn eval_direct(
    weights: &DirectWeights,
    coeffs: &[Complex64],
    energy: Option<f64>,
) -> Result<Vec<Complex64>> {
    let grid = weights.grid;
    if coeffs.len() != grid.total() {
        return Err(GranularError::GridMismatch {
            context: "coefficient vector length differs from the direct table's grid",
        });
    }
    let factor = energy_factor(&weights.kernel, energy)?;
    let n = grid.n();
    let total = grid.total();
    let mut out = vec![Complex64::default(); total];
    let mut wrap = vec![0usize; n];
    match grid.dim() {
        2 => {
            for l0 in 0..n {
                for l1 in 0..n {
                    let l_lin = l0 * n + l1;
                    let fl = coeffs[l_lin];
                    let row = &weights.values[l_lin * total..(l_lin + 1) * total];
                    for (k1, slot) in wrap.iter_mut().enumerate() {
                        *slot = (k1 + n - l1) % n;
                    }
                    for k0 in 0..n {
                        let m0 = (k0 + n - l0) % n * n;
                        let out_row = &mut out[k0 * n..(k0 + 1) * n];
                        for k1 in 0..n {
                            let m_lin = m0 + wrap[k1];
                            out_row[k1] += fl * row[m_lin] * coeffs[m_lin];
                        }
                    }
                }
            }
        }
        _ => {
            let mut l_idx = [0usize; 3];
            for l_lin in 0..total {
                let mut rem = l_lin;
                for ax in (0..3).rev() {
                    l_idx[ax] = rem % n;
                    rem /= n;
                }
                let fl = coeffs[l_lin];
                let row = &weights.values[l_lin * total..(l_lin + 1) * total];
                for (k2, slot) in wrap.iter_mut().enumerate() {
                    *slot = (k2 + n - l_idx[2]) % n;
                }
                for k0 in 0..n {
                    let m0 = (k0 + n - l_idx[0]) % n * n;
                    for k1 in 0..n {
                        let m01 = (m0 + (k1 + n - l_idx[1]) % n) * n;
                        let out_row = &mut out[(k0 * n + k1) * n..(k0 * n + k1 + 1) * n];
                        for k2 in 0..n {
                            let m_lin = m01 + wrap[k2];
                            out_row[k2] += fl * row[m_lin] * coeffs[m_lin];
                        }
                    }
                }
            }
        }
    }
    if factor != 1.0 {
        for q in &mut out {
            *q *= factor;
        }
    }
    Ok(out)
}

/// Reusable buffers for [`eval_fast`]. One workspace per caller; cloning is
/// cheap relative to an evaluation and shares the FFT plans.
#[derive(Clone)]
pub struct FastWorkspace {
    fft: MultiFft,
    transformed: Vec<Complex64>,
    modulated: Vec<Complex64>,
    loss_conv: Vec<Complex64>,
}

impl FastWorkspace {
    pub fn new(grid: GridSpec) -> Self {
        let total = grid.total();
        FastWorkspace {
            fft: MultiFft::new(grid.dim(), grid.n()),
            transformed: vec![Complex64::default(); total],
            modulated: vec![Complex64::default(); total],
            loss_conv: vec![Complex64::default(); total],
        }
    }
}

/// Fast evaluation: the loss term is one FFT convolution of `f̂` with
/// `G_loss ⊙ f̂`; the gain term adds one convolution per quadrature pair,
/// weighted by `F(k, ρ_j, ĝ_m)`.
pub fn eval_fast(
    gain: &GainTensor,
    loss: &LossTable,
    coeffs: &[Complex64],
    energy: Option<f64>,
    workspace: &mut FastWorkspace,
) -> Result<Vec<Complex64>> {
    let grid = gain.grid;
    if loss.grid != grid {
        return Err(GranularError::GridMismatch {
            context: "gain and loss tables were built for different grids",
        });
    }
    if coeffs.len() != grid.total() {
        return Err(GranularError::GridMismatch {
            context: "coefficient vector length differs from the gain tensor's grid",
        });
    }
    let factor = energy_factor(&gain.kernel, energy)?;
    let total = grid.total();
    let pairs = gain.pairs();

    let FastWorkspace {
        fft,
        transformed,
        modulated,
        loss_conv,
    } = workspace;

    // Shared forward transform of f̂ (enters every convolution).
    transformed.copy_from_slice(coeffs);
    fft.forward(transformed);

    // Loss: circular convolution of f̂ with G_loss ⊙ f̂.
    for ((slot, &g), &c) in modulated.iter_mut().zip(loss.values()).zip(coeffs) {
        *slot = g * c;
    }
    fft.forward(modulated);
    for (slot, &a) in modulated.iter_mut().zip(transformed.iter()) {
        *slot *= a;
    }
    fft.inverse(modulated);
    loss_conv.copy_from_slice(modulated);

    // Gain: convolution per pair, accumulated in fixed-size chunks so the
    // reduction order (and hence the result, bitwise) is independent of the
    // worker count.
    let chunk_count = pairs.div_ceil(PAIR_CHUNK);
    let partials: Vec<Vec<Complex64>> = (0..chunk_count)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * PAIR_CHUNK;
            let end = (start + PAIR_CHUNK).min(pairs);
            let mut fft = fft.clone();
            let mut buffer = vec![Complex64::default(); total];
            let mut accum = vec![Complex64::default(); total];
            for pair in start..end {
                gain.modulate(pair, coeffs, &mut buffer);
                fft.forward(&mut buffer);
                for (slot, &a) in buffer.iter_mut().zip(transformed.iter()) {
                    *slot *= a;
                }
                fft.inverse(&mut buffer);
                let w = gain.weight(pair);
                let f_table = &gain.f[pair * total..(pair + 1) * total];
                for ((acc, &f_val), &conv) in accum.iter_mut().zip(f_table).zip(buffer.iter()) {
                    *acc += w * f_val * conv;
                }
            }
            accum
        })
        .collect();

    // The unnormalized forward/inverse pair leaves a factor N^d in every
    // convolution; remove it in the final combination.
    let scale = factor / total as f64;
    let mut out = vec![Complex64::default(); total];
    for partial in &partials {
        for (slot, &p) in out.iter_mut().zip(partial) {
            *slot += p;
        }
    }
    for (slot, &l) in out.iter_mut().zip(loss_conv.iter()) {
        *slot = (*slot - l) * scale;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Precomputation cache ("GGW1").
// ---------------------------------------------------------------------------

const CACHE_MAGIC: &[u8; 4] = b"GGW1";

/// 64-bit FNV-1a fingerprint of every input that determines the tables:
/// grid geometry, kernel, restitution law, and quadrature sizes.
pub fn cache_fingerprint(
    grid: GridSpec,
    kernel: &KernelSpec,
    restitution: &RestitutionModel,
    n_rho: usize,
    m_angular: usize,
) -> u64 {
    let mut hash = Fnv1a::new();
    hash.write(b"grid");
    hash.write_u64(grid.dim() as u64);
    hash.write_u64(grid.n() as u64);
    hash.write_f64(grid.support_radius());
    hash.write_f64(grid.truncation_radius());
    hash.write_f64(grid.half_width());
    hash.write(b"kernel");
    hash.write_f64(kernel.lambda);
    hash.write_f64(kernel.c_lambda);
    hash.write_f64(kernel.gamma);
    hash.write(b"restitution");
    match *restitution {
        RestitutionModel::Constant { e } => {
            hash.write(b"constant");
            hash.write_f64(e);
        }
        RestitutionModel::Tanh { e0 } => {
            hash.write(b"tanh");
            hash.write_f64(e0);
        }
        RestitutionModel::Toscani { c, gamma_t } => {
            hash.write(b"toscani");
            hash.write_f64(c);
            hash.write_f64(gamma_t);
        }
        RestitutionModel::Viscoelastic { a } => {
            hash.write(b"viscoelastic");
            hash.write_f64(a);
        }
    }
    hash.write(b"quadrature");
    hash.write_u64(n_rho as u64);
    hash.write_u64(m_angular as u64);
    hash.finish()
}

struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf29ce484222325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }

    fn write_f64(&mut self, v: f64) {
        self.write(&v.to_bits().to_le_bytes());
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

/// Writes gain and loss tables to a cache file: magic, fingerprint, entry
/// counts, then raw little-endian doubles.
pub fn write_cache(
    path: &std::path::Path,
    fingerprint: u64,
    gain: &GainTensor,
    loss: &LossTable,
) -> Result<()> {
    use std::io::Write;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(CACHE_MAGIC)?;
    file.write_all(&fingerprint.to_le_bytes())?;
    file.write_all(&(loss.values.len() as u64).to_le_bytes())?;
    file.write_all(&(gain.pairs() as u64).to_le_bytes())?;
    for value in &loss.values {
        file.write_all(&value.re.to_le_bytes())?;
        file.write_all(&value.im.to_le_bytes())?;
    }
    for value in &gain.f {
        file.write_all(&value.re.to_le_bytes())?;
        file.write_all(&value.im.to_le_bytes())?;
    }
    for &weight in &gain.weights {
        file.write_all(&weight.to_le_bytes())?;
    }
    for value in &gain.phase_axes {
        file.write_all(&value.re.to_le_bytes())?;
        file.write_all(&value.im.to_le_bytes())?;
    }
    file.flush()?;
    Ok(())
}

/// Loads cached tables. Returns `Ok(None)` when the fingerprint does not
/// match (caller recomputes); fails with [`GranularError::CorruptCache`] on
/// structural damage.
pub fn read_cache(
    path: &std::path::Path,
    fingerprint: u64,
    grid: GridSpec,
    kernel: &KernelSpec,
    n_rho: usize,
    m_angular: usize,
) -> Result<Option<(GainTensor, LossTable)>> {
    use std::io::Read;
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic)
        .map_err(|_| GranularError::CorruptCache {
            message: "file shorter than the magic header".to_string(),
        })?;
    if &magic != CACHE_MAGIC {
        return Err(GranularError::CorruptCache {
            message: format!("bad magic {magic:?}"),
        });
    }
    let stored_fingerprint = read_u64(&mut file)?;
    if stored_fingerprint != fingerprint {
        return Ok(None);
    }
    let total = grid.total();
    let pairs = n_rho * m_angular;
    let n_loss = read_u64(&mut file)? as usize;
    let n_pairs = read_u64(&mut file)? as usize;
    if n_loss != total || n_pairs != pairs {
        return Err(GranularError::CorruptCache {
            message: format!(
                "entry counts ({n_loss} loss, {n_pairs} pairs) do not match \
                 the requested configuration ({total}, {pairs})"
            ),
        });
    }
    let loss_values = read_complex_vec(&mut file, total)?;
    let f = read_complex_vec(&mut file, pairs * total)?;
    let mut weights = vec![0.0f64; pairs];
    for w in &mut weights {
        *w = read_f64(&mut file)?;
    }
    let phase_axes = read_complex_vec(&mut file, pairs * grid.dim() * grid.n())?;
    Ok(Some((
        GainTensor {
            grid,
            kernel: *kernel,
            n_rho,
            m_angular,
            f,
            weights,
            phase_axes,
        },
        LossTable {
            grid,
            values: loss_values,
        },
    )))
}

fn read_u64(reader: &mut impl std::io::Read) -> Result<u64> {
    let mut bytes = [0u8; 8];
    reader
        .read_exact(&mut bytes)
        .map_err(|_| GranularError::CorruptCache {
            message: "truncated header".to_string(),
        })?;
    Ok(u64::from_le_bytes(bytes))
}

fn read_f64(reader: &mut impl std::io::Read) -> Result<f64> {
    let mut bytes = [0u8; 8];
    reader
        .read_exact(&mut bytes)
        .map_err(|_| GranularError::CorruptCache {
            message: "truncated payload".to_string(),
        })?;
    Ok(f64::from_le_bytes(bytes))
}

fn read_complex_vec(reader: &mut impl std::io::Read, len: usize) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let re = read_f64(reader)?;
        let im = read_f64(reader)?;
        out.push(Complex64::new(re, im));
    }
    Ok(out)
}
