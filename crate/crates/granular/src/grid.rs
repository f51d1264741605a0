//! Truncated, periodized velocity domain and the transforms between
//! physical grid values and spectral coefficients.
//!
//! The distribution is supported in a ball of radius `S`, relative
//! velocities are truncated to a ball of radius `R` (default `2S`), and both
//! are embedded in the periodic box `[-L, L]^d` with `L >= (3+sqrt(2))S/2`
//! so that periodic images of the support cannot interact through the
//! truncated collision integral.
//!
//! Grid nodes follow the cell-left convention `v_j = -L + (2L/N) j`,
//! `j = 0..N-1` per axis, and spectral coefficients are indexed by integer
//! frequencies `k` in `{-N/2, …, N/2-1}^d`:
//!
//! ```text
//! f̂_k = (1/(2L)^d) ∫ f(v) e^{-i(π/L) k·v} dv
//! ```
//!
//! discretized by the rectangle rule on the uniform grid. Arrays are
//! row-major with the last axis fastest, and frequencies are stored in FFT
//! bin order (bin `i` holds frequency `i` for `i < N/2`, else `i - N`).

use num_complex::Complex64;

use crate::error::{GranularError, Result};
use crate::fft::MultiFft;

/// Anti-aliasing factor `(3 + sqrt(2)) / 2` relating the box half-width to
/// the support radius.
pub const ALIASING_FACTOR: f64 = (3.0 + std::f64::consts::SQRT_2) / 2.0;

/// Geometry of the velocity grid: dimension, resolution, and the three radii.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    n: usize,
    support_radius: f64,
    truncation_radius: f64,
    half_width: f64,
}

impl GridSpec {
    /// Builds a grid with the default truncation radius `R = 2S` and the
    /// tightest admissible box `L = (3+sqrt(2))S/2`.
    pub fn new(dim: usize, n: usize, support_radius: f64) -> Result<Self> {
        Self::with_overrides(dim, n, support_radius, None, None)
    }

    /// Builds a grid, optionally overriding the truncation radius and the
    /// box half-width. Overrides must still satisfy every invariant.
    pub fn with_overrides(
        dim: usize,
        n: usize,
        support_radius: f64,
        truncation_radius: Option<f64>,
        half_width: Option<f64>,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(GranularError::InvalidDimension { dim });
        }
        if n < 8 || n % 2 != 0 {
            return Err(GranularError::OddResolution { n });
        }
        if !(support_radius > 0.0) {
            return Err(GranularError::InvalidParameter {
                name: "support_radius",
                value: support_radius,
                constraint: "must be positive",
            });
        }
        let required = ALIASING_FACTOR * support_radius;
        // Exact default assignment keeps L == (3+sqrt(2))S/2 bitwise, so the
        // bound check must tolerate that equality.
        let half_width = half_width.unwrap_or(required);
        if half_width < required * (1.0 - 1e-12) {
            return Err(GranularError::AliasingViolation {
                half_width,
                required,
            });
        }
        let truncation_radius = truncation_radius.unwrap_or(2.0 * support_radius);
        if !(truncation_radius > 0.0) {
            return Err(GranularError::InvalidParameter {
                name: "truncation_radius",
                value: truncation_radius,
                constraint: "must be positive",
            });
        }
        if truncation_radius > 2.0 * half_width {
            return Err(GranularError::TruncationTooLarge {
                truncation: truncation_radius,
                max: 2.0 * half_width,
            });
        }
        Ok(GridSpec {
            dim,
            n,
            support_radius,
            truncation_radius,
            half_width,
        })
    }

    /// Velocity dimension (2 or 3).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Modes per dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Declared support radius `S` of the distribution.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// Relative-velocity truncation radius `R`.
    pub fn truncation_radius(&self) -> f64 {
        self.truncation_radius
    }

    /// Half-width `L` of the periodic box `[-L, L]^d`.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Grid spacing `2L/N` (same along every axis).
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Cell volume `(2L/N)^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of grid nodes / spectral modes, `N^d`.
    pub fn total(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Node coordinate along one axis: `v_i = -L + (2L/N) i`.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        -self.half_width + self.spacing() * i as f64
    }

    /// All `N` node coordinates along one axis.
    pub fn axis_nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Integer frequency held by FFT bin `i`: `i` for `i < N/2`, else `i - N`.
    pub fn frequency(&self, bin: usize) -> i64 {
        debug_assert!(bin < self.n);
        if bin < self.n / 2 {
            bin as i64
        } else {
            bin as i64 - self.n as i64
        }
    }

    /// FFT bin holding integer frequency `k` in `{-N/2, …, N/2-1}`.
    pub fn bin(&self, frequency: i64) -> usize {
        let n = self.n as i64;
        debug_assert!(frequency >= -n / 2 && frequency < n / 2);
        frequency.rem_euclid(n) as usize
    }

    /// Walks all multi-indices in row-major order (last axis fastest),
    /// passing the linear index and the per-axis indices.
    pub fn for_each_index(&self, mut body: impl FnMut(usize, &[usize])) {
        let mut idx = [0usize; 3];
        let dim = self.dim;
        for lin in 0..self.total() {
            body(lin, &idx[..dim]);
            for ax in (0..dim).rev() {
                idx[ax] += 1;
                if idx[ax] < self.n {
                    break;
                }
                idx[ax] = 0;
            }
        }
    }
}

/// Distribution sampled on the velocity grid.
///
/// Physical values are the source of truth; spectral coefficients are
/// computed on demand and cached until the values are mutably borrowed.
#[derive(Debug, Clone)]
pub struct DistributionField {
    grid: GridSpec,
    values: Vec<f64>,
    coeffs: Option<Vec<Complex64>>,
}

impl DistributionField {
    /// Wraps physical values (row-major, length `N^d`).
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.total() {
            return Err(GranularError::GridMismatch {
                context: "value array length differs from N^d",
            });
        }
        Ok(DistributionField {
            grid,
            values,
            coeffs: None,
        })
    }

    /// All-zero field.
    pub fn zeros(grid: GridSpec) -> Self {
        DistributionField {
            values: vec![0.0; grid.total()],
            grid,
            coeffs: None,
        }
    }

    /// Rebuilds physical values from spectral coefficients (bin order).
    ///
    /// The imaginary residue of the inverse transform is discarded; if its
    /// maximum magnitude exceeds `1e-10 × max|values|` the coefficients are
    /// not Hermitian-symmetric (i.e. corrupted) and this fails with
    /// [`GranularError::SymmetryViolation`].
    pub fn from_coeffs(grid: GridSpec, coeffs: Vec<Complex64>, fft: &mut MultiFft) -> Result<Self> {
        if coeffs.len() != grid.total() {
            return Err(GranularError::GridMismatch {
                context: "coefficient array length differs from N^d",
            });
        }
        let mut work = coeffs.clone();
        apply_checkerboard(&grid, &mut work, 1.0);
        fft.inverse(&mut work);
        let mut max_re = 0.0f64;
        let mut max_im = 0.0f64;
        for z in &work {
            max_re = max_re.max(z.re.abs());
            max_im = max_im.max(z.im.abs());
        }
        let threshold = 1e-10 * max_re;
        if max_im > threshold {
            return Err(GranularError::SymmetryViolation {
                max_imag: max_im,
                threshold,
            });
        }
        Ok(DistributionField {
            grid,
            values: work.iter().map(|z| z.re).collect(),
            coeffs: Some(coeffs),
        })
    }

    /// Grid geometry.
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Physical values, row-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable physical values; invalidates the cached coefficients.
    pub fn values_mut(&mut self) -> &mut [f64] {
        self.coeffs = None;
        &mut self.values
    }

    /// Spectral coefficients in FFT bin order, computing and caching them
    /// from the physical values if the cache is stale.
    pub fn coeffs(&mut self, fft: &mut MultiFft) -> &[Complex64] {
        if self.coeffs.is_none() {
            let mut work: Vec<Complex64> = self
                .values
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect();
            fft.forward(&mut work);
            let scale = 1.0 / self.grid.total() as f64;
            apply_checkerboard(&self.grid, &mut work, scale);
            self.coeffs = Some(work);
        }
        self.coeffs.as_deref().unwrap()
    }

    /// Cached coefficients, if the cache is fresh.
    pub fn coeffs_if_cached(&self) -> Option<&[Complex64]> {
        self.coeffs.as_deref()
    }
}

/// Multiplies `data[j]` by `scale * (-1)^(sum of multi-index digits of j)`.
///
/// This checkerboard sign converts between the DFT with nodes starting at 0
/// and the series with nodes starting at `-L`: since `N` is even, the phase
/// `e^{±iπk}` per axis equals `(-1)^bin` in either index convention.
pub(crate) fn apply_checkerboard(grid: &GridSpec, data: &mut [Complex64], scale: f64) {
    let n = grid.n();
    let mut row_sign = 1.0f64;
    let mut row_idx = [0usize; 3];
    let outer_axes = grid.dim() - 1;
    for row in data.chunks_exact_mut(n) {
        let mut s = row_sign * scale;
        for value in row.iter_mut() {
            *value *= s;
            s = -s;
        }
        // Advance the odometer over the leading axes. A digit stepping up
        // flips the parity of the digit sum; a digit wrapping N-1 -> 0 also
        // flips it (N-1 is odd for even N), so every visited axis flips
        // exactly once and the carry proceeds inward.
        for ax in (0..outer_axes).rev() {
            row_idx[ax] += 1;
            row_sign = -row_sign;
            if row_idx[ax] < n {
                break;
            }
            row_idx[ax] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn test_fft(grid: &GridSpec) -> MultiFft {
        MultiFft::new(grid.dim(), grid.n())
    }

    #[test]
    fn default_domain_matches_bounds() {
        let grid = GridSpec::new(2, 64, 10.0).unwrap();
        assert_abs_diff_eq!(grid.truncation_radius(), 20.0);
        assert_abs_diff_eq!(grid.half_width(), 5.0 * (3.0 + std::f64::consts::SQRT_2));
        assert_abs_diff_eq!(grid.half_width(), 22.0710678, epsilon = 1e-6);
    }

    #[test]
    fn truncation_override_kept() {
        let grid = GridSpec::with_overrides(3, 32, 4.0, Some(8.0), None).unwrap();
        assert_abs_diff_eq!(grid.truncation_radius(), 8.0);
    }

    #[test]
    fn aliasing_violation_detected() {
        let err = GridSpec::with_overrides(2, 16, 1.0, None, Some(2.0)).unwrap_err();
        assert!(matches!(err, GranularError::AliasingViolation { .. }), "{err}");
    }

    #[test]
    fn dimension_and_resolution_validated() {
        assert!(matches!(
            GridSpec::new(4, 16, 1.0).unwrap_err(),
            GranularError::InvalidDimension { dim: 4 }
        ));
        assert!(matches!(
            GridSpec::new(2, 15, 1.0).unwrap_err(),
            GranularError::OddResolution { n: 15 }
        ));
        assert!(matches!(
            GridSpec::new(2, 4, 1.0).unwrap_err(),
            GranularError::OddResolution { n: 4 }
        ));
    }

    #[test]
    fn frequency_bin_roundtrip() {
        let grid = GridSpec::new(2, 16, 1.0).unwrap();
        for bin in 0..16 {
            let k = grid.frequency(bin);
            assert!((-8..8).contains(&k));
            assert_eq!(grid.bin(k), bin);
        }
    }

    #[test]
    fn constant_field_has_single_mode() {
        let grid = GridSpec::new(2, 16, 1.0).unwrap();
        let mut fft = test_fft(&grid);
        let mut field = DistributionField::from_values(grid, vec![2.5; grid.total()]).unwrap();
        let coeffs = field.coeffs(&mut fft);
        assert_abs_diff_eq!(coeffs[0].re, 2.5, epsilon = 1e-13);
        assert_abs_diff_eq!(coeffs[0].im, 0.0, epsilon = 1e-13);
        for &c in &coeffs[1..] {
            assert!(c.norm() < 1e-13);
        }
    }

    #[test]
    fn single_harmonic_splits_into_two_modes() {
        let grid = GridSpec::new(2, 16, 2.0).unwrap();
        let l = grid.half_width();
        let mut fft = test_fft(&grid);
        let mut values = vec![0.0; grid.total()];
        grid.for_each_index(|lin, idx| {
            values[lin] = (std::f64::consts::PI * grid.node(idx[0]) / l).cos();
        });
        let mut field = DistributionField::from_values(grid, values).unwrap();
        let coeffs = field.coeffs(&mut fft);
        let plus = coeffs[grid.bin(1) * grid.n() + grid.bin(0)];
        let minus = coeffs[grid.bin(-1) * grid.n() + grid.bin(0)];
        assert_abs_diff_eq!(plus.re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(minus.re, 0.5, epsilon = 1e-12);
        let energy: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        assert_abs_diff_eq!(energy, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn broken_symmetry_rejected() {
        let grid = GridSpec::new(2, 16, 1.0).unwrap();
        let mut fft = test_fft(&grid);
        let mut field = DistributionField::zeros(grid);
        grid.for_each_index(|lin, idx| {
            let x = grid.node(idx[0]);
            let y = grid.node(idx[1]);
            field.values_mut()[lin] = (-(x * x + y * y)).exp();
        });
        let mut coeffs = field.coeffs(&mut fft).to_vec();
        // Perturb a single mode without touching its Hermitian partner.
        coeffs[grid.bin(3) * grid.n() + grid.bin(2)] += Complex64::new(0.0, 1e-3);
        let err = DistributionField::from_coeffs(grid, coeffs, &mut fft).unwrap_err();
        assert!(matches!(err, GranularError::SymmetryViolation { .. }), "{err}");
    }

    #[test]
    fn values_mut_invalidates_cache() {
        let grid = GridSpec::new(2, 16, 1.0).unwrap();
        let mut fft = test_fft(&grid);
        let mut field = DistributionField::from_values(grid, vec![1.0; grid.total()]).unwrap();
        field.coeffs(&mut fft);
        assert!(field.coeffs_if_cached().is_some());
        field.values_mut()[0] = 2.0;
        assert!(field.coeffs_if_cached().is_none());
        let coeffs = field.coeffs(&mut fft);
        assert!(coeffs[1].norm() > 0.0, "refreshed coefficients see the edit");
    }

    /// Deterministic value pattern with enough structure for round trips.
    fn synthetic_values(grid: &GridSpec, seed: u64) -> Vec<f64> {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        (0..grid.total())
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn roundtrip_is_identity(seed in any::<u64>(), three_d in any::<bool>()) {
            let grid = if three_d {
                GridSpec::new(3, 8, 1.0).unwrap()
            } else {
                GridSpec::new(2, 16, 1.0).unwrap()
            };
            let mut fft = test_fft(&grid);
            let values = synthetic_values(&grid, seed);
            let mut field = DistributionField::from_values(grid, values.clone()).unwrap();
            let coeffs = field.coeffs(&mut fft).to_vec();
            let back = DistributionField::from_coeffs(grid, coeffs, &mut fft).unwrap();
            let max = values.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            for (got, want) in back.values().iter().zip(&values) {
                prop_assert!((got - want).abs() <= 1e-12 * max);
            }
        }

        #[test]
        fn parseval_identity(seed in any::<u64>()) {
            let grid = GridSpec::new(2, 32, 1.0).unwrap();
            let mut fft = test_fft(&grid);
            let values = synthetic_values(&grid, seed);
            let mut field = DistributionField::from_values(grid, values.clone()).unwrap();
            let coeffs = field.coeffs(&mut fft);
            let spectral: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
                * (2.0 * grid.half_width()).powi(grid.dim() as i32);
            let physical: f64 =
                values.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume();
            prop_assert!((spectral - physical).abs() <= 1e-10 * physical.abs().max(1e-30));
        }
    }
}
