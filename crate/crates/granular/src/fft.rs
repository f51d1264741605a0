//! Multi-dimensional FFT on cube-shaped arrays.
//!
//! [`MultiFft`] wraps 1-D plans from `rustfft` and applies them along every
//! axis of a row-major `N^d` array (last index fastest). Transforms are
//! unnormalized in both directions, matching `rustfft`; callers apply their
//! own scaling. Each instance owns its scratch buffers, so workers clone one
//! template instead of sharing mutable state; the underlying plans are
//! reference-counted and shared by clones.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Unnormalized forward/inverse DFT over each axis of an `n^dim` cube.
pub struct MultiFft {
    dim: usize,
    n: usize,
    forward_plan: Arc<dyn Fft<f64>>,
    inverse_plan: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    rotated: Vec<Complex64>,
}

impl MultiFft {
    /// Plans forward and inverse transforms of length `n` for a `dim`-dimensional cube.
    pub fn new(dim: usize, n: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        assert!(n >= 1, "transform length must be positive");
        let mut planner = FftPlanner::new();
        let forward_plan = planner.plan_fft_forward(n);
        let inverse_plan = planner.plan_fft_inverse(n);
        let scratch_len = forward_plan
            .get_inplace_scratch_len()
            .max(inverse_plan.get_inplace_scratch_len());
        MultiFft {
            dim,
            n,
            forward_plan,
            inverse_plan,
            scratch: vec![Complex64::default(); scratch_len],
            rotated: vec![Complex64::default(); n.pow(dim as u32)],
        }
    }

    /// Number of elements in the cube this instance transforms.
    pub fn total(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Forward DFT along every axis, in place. Unnormalized.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    /// Inverse DFT along every axis, in place. Unnormalized (scale by
    /// `1/total()` to invert `forward`).
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    fn transform(&mut self, data: &mut [Complex64], forward: bool) {
        assert_eq!(data.len(), self.total(), "array does not match planned size");
        let plan = if forward {
            &self.forward_plan
        } else {
            &self.inverse_plan
        };
        // Each pass transforms the contiguous last axis (rustfft processes
        // the buffer as back-to-back rows), then cyclically rotates the axes
        // so the next axis becomes contiguous. After `dim` passes the layout
        // is back to the original axis order.
        for _ in 0..self.dim {
            plan.process_with_scratch(data, &mut self.scratch);
            if self.dim > 1 {
                rotate_axes(data, &mut self.rotated, self.n);
                data.copy_from_slice(&self.rotated);
            }
        }
    }
}

impl Clone for MultiFft {
    /// Shares the plans, allocates fresh scratch buffers.
    fn clone(&self) -> Self {
        MultiFft {
            dim: self.dim,
            n: self.n,
            forward_plan: Arc::clone(&self.forward_plan),
            inverse_plan: Arc::clone(&self.inverse_plan),
            scratch: vec![Complex64::default(); self.scratch.len()],
            rotated: vec![Complex64::default(); self.rotated.len()],
        }
    }
}

/// Moves the first axis to the back: `out[i1, …, i_{d-1}, i0] = in[i0, i1, …]`.
///
/// Viewing the row-major array as an `n × rest` matrix, this is a plain
/// transpose into `out` interpreted as `rest × n`.
fn rotate_axes(input: &[Complex64], output: &mut [Complex64], n: usize) {
    let rest = input.len() / n;
    for i0 in 0..n {
        let row = &input[i0 * rest..(i0 + 1) * rest];
        for (r, &value) in row.iter().enumerate() {
            output[r * n + i0] = value;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn roundtrip(dim: usize, n: usize) {
        let mut fft = MultiFft::new(dim, n);
        let total = fft.total();
        // Deterministic pseudo-random data, no RNG dependency needed here.
        let original: Vec<Complex64> = (0..total)
            .map(|i| {
                let x = ((i * 2654435761 + 1) % 1000) as f64 / 1000.0;
                let y = ((i * 40503 + 7) % 1000) as f64 / 1000.0;
                Complex64::new(x - 0.5, y - 0.5)
            })
            .collect();
        let mut data = original.clone();
        fft.forward(&mut data);
        fft.inverse(&mut data);
        let scale = 1.0 / total as f64;
        for (got, want) in data.iter().zip(&original) {
            assert_abs_diff_eq!(got.re * scale, want.re, epsilon = 1e-12);
            assert_abs_diff_eq!(got.im * scale, want.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn forward_inverse_roundtrip_2d() {
        roundtrip(2, 16);
    }

    #[test]
    fn forward_inverse_roundtrip_3d() {
        roundtrip(3, 8);
    }

    #[test]
    fn matches_plain_dft_2d() {
        let n = 4;
        let mut fft = MultiFft::new(2, n);
        let data: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new(i as f64, (i % 3) as f64 - 1.0))
            .collect();
        let mut fast = data.clone();
        fft.forward(&mut fast);
        for k0 in 0..n {
            for k1 in 0..n {
                let mut sum = Complex64::default();
                for j0 in 0..n {
                    for j1 in 0..n {
                        let angle = -2.0 * std::f64::consts::PI
                            * ((k0 * j0) as f64 + (k1 * j1) as f64)
                            / n as f64;
                        sum += data[j0 * n + j1] * Complex64::from_polar(1.0, angle);
                    }
                }
                let got = fast[k0 * n + k1];
                assert_abs_diff_eq!(got.re, sum.re, epsilon = 1e-10);
                assert_abs_diff_eq!(got.im, sum.im, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn rotation_cycles_axes_3d() {
        let n = 3;
        let input: Vec<Complex64> = (0..n * n * n)
            .map(|i| Complex64::new(i as f64, 0.0))
            .collect();
        let mut output = vec![Complex64::default(); input.len()];
        rotate_axes(&input, &mut output, n);
        for i0 in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    let original = input[(i0 * n + i1) * n + i2];
                    let rotated = output[(i1 * n + i2) * n + i0];
                    assert_eq!(original, rotated);
                }
            }
        }
    }
}
