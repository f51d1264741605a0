//! Quadrature rules composed by the fast collision method: Gauss-Legendre
//! on the radial interval, the uniform rule on the circle, and spherical
//! designs on the 2-sphere.
//!
//! All rules are plain node/weight tables, immutable after construction.
//! The spherical designs are antipodally symmetric equal-weight point sets
//! shipped as static data (see [`SphereQuadrature::spherical_design`] for
//! their strengths); a rule of strength `t` integrates every spherical
//! harmonic of degree at most `t` exactly.

use crate::error::{GranularError, Result};

/// Nodes and weights for integration over an interval `[a, b]`.
#[derive(Debug, Clone)]
pub struct Quadrature1D {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature1D {
    /// Gauss-Legendre rule with `n` nodes on `[a, b]`, exact for
    /// polynomials of degree `2n - 1`.
    ///
    /// Nodes are found by Newton iteration on the Legendre recurrence to
    /// absolute tolerance 1e-15.
    pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Self> {
        if n < 1 {
            return Err(GranularError::InvalidOrder {
                order: n,
                constraint: "Gauss-Legendre order must be at least 1",
            });
        }
        if !(a < b) {
            return Err(GranularError::InvalidParameter {
                name: "interval",
                value: b - a,
                constraint: "interval must satisfy a < b",
            });
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        // Roots come out in decreasing order of cos; fill from the right so
        // the stored nodes increase.
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut derivative = 0.0;
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let step = p / dp;
                x -= step;
                derivative = dp;
                if step.abs() <= 1e-15 {
                    break;
                }
            }
            let weight = 2.0 / ((1.0 - x * x) * derivative * derivative);
            nodes[n - 1 - i] = mid + half * x;
            weights[n - 1 - i] = half * weight;
        }
        Ok(Quadrature1D { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Applies the rule to a function.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Evaluates the Legendre polynomial `P_n` and its derivative at `x` via
/// the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let next = ((2 * j - 1) as f64 * x * p - (j - 1) as f64 * p_prev) / j as f64;
        p_prev = p;
        p = next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Unit vectors and weights for integration over the sphere `S^{d-1}`.
///
/// Points are stored with three components; 2-D rules set the third to zero.
/// Weights are uniform, `|S^{d-1}| / M`, for both shipped families.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    dim: usize,
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
    strength: Option<u32>,
}

/// Spherical design node tables: `(M, strength t, node text)`. Antipodally
/// symmetric, equal weight, generated by moment-matching optimization and
/// verified to integrate all even monomials of degree `<= t` to better than
/// 1e-14 (odd ones vanish by symmetry). See `tools/gen_spherical_designs.py`
/// for provenance.
const SPHERE_DESIGNS: [(usize, u32, &str); 3] = [
    (12, 5, include_str!("data/sphere_design_012.txt")),
    (32, 7, include_str!("data/sphere_design_032.txt")),
    (48, 9, include_str!("data/sphere_design_048.txt")),
];

impl SphereQuadrature {
    /// Uniform rule on the unit circle: `M` equispaced points with weights
    /// `2π/M`. Exact for trigonometric polynomials of degree `M - 1`.
    pub fn circle_rule(m: usize) -> Result<Self> {
        if m < 4 {
            return Err(GranularError::InvalidOrder {
                order: m,
                constraint: "circle rule needs at least 4 points",
            });
        }
        let weight = 2.0 * std::f64::consts::PI / m as f64;
        let points = (0..m)
            .map(|i| {
                let angle = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                [angle.cos(), angle.sin(), 0.0]
            })
            .collect();
        Ok(SphereQuadrature {
            dim: 2,
            points,
            weights: vec![weight; m],
            strength: None,
        })
    }

    /// Shipped spherical design with `M ∈ {12, 32, 48}` nodes on `S²`,
    /// equal weights `4π/M`, of strength 5, 7, and 9 respectively.
    pub fn spherical_design(m: usize) -> Result<Self> {
        let (_, strength, text) = SPHERE_DESIGNS
            .iter()
            .find(|(size, _, _)| *size == m)
            .ok_or(GranularError::UnsupportedDesignSize { m })?;
        let mut rule = Self::from_design_text(text)?;
        debug_assert_eq!(rule.len(), m);
        rule.strength = Some(*strength);
        Ok(rule)
    }

    /// Parses a design file: whitespace-separated unit vectors, one per
    /// line, no header. Weights are `4π/M`.
    pub fn from_design_text(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (line_idx, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let components: Vec<f64> = trimmed
                .split_whitespace()
                .map(|tok| tok.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| GranularError::MalformedDesignFile {
                    line: line_idx + 1,
                    message: e.to_string(),
                })?;
            if components.len() != 3 {
                return Err(GranularError::MalformedDesignFile {
                    line: line_idx + 1,
                    message: format!("expected 3 components, found {}", components.len()),
                });
            }
            let p = [components[0], components[1], components[2]];
            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(GranularError::MalformedDesignFile {
                    line: line_idx + 1,
                    message: format!("vector norm {norm} is not 1"),
                });
            }
            points.push(p);
        }
        if points.is_empty() {
            return Err(GranularError::MalformedDesignFile {
                line: 0,
                message: "no points found".to_string(),
            });
        }
        let weight = 4.0 * std::f64::consts::PI / points.len() as f64;
        Ok(SphereQuadrature {
            dim: 3,
            weights: vec![weight; points.len()],
            points,
            strength: None,
        })
    }

    /// Reads a design file from disk (same format as
    /// [`Self::from_design_text`]).
    pub fn from_design_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_design_text(&text)
    }

    /// Sphere rule for a grid dimension with the conventional size
    /// defaults: `circle_rule(m)` in 2-D, `spherical_design(m)` in 3-D.
    pub fn for_dimension(dim: usize, m: usize) -> Result<Self> {
        match dim {
            2 => Self::circle_rule(m),
            3 => Self::spherical_design(m),
            _ => Err(GranularError::InvalidDimension { dim }),
        }
    }

    /// Ambient dimension `d` (points live on `S^{d-1}`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Design strength when known (shipped designs only).
    pub fn strength(&self) -> Option<u32> {
        self.strength
    }

    /// Surface measure of the full sphere, `Σ weights`.
    pub fn surface(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn gauss_legendre_order_one_is_midpoint() {
        let rule = Quadrature1D::gauss_legendre(1, -1.0, 1.0).unwrap();
        assert_abs_diff_eq!(rule.nodes()[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.weights()[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn gauss_legendre_order_two_nodes() {
        let rule = Quadrature1D::gauss_legendre(2, -1.0, 1.0).unwrap();
        let expected = 1.0 / 3.0f64.sqrt();
        assert_abs_diff_eq!(rule.nodes()[0], -expected, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.nodes()[1], expected, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights()[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights()[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn gauss_legendre_cubic_on_radial_interval() {
        let rule = Quadrature1D::gauss_legendre(30, 0.0, 8.0).unwrap();
        let integral = rule.integrate(|x| x * x * x);
        assert_abs_diff_eq!(integral, 1024.0, epsilon = 1e-12 * 1024.0);
    }

    #[test]
    fn gauss_legendre_invariants() {
        for n in [1, 2, 5, 17, 64] {
            let rule = Quadrature1D::gauss_legendre(n, 0.0, 20.0).unwrap();
            let total: f64 = rule.weights().iter().sum();
            assert_abs_diff_eq!(total, 20.0, epsilon = 1e-12 * 20.0);
            for w in rule.weights() {
                assert!(*w > 0.0);
            }
            for pair in rule.nodes().windows(2) {
                assert!(pair[0] < pair[1]);
            }
            assert!(rule.nodes()[0] > 0.0 && rule.nodes()[n - 1] < 20.0);
        }
    }

    #[test]
    fn invalid_orders_rejected() {
        assert!(matches!(
            Quadrature1D::gauss_legendre(0, 0.0, 1.0).unwrap_err(),
            GranularError::InvalidOrder { .. }
        ));
        assert!(matches!(
            SphereQuadrature::circle_rule(3).unwrap_err(),
            GranularError::InvalidOrder { .. }
        ));
        assert!(matches!(
            SphereQuadrature::spherical_design(20).unwrap_err(),
            GranularError::UnsupportedDesignSize { m: 20 }
        ));
    }

    #[test]
    fn circle_rule_moments() {
        let rule = SphereQuadrature::circle_rule(16).unwrap();
        assert_abs_diff_eq!(rule.surface(), 2.0 * std::f64::consts::PI, epsilon = 1e-14);
        let first: f64 = rule
            .points()
            .iter()
            .zip(rule.weights())
            .map(|(p, w)| w * p[0])
            .sum();
        assert_abs_diff_eq!(first, 0.0, epsilon = 1e-15);
        let second: f64 = rule
            .points()
            .iter()
            .zip(rule.weights())
            .map(|(p, w)| w * p[0] * p[0])
            .sum();
        assert_abs_diff_eq!(second, std::f64::consts::PI, epsilon = 1e-12);
    }

    /// Exact moment of the monomial x^a y^b z^c over the unit sphere:
    /// zero for any odd exponent, otherwise
    /// 4π (a-1)!! (b-1)!! (c-1)!! / (a+b+c+1)!!.
    fn sphere_monomial_moment(a: u32, b: u32, c: u32) -> f64 {
        if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
            return 0.0;
        }
        fn double_factorial(k: i64) -> f64 {
            let mut value = 1.0;
            let mut i = k;
            while i > 1 {
                value *= i as f64;
                i -= 2;
            }
            value
        }
        4.0 * std::f64::consts::PI
            * double_factorial(a as i64 - 1)
            * double_factorial(b as i64 - 1)
            * double_factorial(c as i64 - 1)
            / double_factorial((a + b + c) as i64 + 1)
    }

    #[test]
    fn designs_integrate_monomials_to_strength() {
        for (m, expected_strength) in [(12usize, 5u32), (32, 7), (48, 9)] {
            let rule = SphereQuadrature::spherical_design(m).unwrap();
            assert_eq!(rule.strength(), Some(expected_strength));
            assert_abs_diff_eq!(
                rule.surface(),
                4.0 * std::f64::consts::PI,
                epsilon = 1e-12
            );
            for point in rule.points() {
                let norm = (point[0] * point[0] + point[1] * point[1] + point[2] * point[2]).sqrt();
                assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-14);
            }
            let t = expected_strength;
            for a in 0..=t {
                for b in 0..=(t - a) {
                    for c in 0..=(t - a - b) {
                        let numeric: f64 = rule
                            .points()
                            .iter()
                            .zip(rule.weights())
                            .map(|(p, w)| {
                                w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32)
                            })
                            .sum();
                        let exact = sphere_monomial_moment(a, b, c);
                        assert_abs_diff_eq!(numeric, exact, epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn design_file_errors() {
        let err = SphereQuadrature::from_design_text("1.0 0.0\n").unwrap_err();
        assert!(matches!(err, GranularError::MalformedDesignFile { line: 1, .. }), "{err}");
        let err = SphereQuadrature::from_design_text("0.5 0.5 0.5\n").unwrap_err();
        assert!(matches!(err, GranularError::MalformedDesignFile { line: 1, .. }), "{err}");
        let err = SphereQuadrature::from_design_text("not numbers here\n").unwrap_err();
        assert!(matches!(err, GranularError::MalformedDesignFile { line: 1, .. }), "{err}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        /// GL(n) integrates monomials of degree <= 2n-1 exactly.
        #[test]
        fn gauss_legendre_polynomial_exactness(n in 1usize..40, seed in any::<u64>()) {
            let degree = (seed % (2 * n as u64)) as u32; // 0..=2n-1
            let rule = Quadrature1D::gauss_legendre(n, 0.0, 2.0).unwrap();
            let numeric = rule.integrate(|x| x.powi(degree as i32));
            let exact = 2.0f64.powi(degree as i32 + 1) / (degree as f64 + 1.0);
            prop_assert!((numeric - exact).abs() <= 1e-12 * exact.abs());
        }

        /// Sphere rules kill odd monomials and give |S^{d-1}|/d on squares.
        #[test]
        fn sphere_rules_low_moments(m in prop::sample::select(vec![12usize, 32, 48]), axis in 0usize..3) {
            let rule = SphereQuadrature::spherical_design(m).unwrap();
            let odd: f64 = rule.points().iter().zip(rule.weights())
                .map(|(p, w)| w * p[axis]).sum();
            prop_assert!(odd.abs() <= 1e-12);
            let square: f64 = rule.points().iter().zip(rule.weights())
                .map(|(p, w)| w * p[axis] * p[axis]).sum();
            let expected = rule.surface() / 3.0;
            prop_assert!((square - expected).abs() <= 1e-10);
        }
    }
}
