//! Uniform B-spline bases on a fixed domain.
//!
//! A basis with grid size `G` and order (degree) `S` over `[a, b]` has
//! `G + 2S + 1` knots: the `G + 1` uniform grid points plus `S` equally
//! spaced knots beyond each end. It spans `G + S` basis functions, of which
//! at most `S + 1` are nonzero at any point.
//!
//! Inputs outside `[a, b]` are clamped before evaluation. Knot intervals are
//! half-open on the right, except the last interval which also contains `b`.

use serde::{Deserialize, Serialize};

use crate::error::{KanError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BasisParams", into = "BasisParams")]
pub struct SplineBasis {
    grid_size: usize,
    order: usize,
    a: f64,
    b: f64,
    step: f64,
    knots: Vec<f64>,
}

/// Serialized form of a basis; knots are rebuilt on load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisParams {
    pub grid_size: usize,
    pub order: usize,
    pub a: f64,
    pub b: f64,
}

impl TryFrom<BasisParams> for SplineBasis {
    type Error = KanError;

    fn try_from(p: BasisParams) -> Result<Self> {
        SplineBasis::new(p.grid_size, p.order, p.a, p.b)
    }
}

impl From<SplineBasis> for BasisParams {
    fn from(s: SplineBasis) -> Self {
        s.params()
    }
}

impl SplineBasis {
    pub fn new(grid_size: usize, order: usize, a: f64, b: f64) -> Result<Self> {
        if grid_size == 0 {
            return Err(KanError::InvalidBasis("grid size must be at least 1".into()));
        }
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(KanError::InvalidBasis(format!(
                "domain [{a}, {b}] must be a finite interval with a < b"
            )));
        }
        let step = (b - a) / grid_size as f64;
        let n_knots = grid_size + 2 * order + 1;
        let knots = (0..n_knots)
            .map(|i| {
                let offset = i as isize - order as isize;
                if offset == 0 {
                    a
                } else if offset == grid_size as isize {
                    b
                } else {
                    a + offset as f64 * step
                }
            })
            .collect();
        Ok(SplineBasis {
            grid_size,
            order,
            a,
            b,
            step,
            knots,
        })
    }

    pub fn params(&self) -> BasisParams {
        BasisParams {
            grid_size: self.grid_size,
            order: self.order,
            a: self.a,
            b: self.b,
        }
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Interior knot spacing `(b - a) / G`.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions, `G + S`.
    pub fn len(&self) -> usize {
        self.grid_size + self.order
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn clamp(&self, x: f64) -> f64 {
        if x.is_nan() {
            self.a
        } else {
            x.clamp(self.a, self.b)
        }
    }

    /// Index `j` of the knot interval `[t_j, t_{j+1})` holding the clamped `x`;
    /// always in `S ..= S + G - 1`.
    fn span(&self, x: f64) -> usize {
        let s = self.order;
        let last = s + self.grid_size - 1;
        if x >= self.b {
            return last;
        }
        let guess = ((x - self.a) / self.step).floor();
        let mut j = (s as isize + guess as isize).clamp(s as isize, last as isize) as usize;
        // Floating-point division can land one interval off near a knot.
        while j > s && x < self.knots[j] {
            j -= 1;
        }
        while j < last && x >= self.knots[j + 1] {
            j += 1;
        }
        j
    }

    /// Nonzero basis values of `degree` at `x` for interval `span`:
    /// entry `r` belongs to basis function `span - degree + r`.
    fn nonzero(&self, span: usize, x: f64, degree: usize, out: &mut Vec<f64>) {
        let t = &self.knots;
        out.clear();
        out.push(1.0);
        let mut left = vec![0.0; degree + 1];
        let mut right = vec![0.0; degree + 1];
        for d in 1..=degree {
            left[d] = x - t[span + 1 - d];
            right[d] = t[span + d] - x;
            let mut saved = 0.0;
            for r in 0..d {
                let denom = right[r + 1] + left[d - r];
                let temp = out[r] / denom;
                out[r] = saved + right[r + 1] * temp;
                saved = left[d - r] * temp;
            }
            out.push(saved);
        }
    }

    /// All `G + S` basis values at `x` (clamped to the domain).
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out);
        out
    }

    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.len(), "basis output length");
        out.fill(0.0);
        let x = self.clamp(x);
        let span = self.span(x);
        let mut local = Vec::with_capacity(self.order + 1);
        self.nonzero(span, x, self.order, &mut local);
        let first = span - self.order;
        out[first..first + local.len()].copy_from_slice(&local);
    }

    /// Derivatives of all basis functions at `x` (clamped to the domain).
    /// Zero vector for order 0.
    pub fn deriv(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.deriv_into(x, &mut out);
        out
    }

    pub fn deriv_into(&self, x: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.len(), "basis output length");
        out.fill(0.0);
        let s = self.order;
        if s == 0 {
            return;
        }
        let x = self.clamp(x);
        let span = self.span(x);
        let mut lower = Vec::with_capacity(s);
        self.nonzero(span, x, s - 1, &mut lower);
        // dB_{i,S} = S/(t_{i+S}-t_i) B_{i,S-1} - S/(t_{i+S+1}-t_{i+1}) B_{i+1,S-1}
        let t = &self.knots;
        let first_lower = span + 1 - s;
        for (r, &value) in lower.iter().enumerate() {
            let i = first_lower + r;
            let term = s as f64 / (t[i + s] - t[i]) * value;
            if i < self.len() {
                out[i] += term;
            }
            if i >= 1 {
                out[i - 1] -= term;
            }
        }
    }

    /// Basis values and derivatives in one call.
    pub fn eval_with_deriv(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        (self.eval(x), self.deriv(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook recursive definition, used as an independent oracle.
    fn naive(knots: &[f64], i: usize, p: usize, x: f64, b: f64, last_interval: usize) -> f64 {
        if p == 0 {
            let inside = knots[i] <= x && x < knots[i + 1] && x < b;
            let closed_end = x == b && i == last_interval;
            return if inside || closed_end { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            v += (x - knots[i]) / d1 * naive(knots, i, p - 1, x, b, last_interval);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + p + 1] - x) / d2 * naive(knots, i + 1, p - 1, x, b, last_interval);
        }
        v
    }

    fn naive_all(basis: &SplineBasis, x: f64) -> Vec<f64> {
        let x = basis.clamp(x);
        let last = basis.order() + basis.grid_size() - 1;
        (0..basis.len())
            .map(|i| naive(basis.knots(), i, basis.order(), x, basis.domain().1, last))
            .collect()
    }

    #[test]
    fn moons_basis_shape() {
        let basis = SplineBasis::new(6, 3, -8.0, 8.0).unwrap();
        assert_eq!(basis.knots().len(), 13);
        assert_eq!(basis.len(), 9);
        assert!((basis.step() - 16.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn degree_zero_single_interval() {
        let basis = SplineBasis::new(1, 0, 0.0, 1.0).unwrap();
        assert_eq!(basis.knots(), &[0.0, 1.0]);
        assert_eq!(basis.len(), 1);
        assert_eq!(basis.eval(0.5), vec![1.0]);
        assert_eq!(basis.eval(1.0), vec![1.0]);
        assert_eq!(basis.deriv(0.5), vec![0.0]);
    }

    #[test]
    fn uniform_extension_knots() {
        let basis = SplineBasis::new(4, 2, 0.0, 4.0).unwrap();
        assert_eq!(
            basis.knots(),
            &[-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
        );
        assert_eq!(basis.len(), 6);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(SplineBasis::new(0, 3, 0.0, 1.0).is_err());
        assert!(SplineBasis::new(3, 3, 1.0, 1.0).is_err());
        assert!(SplineBasis::new(3, 3, 2.0, 1.0).is_err());
        assert!(SplineBasis::new(3, 3, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn matches_naive_recursion() {
        let basis = SplineBasis::new(4, 2, 0.0, 4.0).unwrap();
        let fast = basis.eval(1.5);
        let slow = naive_all(&basis, 1.5);
        for (f, s) in fast.iter().zip(&slow) {
            assert!((f - s).abs() < 1e-14, "{fast:?} vs {slow:?}");
        }
        // 1.5 sits mid-interval of a uniform quadratic: (1/8, 6/8, 1/8).
        assert!((fast[1] - 0.125).abs() < 1e-15);
        assert!((fast[2] - 0.75).abs() < 1e-15);
        assert!((fast[3] - 0.125).abs() < 1e-15);

        for order in 0..=5 {
            let basis = SplineBasis::new(5, order, -3.0, 2.0).unwrap();
            for k in 0..=200 {
                let x = -3.5 + k as f64 * 6.0 / 200.0;
                let fast = basis.eval(x);
                let slow = naive_all(&basis, x);
                for (f, s) in fast.iter().zip(&slow) {
                    assert!((f - s).abs() < 1e-12, "order {order} x {x}");
                }
            }
        }
    }

    #[test]
    fn domain_edges_are_not_zero() {
        let basis = SplineBasis::new(6, 3, -8.0, 8.0).unwrap();
        for x in [-8.0, 8.0, -100.0, 100.0] {
            let sum: f64 = basis.eval(x).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_finite_difference() {
        let basis = SplineBasis::new(4, 2, 0.0, 4.0).unwrap();
        let h = 1e-6;
        let d = basis.deriv(1.5);
        let plus = basis.eval(1.5 + h);
        let minus = basis.eval(1.5 - h);
        for k in 0..basis.len() {
            let fd = (plus[k] - minus[k]) / (2.0 * h);
            assert!((d[k] - fd).abs() < 1e-5, "k={k}: {} vs {fd}", d[k]);
        }
        let sum: f64 = d.iter().sum();
        assert!(sum.abs() < 1e-9);
    }

    #[test]
    fn high_order_accepted() {
        let basis = SplineBasis::new(30, 10, -8.0, 8.0).unwrap();
        assert_eq!(basis.len(), 40);
        let sum: f64 = basis.eval(0.3).iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn serde_round_trip_rebuilds_knots() {
        let basis = SplineBasis::new(6, 3, -8.0, 8.0).unwrap();
        let json = serde_json::to_string(&basis).unwrap();
        let back: SplineBasis = serde_json::from_str(&json).unwrap();
        assert_eq!(back, basis);
        assert!(serde_json::from_str::<SplineBasis>(r#"{"grid_size":0,"order":1,"a":0,"b":1}"#).is_err());
    }
}
