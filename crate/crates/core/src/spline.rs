//! Natural cubic spline through complex samples, linear beyond the ends.

use num_complex::Complex64;

use crate::error::{Error, Result};

const MODULE: &str = "measurement_recovery";

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpline {
    xs: Vec<f64>,
    ys: Vec<Complex64>,
    /// Second derivatives at the knots.
    m: Vec<Complex64>,
}

impl ComplexSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<Complex64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(Error::config(
                MODULE,
                format!("spline needs matching non-empty knots ({} x, {} y)", xs.len(), ys.len()),
            ));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::config(MODULE, "spline knots must be finite and strictly increasing"));
        }
        let n = xs.len();
        let mut m = vec![Complex64::new(0.0, 0.0); n];
        if n > 2 {
            // tridiagonal solve for the interior second derivatives
            let mut diag = vec![0.0; n];
            let mut rhs = vec![Complex64::new(0.0, 0.0); n];
            let mut upper = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            for i in 2..n - 1 {
                let lower = xs[i] - xs[i - 1];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                let prev = rhs[i - 1];
                rhs[i] -= prev * w;
            }
            for i in (1..n - 1).rev() {
                let next = if i + 1 < n - 1 { m[i + 1] } else { Complex64::new(0.0, 0.0) };
                m[i] = (rhs[i] - next * upper[i]) / diag[i];
            }
        }
        Ok(ComplexSpline { xs, ys, m })
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[Complex64] {
        &self.ys
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let n = self.xs.len();
        if n == 1 {
            return self.ys[0];
        }
        if x <= self.xs[0] {
            return self.ys[0] + self.slope(0, 0.0) * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1] + self.slope(n - 2, 1.0) * (x - self.xs[n - 1]);
        }
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = 1.0 - a;
        self.ys[i] * a
            + self.ys[i + 1] * b
            + (self.m[i] * (a * a * a - a) + self.m[i + 1] * (b * b * b - b)) * (h * h / 6.0)
    }

    /// Derivative on interval `i` at relative position `s ∈ [0, 1]`.
    fn slope(&self, i: usize, s: f64) -> Complex64 {
        let h = self.xs[i + 1] - self.xs[i];
        let a = 1.0 - s;
        (self.ys[i + 1] - self.ys[i]) / h
            + (self.m[i + 1] * (3.0 * s * s - 1.0) - self.m[i] * (3.0 * a * a - 1.0)) * (h / 6.0)
    }
}
