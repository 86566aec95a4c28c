//! Dense real polynomials in ascending-degree form.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Value of the `order`-th derivative at `x`.
    pub fn eval_derivative(&self, x: f64, order: usize) -> f64 {
        let mut acc = 0.0;
        for k in (order..self.coeffs.len()).rev() {
            let falling: f64 = ((k - order + 1)..=k).map(|m| m as f64).product();
            acc = acc * x + self.coeffs[k] * falling;
        }
        acc
    }

    /// Antiderivative vanishing at zero, evaluated at `x`.
    fn antiderivative(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * x + c / (k as f64 + 1.0);
        }
        acc * x
    }

    /// Exact definite integral over `[x0, x1]`.
    pub fn integrate(&self, x0: f64, x1: f64) -> f64 {
        if x0 == x1 {
            return 0.0;
        }
        // Centering at the midpoint keeps the antiderivative difference well conditioned.
        let mid = 0.5 * (x0 + x1);
        let half = 0.5 * (x1 - x0);
        let shifted = self.shifted(mid);
        // Only odd powers of the antiderivative survive the symmetric difference.
        let mut acc = 0.0;
        for (k, &c) in shifted.coeffs.iter().enumerate().rev() {
            if k % 2 == 0 {
                acc += 2.0 * c * half.powi(k as i32 + 1) / (k as f64 + 1.0);
            }
        }
        if acc.is_finite() {
            acc
        } else {
            self.antiderivative(x1) - self.antiderivative(x0)
        }
    }

    /// Coefficients of `t -> p(center + t)`.
    pub fn shifted(&self, center: f64) -> Poly {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        self.shift_into(center, &mut coeffs);
        Poly { coeffs }
    }

    /// Writes the coefficients of `t -> p(center + t)` into `out`.
    pub fn shift_into(&self, center: f64, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.coeffs);
        let n = out.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                out[j] += center * out[j + 1];
            }
        }
    }

    /// Upper bound of |p| on `[lo, hi]` from the coefficients about the midpoint.
    pub fn abs_bound(&self, lo: f64, hi: f64) -> f64 {
        let mid = 0.5 * (lo + hi);
        let r = 0.5 * (hi - lo).abs();
        self.shifted(mid)
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c.abs() * r.powi(k as i32))
            .sum()
    }
}
