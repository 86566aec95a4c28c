//! Representations of the potential q on the three subintervals.
//!
//! The polynomial form is first-class: values, derivatives and integrals are
//! exact. The callable form wraps arbitrary per-piece functions and falls back
//! to adaptive Simpson quadrature and finite differences.

use std::fmt;
use std::sync::Arc;

use crate::poly::Poly;

pub type PieceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Absolute tolerance of the adaptive Simpson rule used in callable mode.
pub const CALLABLE_QUAD_TOL: f64 = 1e-11;
/// Central-difference step in callable mode, as a fraction of `b - a`.
pub const CALLABLE_DIFF_STEP: f64 = 1e-6;

/// Raw potential description, as supplied by a user before validation.
#[derive(Clone)]
pub enum PotentialSpec {
    /// Ascending-degree coefficient lists in global coordinates, one per piece.
    Polynomial(Vec<Vec<f64>>),
    Callable(CallablePotential),
}

impl PotentialSpec {
    pub fn zero() -> Self {
        PotentialSpec::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        PotentialSpec::Polynomial(vec![vec![c]; 3])
    }

    /// The same polynomial on all three pieces.
    pub fn global(coeffs: Vec<f64>) -> Self {
        PotentialSpec::Polynomial(vec![coeffs; 3])
    }
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialSpec::Polynomial(p) => f.debug_tuple("Polynomial").field(p).finish(),
            PotentialSpec::Callable(c) => f.debug_tuple("Callable").field(c).finish(),
        }
    }
}

/// Per-piece functions plus the one-sided end values of every piece,
/// which cannot be inferred from an opaque function.
#[derive(Clone)]
pub struct CallablePotential {
    pub pieces: [PieceFn; 3],
    /// `[q(a), q(c1-)]`, `[q(c1+), q(c2-)]`, `[q(c2+), q(b)]`.
    pub end_values: [[f64; 2]; 3],
    /// Bound on |q| over each piece, used for integrator step selection.
    pub abs_bounds: [f64; 3],
}

impl fmt::Debug for CallablePotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CallablePotential")
            .field("end_values", &self.end_values)
            .field("abs_bounds", &self.abs_bounds)
            .finish_non_exhaustive()
    }
}

impl CallablePotential {
    /// Builds a callable potential from sampled tables, one per piece,
    /// interpolated by natural cubic splines. Each table must cover its
    /// subinterval; end values are read off the spline.
    pub fn from_tables(tables: [(Vec<f64>, Vec<f64>); 3]) -> Result<Self, String> {
        let mut splines = Vec::with_capacity(3);
        for (i, (xs, ys)) in tables.into_iter().enumerate() {
            let s = CubicSpline::new(xs, ys).map_err(|e| format!("piece {}: {e}", i + 1))?;
            splines.push(Arc::new(s));
        }
        let mut end_values = [[0.0; 2]; 3];
        let mut abs_bounds = [0.0; 3];
        for (i, s) in splines.iter().enumerate() {
            end_values[i] = [s.eval(s.xs[0]), s.eval(*s.xs.last().unwrap())];
            abs_bounds[i] = s.abs_bound();
        }
        let pieces: [PieceFn; 3] = std::array::from_fn(|i| {
            let s = Arc::clone(&splines[i]);
            Arc::new(move |x: f64| s.eval(x)) as PieceFn
        });
        Ok(CallablePotential {
            pieces,
            end_values,
            abs_bounds,
        })
    }
}

/// Validated potential, one representation per piece.
#[derive(Clone, Debug)]
pub(crate) enum Potential {
    Polynomial([Poly; 3]),
    Callable(CallablePotential),
}

impl Potential {
    pub(crate) fn polys(&self) -> Option<&[Poly; 3]> {
        match self {
            Potential::Polynomial(p) => Some(p),
            Potential::Callable(_) => None,
        }
    }
}

/// Natural cubic spline through sorted samples.
#[derive(Debug, Clone)]
pub(crate) struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    pub(crate) fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, String> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(format!("need >= 2 samples with matching lengths, got {} x and {} q", n, ys.len()));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err("samples must be finite".into());
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err("sample abscissae must be strictly increasing".into());
        }
        // Tridiagonal solve for the second derivatives (natural end conditions).
        let mut second = vec![0.0; n];
        if n > 2 {
            let mut diag = vec![0.0; n];
            let mut rhs = vec![0.0; n];
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
                let m = lower / diag[i - 1];
                diag[i] -= m * upper[i - 1];
                rhs[i] -= m * rhs[i - 1];
            }
            for i in (1..n - 1).rev() {
                let next = if i + 1 < n - 1 { second[i + 1] } else { 0.0 };
                second[i] = (rhs[i] - upper[i] * next) / diag[i];
            }
        }
        Ok(CubicSpline { xs, ys, second })
    }

    pub(crate) fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t0 = (self.xs[i + 1] - x) / h;
        let t1 = (x - self.xs[i]) / h;
        t0 * self.ys[i]
            + t1 * self.ys[i + 1]
            + ((t0.powi(3) - t0) * self.second[i] + (t1.powi(3) - t1) * self.second[i + 1]) * h * h / 6.0
    }

    fn abs_bound(&self) -> f64 {
        let ymax = self.ys.iter().fold(0.0_f64, |m, y| m.max(y.abs()));
        let hmax = self.xs.windows(2).fold(0.0_f64, |m, w| m.max(w[1] - w[0]));
        let smax = self.second.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
        ymax + smax * hmax * hmax / 8.0
    }
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}
