//! Problem data, validation, and exact piecewise calculus on the potential.
//!
//! The problem is `-u'' + q u = lambda u` on `[a, c1) U (c1, c2) U (c2, b]`
//! with `u'(a) = 0`, `(lambda - h) u(b) - u'(b) = 0`, and scaling
//! transmission conditions at `c1` (factor `1/delta`) and `c2`
//! (factor `delta/gamma` going left to right).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::potential::{adaptive_simpson, Potential, PotentialSpec, CALLABLE_DIFF_STEP, CALLABLE_QUAD_TOL};

/// Default cap on polynomial piece degree.
pub const DEFAULT_DEGREE_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// How q(c1), q(c2) and q'(c2) are read when the asymptotic and trace
/// formulas use them without a side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideConvention {
    #[default]
    Left,
    Right,
    /// Average of both one-sided limits.
    Mean,
}

/// Which ODE integrator drives the shooting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorKind {
    /// Taylor series for polynomial pieces, Dormand-Prince otherwise.
    #[default]
    Auto,
    Taylor,
    DormandPrince,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub integrator: IntegratorKind,
    /// Number of times the scan grid may be halved to reconcile counts.
    pub scan_refinement_max: u32,
    pub lambda_min_override: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            rel_tol: 1e-11,
            abs_tol: 1e-12,
            integrator: IntegratorKind::Auto,
            scan_refinement_max: 4,
            lambda_min_override: None,
        }
    }
}

/// Unvalidated problem data.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    pub delta: f64,
    pub gamma: f64,
    pub h: f64,
    pub potential: PotentialSpec,
    pub degree_cap: usize,
    pub sides: SideConvention,
    pub solver: SolverSettings,
}

impl ProblemSpec {
    pub fn new(a: f64, b: f64, c1: f64, c2: f64, delta: f64, gamma: f64, h: f64, potential: PotentialSpec) -> Self {
        ProblemSpec {
            a,
            b,
            c1,
            c2,
            delta,
            gamma,
            h,
            potential,
            degree_cap: DEFAULT_DEGREE_CAP,
            sides: SideConvention::default(),
            solver: SolverSettings::default(),
        }
    }

    pub fn validate(self) -> Result<ValidatedProblem> {
        validate_problem(self)
    }
}

/// Immutable, validated problem handle. Cheap to clone.
#[derive(Debug, Clone)]
pub struct ValidatedProblem {
    a: f64,
    b: f64,
    c1: f64,
    c2: f64,
    delta: f64,
    gamma: f64,
    h: f64,
    potential: Arc<Potential>,
    abs_bounds: [f64; 3],
    sides: SideConvention,
    solver: SolverSettings,
    degree_cap: usize,
}

/// The integrals of q over the three pieces, with `Q3(x)` available on `[c2, b]`.
#[derive(Debug, Clone)]
pub struct QIntegrals {
    pub q1: f64,
    pub q2: f64,
    pub q3b: f64,
    problem: ValidatedProblem,
}

impl QIntegrals {
    /// `Q3(x) = int_{c2}^{x} q`.
    pub fn q3_at(&self, x: f64) -> Result<f64> {
        if !(x >= self.problem.c2 && x <= self.problem.b) {
            return Err(Error::Domain { x, lo: self.problem.c2, hi: self.problem.b });
        }
        self.problem.q_integral(self.problem.c2, x)
    }

    pub fn total(&self) -> f64 {
        self.q1 + self.q2 + self.q3b
    }
}

fn check_finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { field: field.to_string(), value })
    }
}

/// Checks every invariant of the raw data and returns the validated handle.
pub fn validate_problem(raw: ProblemSpec) -> Result<ValidatedProblem> {
    for (name, v) in [
        ("a", raw.a),
        ("b", raw.b),
        ("c1", raw.c1),
        ("c2", raw.c2),
        ("delta", raw.delta),
        ("gamma", raw.gamma),
        ("h", raw.h),
    ] {
        check_finite(name, v)?;
    }
    if !(raw.a < raw.c1 && raw.c1 < raw.c2 && raw.c2 < raw.b) {
        return Err(Error::Ordering { a: raw.a, c1: raw.c1, c2: raw.c2, b: raw.b });
    }
    if raw.delta == 0.0 {
        return Err(Error::ZeroScalar { name: "delta" });
    }
    if raw.gamma == 0.0 {
        return Err(Error::ZeroScalar { name: "gamma" });
    }
    check_finite("solver.rel_tol", raw.solver.rel_tol)?;
    check_finite("solver.abs_tol", raw.solver.abs_tol)?;
    if raw.solver.rel_tol <= 0.0 || raw.solver.abs_tol < 0.0 {
        return Err(Error::Range { detail: "solver tolerances must be positive".into() });
    }
    if let Some(v) = raw.solver.lambda_min_override {
        check_finite("solver.lambda_min_override", v)?;
    }

    let bounds = [(raw.a, raw.c1), (raw.c1, raw.c2), (raw.c2, raw.b)];
    let (potential, abs_bounds) = match raw.potential {
        PotentialSpec::Polynomial(pieces) => {
            if pieces.len() != 3 {
                return Err(Error::PieceDomain {
                    max_degree: raw.degree_cap,
                    detail: format!("got {} pieces", pieces.len()),
                });
            }
            let mut polys = Vec::with_capacity(3);
            for (i, coeffs) in pieces.into_iter().enumerate() {
                for (k, &c) in coeffs.iter().enumerate() {
                    check_finite(&format!("potential.pieces[{i}][{k}]"), c)?;
                }
                let p = Poly::new(coeffs);
                if p.degree() > raw.degree_cap {
                    return Err(Error::PieceDomain {
                        max_degree: raw.degree_cap,
                        detail: format!("piece {} has degree {}", i + 1, p.degree()),
                    });
                }
                polys.push(p);
            }
            let polys: [Poly; 3] = polys.try_into().expect("three pieces");
            let mut abs_bounds = [0.0; 3];
            for i in 0..3 {
                let (lo, hi) = bounds[i];
                abs_bounds[i] = polys[i].abs_bound(lo, hi);
                // A finite coefficient list can still overflow on a wide interval.
                check_finite(&format!("potential piece {} bound", i + 1), abs_bounds[i])?;
            }
            (Potential::Polynomial(polys), abs_bounds)
        }
        PotentialSpec::Callable(c) => {
            for (i, ends) in c.end_values.iter().enumerate() {
                check_finite(&format!("potential piece {} left end", i + 1), ends[0])?;
                check_finite(&format!("potential piece {} right end", i + 1), ends[1])?;
                check_finite(&format!("potential piece {} bound", i + 1), c.abs_bounds[i])?;
            }
            let abs_bounds = c.abs_bounds;
            (Potential::Callable(c), abs_bounds)
        }
    };

    Ok(ValidatedProblem {
        a: raw.a,
        b: raw.b,
        c1: raw.c1,
        c2: raw.c2,
        delta: raw.delta,
        gamma: raw.gamma,
        h: raw.h,
        potential: Arc::new(potential),
        abs_bounds,
        sides: raw.sides,
        solver: raw.solver,
        degree_cap: raw.degree_cap,
    })
}

impl ValidatedProblem {
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c1(&self) -> f64 {
        self.c1
    }
    pub fn c2(&self) -> f64 {
        self.c2
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn length(&self) -> f64 {
        self.b - self.a
    }
    pub fn sides(&self) -> SideConvention {
        self.sides
    }
    pub fn solver(&self) -> &SolverSettings {
        &self.solver
    }

    /// Endpoints of piece `i` (0-based).
    pub fn piece_bounds(&self, piece: usize) -> (f64, f64) {
        match piece {
            0 => (self.a, self.c1),
            1 => (self.c1, self.c2),
            _ => (self.c2, self.b),
        }
    }

    pub(crate) fn potential(&self) -> &Potential {
        &self.potential
    }

    pub(crate) fn piece_abs_bound(&self, piece: usize) -> f64 {
        self.abs_bounds[piece]
    }

    /// Sup-norm bound of q over `[a, b]`.
    pub fn q_sup_bound(&self) -> f64 {
        self.abs_bounds.iter().fold(0.0_f64, |m, &v| m.max(v))
    }

    pub fn is_polynomial(&self) -> bool {
        self.potential.polys().is_some()
    }

    /// True when q is a single polynomial restricted to the three pieces.
    pub fn is_globally_defined(&self) -> bool {
        match self.potential.polys() {
            Some(p) => p[0] == p[1] && p[1] == p[2],
            None => false,
        }
    }

    /// The single polynomial, when the potential is globally defined.
    pub fn global_poly(&self) -> Option<&Poly> {
        if self.is_globally_defined() {
            self.potential.polys().map(|p| &p[0])
        } else {
            None
        }
    }

    pub(crate) fn rebuild(&self, edit: impl FnOnce(&mut ValidatedProblem)) -> Result<ValidatedProblem> {
        let mut next = self.clone();
        edit(&mut next);
        if !(next.a < next.c1 && next.c1 < next.c2 && next.c2 < next.b) {
            return Err(Error::Ordering { a: next.a, c1: next.c1, c2: next.c2, b: next.b });
        }
        if next.delta == 0.0 {
            return Err(Error::ZeroScalar { name: "delta" });
        }
        if next.gamma == 0.0 {
            return Err(Error::ZeroScalar { name: "gamma" });
        }
        for (name, v) in [("delta", next.delta), ("gamma", next.gamma), ("h", next.h)] {
            check_finite(name, v)?;
        }
        Ok(next)
    }

    /// Same problem with other transmission scalars.
    pub fn with_transmission(&self, delta: f64, gamma: f64) -> Result<ValidatedProblem> {
        self.rebuild(|p| {
            p.delta = delta;
            p.gamma = gamma;
        })
    }

    pub fn with_h(&self, h: f64) -> Result<ValidatedProblem> {
        self.rebuild(|p| p.h = h)
    }

    pub fn with_solver(&self, solver: SolverSettings) -> ValidatedProblem {
        let mut next = self.clone();
        next.solver = solver;
        next
    }

    pub fn with_sides(&self, sides: SideConvention) -> ValidatedProblem {
        let mut next = self.clone();
        next.sides = sides;
        next
    }

    /// Moves the interface points. Only meaningful for a globally defined
    /// potential; piecewise data would be reassigned to different intervals.
    pub fn with_splits(&self, c1: f64, c2: f64) -> Result<ValidatedProblem> {
        if !self.is_globally_defined() {
            return Err(Error::Range { detail: "moving split points requires a globally defined polynomial q".into() });
        }
        let mut next = self.rebuild(|p| {
            p.c1 = c1;
            p.c2 = c2;
        })?;
        let polys = self.potential.polys().expect("checked above").clone();
        for i in 0..3 {
            let (lo, hi) = next.piece_bounds(i);
            next.abs_bounds[i] = polys[i].abs_bound(lo, hi);
        }
        next.potential = Arc::new(Potential::Polynomial(polys));
        Ok(next)
    }

    /// Same geometry and boundary data with another polynomial potential.
    pub fn with_polynomial(&self, pieces: Vec<Vec<f64>>) -> Result<ValidatedProblem> {
        validate_problem(ProblemSpec {
            a: self.a,
            b: self.b,
            c1: self.c1,
            c2: self.c2,
            delta: self.delta,
            gamma: self.gamma,
            h: self.h,
            potential: PotentialSpec::Polynomial(pieces),
            degree_cap: self.degree_cap,
            sides: self.sides,
            solver: self.solver,
        })
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if x >= self.a && x <= self.b {
            Ok(())
        } else {
            Err(Error::Domain { x, lo: self.a, hi: self.b })
        }
    }

    /// Piece governing `x` from the given side.
    pub fn piece_at(&self, x: f64, side: Side) -> usize {
        let on_left = side == Side::Left;
        if x < self.c1 || (x == self.c1 && on_left) {
            0
        } else if x < self.c2 || (x == self.c2 && on_left) {
            1
        } else {
            2
        }
    }

    pub(crate) fn piece_value(&self, piece: usize, x: f64) -> f64 {
        match self.potential.as_ref() {
            Potential::Polynomial(p) => p[piece].eval(x),
            Potential::Callable(c) => {
                let (lo, hi) = self.piece_bounds(piece);
                if x == lo {
                    c.end_values[piece][0]
                } else if x == hi {
                    c.end_values[piece][1]
                } else {
                    (c.pieces[piece])(x)
                }
            }
        }
    }

    pub(crate) fn piece_derivative(&self, piece: usize, x: f64, order: usize) -> f64 {
        match self.potential.as_ref() {
            Potential::Polynomial(p) => p[piece].eval_derivative(x, order),
            Potential::Callable(c) => {
                let f = &c.pieces[piece];
                let (lo, hi) = self.piece_bounds(piece);
                let step = CALLABLE_DIFF_STEP * self.length();
                // Keep the stencil inside the piece.
                let centre = x.clamp(lo + 2.0 * step, hi - 2.0 * step);
                let centre = if lo + 2.0 * step > hi - 2.0 * step { 0.5 * (lo + hi) } else { centre };
                match order {
                    0 => self.piece_value(piece, x),
                    1 => (f(centre + step) - f(centre - step)) / (2.0 * step),
                    2 => {
                        let s2 = 1e3 * step;
                        let centre = x.clamp(lo + s2, hi - s2);
                        (f(centre + s2) - 2.0 * f(centre) + f(centre - s2)) / (s2 * s2)
                    }
                    _ => f64::NAN,
                }
            }
        }
    }

    /// One-sided value of q at `x`.
    pub fn q_eval(&self, x: f64, side: Side) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.piece_value(self.piece_at(x, side), x))
    }

    /// One-sided first derivative of q at `x`.
    pub fn q_derivative(&self, x: f64, side: Side) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.piece_derivative(self.piece_at(x, side), x, 1))
    }

    /// One-sided second derivative of q at `x`.
    pub fn q_second_derivative(&self, x: f64, side: Side) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.piece_derivative(self.piece_at(x, side), x, 2))
    }

    /// Value at an interface point under the configured convention.
    pub(crate) fn q_conv(&self, x: f64) -> f64 {
        let left = self.piece_value(self.piece_at(x, Side::Left), x);
        let right = self.piece_value(self.piece_at(x, Side::Right), x);
        match self.sides {
            SideConvention::Left => left,
            SideConvention::Right => right,
            SideConvention::Mean => 0.5 * (left + right),
        }
    }

    pub(crate) fn dq_conv(&self, x: f64) -> f64 {
        let left = self.piece_derivative(self.piece_at(x, Side::Left), x, 1);
        let right = self.piece_derivative(self.piece_at(x, Side::Right), x, 1);
        match self.sides {
            SideConvention::Left => left,
            SideConvention::Right => right,
            SideConvention::Mean => 0.5 * (left + right),
        }
    }

    fn piece_integral(&self, piece: usize, x0: f64, x1: f64) -> f64 {
        if x0 >= x1 {
            return 0.0;
        }
        match self.potential.as_ref() {
            Potential::Polynomial(p) => p[piece].integrate(x0, x1),
            Potential::Callable(c) => adaptive_simpson(c.pieces[piece].as_ref(), x0, x1, CALLABLE_QUAD_TOL),
        }
    }

    /// `int_{x0}^{x1} q`, piecewise exact for polynomial potentials.
    pub fn q_integral(&self, x0: f64, x1: f64) -> Result<f64> {
        self.check_domain(x0)?;
        self.check_domain(x1)?;
        if x0 > x1 {
            return Err(Error::Range { detail: format!("integration bounds reversed: {x0} > {x1}") });
        }
        let mut total = 0.0;
        for piece in 0..3 {
            let (lo, hi) = self.piece_bounds(piece);
            let l = x0.max(lo);
            let r = x1.min(hi);
            if l < r {
                total += self.piece_integral(piece, l, r);
            }
        }
        Ok(total)
    }

    /// Piece integrals over an arbitrary split `a <= s1 <= s2 <= b`.
    pub(crate) fn split_integrals(&self, s1: f64, s2: f64) -> Result<(f64, f64, f64)> {
        Ok((self.q_integral(self.a, s1)?, self.q_integral(s1, s2)?, self.q_integral(s2, self.b)?))
    }

    pub fn compute_q(&self) -> QIntegrals {
        let q1 = self.piece_integral(0, self.a, self.c1);
        let q2 = self.piece_integral(1, self.c1, self.c2);
        let q3b = self.piece_integral(2, self.c2, self.b);
        QIntegrals { q1, q2, q3b, problem: self.clone() }
    }
}
