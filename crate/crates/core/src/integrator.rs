//! Integrators for `u'' = (q(x) - lambda) u` over a single smooth piece.
//!
//! Two engines share one contract: given `(u, u')` at one end of a span,
//! return `(u, u')` at the other end, optionally tracking how many quadrant
//! boundaries the vector `(u, -u')` crosses (the integer part of the
//! Prüfer angle).
//!
//! * [`taylor_span`] works on polynomial pieces. Taylor coefficients follow
//!   from an exact recurrence, the order adapts per step, and the per-step
//!   truncation budget is `rel_tol * |step| / (b - a)` so that the error
//!   accumulated over the whole interval stays at `rel_tol`.
//! * [`dormand_prince_span`] is the embedded 5(4) pair with classic local
//!   error control, used for callable potentials.
//!
//! Steps are capped at `min(piece / 16, c / rate)` (`c = 1` for series
//! steps, `1/2` for Runge-Kutta) with
//! `rate = sqrt(max(1, |lambda| + sup|q|))`, which keeps every step well
//! under a quarter turn of the solution.

use crate::error::{Error, Result};
use crate::poly::Poly;

/// Magnitude beyond which callers must rescale.
pub const OVERFLOW_GUARD: f64 = 1e250;
/// Rescaling exponent used when the guard trips mid-span.
pub(crate) const RESCALE_EXP: i32 = 600;

const MAX_TAYLOR_ORDER: usize = 120;
const MIN_TAYLOR_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    /// Highest Taylor order used (0 for Runge-Kutta).
    pub max_order: usize,
    /// Largest accepted local error estimate relative to its budget.
    pub max_error_ratio: f64,
}

impl IntegratorStats {
    pub fn merge(&mut self, other: &IntegratorStats) {
        self.steps += other.steps;
        self.rejected += other.rejected;
        self.max_order = self.max_order.max(other.max_order);
        self.max_error_ratio = self.max_error_ratio.max(other.max_error_ratio);
    }
}

/// Half-open quadrant of `(x, y)` matching `floor(atan2(y, x) / (pi/2)) mod 4`.
pub(crate) fn quadrant(x: f64, y: f64) -> i64 {
    if x > 0.0 && y >= 0.0 {
        0
    } else if x <= 0.0 && y > 0.0 {
        1
    } else if x < 0.0 && y <= 0.0 {
        2
    } else {
        3
    }
}

/// Running quadrant count of `(u, -u')`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct QuadrantTracker {
    pub total: i64,
    last: i64,
}

impl QuadrantTracker {
    pub(crate) fn new(u: f64, du: f64) -> Self {
        let q = quadrant(u, -du);
        QuadrantTracker { total: q, last: q }
    }

    /// Registers a new state; `false` means the step jumped two quadrants
    /// and must be subdivided.
    fn advance(&mut self, u: f64, du: f64) -> bool {
        let q = quadrant(u, -du);
        match (q - self.last).rem_euclid(4) {
            0 => {}
            1 => self.total += 1,
            3 => self.total -= 1,
            _ => return false,
        }
        self.last = q;
        true
    }

    /// Registers a sign flip of the whole vector (a negative scaling).
    pub(crate) fn flip(&mut self, u: f64, du: f64) {
        self.total += 2;
        self.last = quadrant(u, -du);
    }
}

/// Shared settings for one span.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SpanSettings {
    pub lambda: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Full interval length `b - a`, for the per-step error budget.
    pub total_length: f64,
    /// Length of the piece the span belongs to.
    pub piece_length: f64,
    /// Bound of |q| on the piece.
    pub q_bound: f64,
    /// Rescale by powers of two instead of failing at the overflow guard.
    pub allow_rescale: bool,
}

impl SpanSettings {
    fn rate(&self) -> f64 {
        (self.lambda.abs() + self.q_bound).max(1.0).sqrt()
    }

    fn max_step(&self) -> f64 {
        (self.piece_length / 16.0).min(0.5 / self.rate())
    }

    /// Series steps can be longer; one radian of phase keeps the order moderate.
    fn max_taylor_step(&self) -> f64 {
        (self.piece_length / 16.0).min(1.0 / self.rate())
    }
}

/// Mutable state carried across spans.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Carry {
    pub u: f64,
    pub du: f64,
    /// Base-2 exponent of the true solution relative to `(u, du)`.
    pub exponent: i64,
}

impl Carry {
    fn guard(&mut self, x: f64, allow: bool) -> Result<()> {
        if self.u.abs().max(self.du.abs()) > OVERFLOW_GUARD || !self.u.is_finite() || !self.du.is_finite() {
            if !allow || !self.u.is_finite() || !self.du.is_finite() {
                return Err(Error::OverflowGuard { x });
            }
            let f = 2f64.powi(-RESCALE_EXP);
            self.u *= f;
            self.du *= f;
            self.exponent += RESCALE_EXP as i64;
        }
        Ok(())
    }
}

/// One Taylor step of length `h` (any sign) from `(u, du)`, where `g` holds
/// the coefficients of q about the step's starting point.
///
/// Returns the new state and the order used, or `None` if the series did not
/// converge within [`MAX_TAYLOR_ORDER`] terms.
fn taylor_step(
    g: &[f64],
    weights: &mut [f64],
    h: f64,
    u: f64,
    du: f64,
    lambda: f64,
    rate: f64,
    budget: f64,
) -> Option<(f64, f64, usize)> {
    let d = g.len() - 1;
    // g_j h^{j+2}, with -lambda h^2 folded into the constant term.
    let mut hp = h * h;
    for j in 0..=d {
        weights[j] = g[j] * hp;
        hp *= h;
    }
    weights[0] -= lambda * h * h;

    let mut a = [0.0f64; MAX_TAYLOR_ORDER + 2];
    a[0] = u;
    a[1] = h * du;
    let mut sum_u = a[0] + a[1];
    let mut sum_du = a[1];
    let norm = u.abs() + du.abs() / rate;
    let inv_hr = 1.0 / (h.abs() * rate);
    let weight = |k: usize, ak: f64| ak.abs() * (1.0 + k as f64 * inv_hr);
    let mut prev = weight(1, a[1]);
    for k in 0..MAX_TAYLOR_ORDER {
        let mut acc = 0.0;
        for j in 0..=d.min(k) {
            acc += weights[j] * a[k - j];
        }
        let next = acc / ((k + 1) as f64 * (k + 2) as f64);
        a[k + 2] = next;
        sum_u += next;
        sum_du += (k + 2) as f64 * next;
        let e = weight(k + 2, next);
        if k + 2 >= MIN_TAYLOR_ORDER && e + prev <= budget * norm.max(f64::MIN_POSITIVE) {
            return Some((sum_u, sum_du / h, k + 2));
        }
        prev = e;
    }
    None
}

/// Integrates over `[x_from, x_to]` (either direction) on a polynomial piece.
pub(crate) fn taylor_span(
    poly: &Poly,
    x_from: f64,
    x_to: f64,
    carry: &mut Carry,
    set: &SpanSettings,
    mut tracker: Option<&mut QuadrantTracker>,
    stats: &mut IntegratorStats,
) -> Result<()> {
    let span = x_to - x_from;
    if span == 0.0 {
        return Ok(());
    }
    let rate = set.rate();
    let n = (span.abs() / set.max_taylor_step()).ceil().max(1.0) as usize;
    let h_nom = span / n as f64;
    let budget_per_len = set.rel_tol / set.total_length;
    let floor = f64::EPSILON / 8.0;
    let mut local = Vec::with_capacity(poly.coeffs().len());
    let mut weights = vec![0.0; poly.coeffs().len()];
    let mut pending = Vec::new();
    for i in 0..n {
        let x0 = x_from + h_nom * i as f64;
        let x1 = if i + 1 == n { x_to } else { x_from + h_nom * (i + 1) as f64 };
        // Subdivide only when a step crosses two quadrants at once.
        pending.push((x0, x1));
        while let Some((s0, s1)) = pending.pop() {
            let h = s1 - s0;
            let budget = (budget_per_len * h.abs() + set.abs_tol * h.abs() / set.total_length).max(floor);
            poly.shift_into(s0, &mut local);
            let (u, du, order) = taylor_step(&local, &mut weights, h, carry.u, carry.du, set.lambda, rate, budget)
                .ok_or(Error::ToleranceFailure { x: s0, lambda: set.lambda })?;
            if let Some(t) = tracker.as_deref_mut() {
                let mut probe = *t;
                if !probe.advance(u, du) {
                    stats.rejected += 1;
                    if h.abs() < 1e-14 * set.piece_length {
                        return Err(Error::ToleranceFailure { x: s0, lambda: set.lambda });
                    }
                    let mid = 0.5 * (s0 + s1);
                    pending.push((mid, s1));
                    pending.push((s0, mid));
                    continue;
                }
                *t = probe;
            }
            carry.u = u;
            carry.du = du;
            stats.steps += 1;
            stats.max_order = stats.max_order.max(order);
            carry.guard(s1, set.allow_rescale)?;
        }
    }
    Ok(())
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates over `[x_from, x_to]` (either direction) with the embedded
/// Dormand-Prince pair and standard local error control.
pub(crate) fn dormand_prince_span(
    q: &dyn Fn(f64) -> f64,
    x_from: f64,
    x_to: f64,
    carry: &mut Carry,
    set: &SpanSettings,
    mut tracker: Option<&mut QuadrantTracker>,
    stats: &mut IntegratorStats,
) -> Result<()> {
    let span = x_to - x_from;
    if span == 0.0 {
        return Ok(());
    }
    let dir = span.signum();
    let h_max = set.max_step();
    let h_min = 1e-14 * set.piece_length.max(f64::MIN_POSITIVE);
    let rate = set.rate();
    let mut x = x_from;
    let mut h = h_max.min(span.abs());
    let mut y = [carry.u, carry.du];
    let mut k = [[0.0f64; 2]; 7];
    let rhs = |x: f64, y: &[f64; 2]| [y[1], (q(x) - set.lambda) * y[0]];
    let max_steps = 50_000_000usize;
    let mut taken = 0usize;
    while (x_to - x) * dir > 0.0 {
        if taken > max_steps {
            return Err(Error::ToleranceFailure { x, lambda: set.lambda });
        }
        taken += 1;
        let last = h >= (x_to - x).abs();
        let hs = if last { (x_to - x).abs() } else { h } * dir;
        k[0] = rhs(x, &y);
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                ys[0] += hs * A[s][j] * kj[0];
                ys[1] += hs * A[s][j] * kj[1];
            }
            k[s] = rhs(x + C[s] * hs, &ys);
        }
        let mut y5 = y;
        let mut err = [0.0f64; 2];
        for s in 0..7 {
            for c in 0..2 {
                y5[c] += hs * B5[s] * k[s][c];
                err[c] += hs * (B5[s] - B4[s]) * k[s][c];
            }
        }
        // Derivative component measured in units of rate * u.
        let scale_u = set.abs_tol + set.rel_tol * y[0].abs().max(y5[0].abs()).max(y[1].abs().max(y5[1].abs()) / rate);
        let scale_du = rate * scale_u;
        let e = (err[0] / scale_u).abs().max((err[1] / scale_du).abs());
        let mut accept = e <= 1.0 && e.is_finite();
        if accept {
            if let Some(t) = tracker.as_deref_mut() {
                let mut probe = *t;
                if probe.advance(y5[0], y5[1]) {
                    *t = probe;
                } else {
                    accept = false;
                }
            }
        }
        if accept {
            x = if last { x_to } else { x + hs };
            y = y5;
            stats.steps += 1;
            stats.max_error_ratio = stats.max_error_ratio.max(e);
            carry.u = y[0];
            carry.du = y[1];
            carry.guard(x, set.allow_rescale)?;
            y = [carry.u, carry.du];
            let fac = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(h_max);
        } else {
            stats.rejected += 1;
            let fac = if e.is_finite() { (0.9 * e.powf(-0.2)).clamp(0.1, 0.5) } else { 0.1 };
            h *= fac;
            if h < h_min {
                return Err(Error::ToleranceFailure { x, lambda: set.lambda });
            }
        }
    }
    Ok(())
}
