//! Shooting: the fundamental solution from `(1, 0)` at `a`, carried through
//! both transmission maps to `b`, the characteristic function, and the
//! Prüfer phase used to count eigenvalues.
//!
//! Phase convention: `u = r cos(theta) / sigma`, `u' = -r sin(theta)`, i.e.
//! `theta = atan2(-u', sigma u)` with `sigma = sqrt(1 + |lambda|)`, and
//! `theta(a) = 0`. Every negative transmission factor adds `pi`. Quadrant
//! crossings do not depend on `sigma`, so the eigenvalue count is exact for
//! any positive scale; this one is continuous in `lambda` and close to
//! `sqrt(lambda)` at the top of the spectrum.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{
    dormand_prince_span, quadrant, taylor_span, Carry, IntegratorStats, QuadrantTracker, SpanSettings,
};
use crate::potential::Potential;
use crate::problem::{IntegratorKind, ValidatedProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Piece {
    First,
    Second,
    Third,
}

impl Piece {
    pub fn index(self) -> usize {
        match self {
            Piece::First => 0,
            Piece::Second => 1,
            Piece::Third => 2,
        }
    }

    pub const ALL: [Piece; 3] = [Piece::First, Piece::Second, Piece::Third];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interface {
    C1,
    C2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    pub u: f64,
    pub du: f64,
    pub x: f64,
}

/// `sqrt(lambda)`: real for `lambda >= 0`, `i t` with `t = sqrt(-lambda)` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SqrtLambda {
    Real(f64),
    Imaginary(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub lambda: f64,
    pub s: SqrtLambda,
}

impl SpectralPoint {
    pub fn new(lambda: f64) -> Self {
        let s = if lambda >= 0.0 {
            SqrtLambda::Real(lambda.sqrt())
        } else {
            SqrtLambda::Imaginary((-lambda).sqrt())
        };
        SpectralPoint { lambda, s }
    }

    /// `s^2`, which must reproduce `lambda`.
    pub fn s_squared(&self) -> f64 {
        match self.s {
            SqrtLambda::Real(s) => s * s,
            SqrtLambda::Imaginary(t) => -t * t,
        }
    }

    /// Signed magnitude: `s` for real roots, `-t` for imaginary ones.
    pub fn signed(&self) -> f64 {
        match self.s {
            SqrtLambda::Real(s) => s,
            SqrtLambda::Imaginary(t) => -t,
        }
    }
}

/// Phase scale for the Prüfer convention.
pub fn phase_scale(lambda: f64) -> f64 {
    (1.0 + lambda.abs()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryData {
    pub lambda: f64,
    /// `phi3(b)` in rescaled units; the true value is `phi_b * 2^log2_scale`.
    pub phi_b: f64,
    pub dphi_b: f64,
    pub log2_scale: i64,
    /// Continuous Prüfer angle at `b`.
    pub theta_b: f64,
    pub sigma: f64,
    /// Number of negative transmission factors, each contributing `pi` to `theta_b`.
    pub negative_factors: u32,
    pub integrator_stats: IntegratorStats,
}

impl BoundaryData {
    /// `omega` in rescaled units (multiply by `2^log2_scale` for the true value).
    pub fn omega_scaled(&self, h: f64) -> f64 {
        (self.lambda - h) * self.phi_b - self.dphi_b
    }

    /// `omega`, overflowing to infinity if the scale is extreme.
    pub fn omega(&self, h: f64) -> f64 {
        let m = self.omega_scaled(h);
        if self.log2_scale == 0 {
            m
        } else {
            m * 2f64.powf(self.log2_scale as f64)
        }
    }

    /// `sin(theta_b - beta)`: the characteristic function normalized to
    /// `[-1, 1]`, same sign as `omega`. `beta = atan2(h - lambda, sigma)`
    /// is the boundary-condition angle.
    pub fn omega_normalized(&self, h: f64) -> f64 {
        let x = self.sigma * self.phi_b;
        let y = -self.dphi_b;
        let r = x.hypot(y);
        let w = (self.lambda - h).hypot(self.sigma);
        ((self.lambda - h) * x + self.sigma * y) / (r * w)
    }

    /// Continuous angle of the boundary condition at `b`.
    pub fn target_angle(&self, h: f64) -> f64 {
        (h - self.lambda).atan2(self.sigma)
    }

    /// `(theta_b - beta) / pi - negative_factors`: its integer crossings are
    /// exactly the eigenvalues, and eigenvalue `n` sits where it equals `n`.
    pub fn index_phase(&self, h: f64) -> f64 {
        (self.theta_b - self.target_angle(h)) / PI - self.negative_factors as f64
    }

    /// Number of eigenvalues strictly below this lambda (at phase resolution).
    pub fn count_below(&self, h: f64) -> usize {
        let f = self.index_phase(h);
        if f <= 0.0 {
            0
        } else {
            f.ceil() as usize
        }
    }
}

fn span_settings(p: &ValidatedProblem, piece: usize, lambda: f64, allow_rescale: bool) -> SpanSettings {
    let (lo, hi) = p.piece_bounds(piece);
    let solver = p.solver();
    SpanSettings {
        lambda,
        rel_tol: solver.rel_tol,
        abs_tol: solver.abs_tol,
        total_length: p.length(),
        piece_length: hi - lo,
        q_bound: p.piece_abs_bound(piece),
        allow_rescale,
    }
}

/// Integrates `(u, du)` across piece `piece` between two of its points.
fn run_span(
    p: &ValidatedProblem,
    piece: usize,
    x_from: f64,
    x_to: f64,
    carry: &mut Carry,
    lambda: f64,
    allow_rescale: bool,
    tracker: Option<&mut QuadrantTracker>,
    stats: &mut IntegratorStats,
) -> Result<()> {
    let set = span_settings(p, piece, lambda, allow_rescale);
    let use_taylor = !matches!(p.solver().integrator, IntegratorKind::DormandPrince);
    match p.potential() {
        Potential::Polynomial(polys) if use_taylor => {
            taylor_span(&polys[piece], x_from, x_to, carry, &set, tracker, stats)
        }
        _ => {
            let q = |x: f64| p.piece_value(piece, x);
            dormand_prince_span(&q, x_from, x_to, carry, &set, tracker, stats)
        }
    }
}

fn check_at(x: f64, expected: f64) -> Result<()> {
    let tol = 1e-12 * (1.0 + expected.abs());
    if (x - expected).abs() <= tol {
        Ok(())
    } else {
        Err(Error::Position { x, expected })
    }
}

/// Carries `state` from the left endpoint of `piece` to its right endpoint.
pub fn integrate_piece(p: &ValidatedProblem, piece: Piece, state: StateVector, lambda: f64) -> Result<StateVector> {
    integrate_piece_with_stats(p, piece, state, lambda).map(|(s, _)| s)
}

/// [`integrate_piece`] plus the integrator's step statistics.
pub fn integrate_piece_with_stats(
    p: &ValidatedProblem,
    piece: Piece,
    state: StateVector,
    lambda: f64,
) -> Result<(StateVector, IntegratorStats)> {
    if !lambda.is_finite() {
        return Err(Error::NonFinite { field: "lambda".into(), value: lambda });
    }
    let (lo, hi) = p.piece_bounds(piece.index());
    check_at(state.x, lo)?;
    let mut carry = Carry { u: state.u, du: state.du, exponent: 0 };
    let mut stats = IntegratorStats::default();
    run_span(p, piece.index(), lo, hi, &mut carry, lambda, false, None, &mut stats)?;
    Ok((StateVector { u: carry.u, du: carry.du, x: hi }, stats))
}

fn transmission_factor(p: &ValidatedProblem, point: Interface) -> f64 {
    match point {
        Interface::C1 => 1.0 / p.delta(),
        Interface::C2 => p.delta() / p.gamma(),
    }
}

/// Applies the left-to-right transmission map at `c1` (`1/delta`) or `c2` (`delta/gamma`).
pub fn apply_transmission(p: &ValidatedProblem, point: Interface, state: StateVector) -> Result<StateVector> {
    let at = match point {
        Interface::C1 => p.c1(),
        Interface::C2 => p.c2(),
    };
    check_at(state.x, at)?;
    let f = transmission_factor(p, point);
    Ok(StateVector { u: f * state.u, du: f * state.du, x: at })
}

/// Shoots from `a` to `b` at `lambda`.
pub fn propagate_solution(p: &ValidatedProblem, lambda: f64) -> Result<BoundaryData> {
    if !lambda.is_finite() {
        return Err(Error::NonFinite { field: "lambda".into(), value: lambda });
    }
    let mut carry = Carry { u: 1.0, du: 0.0, exponent: 0 };
    let mut tracker = QuadrantTracker::new(1.0, 0.0);
    let mut stats = IntegratorStats::default();
    let mut negative = 0u32;
    for piece in 0..3 {
        let (lo, hi) = p.piece_bounds(piece);
        run_span(p, piece, lo, hi, &mut carry, lambda, true, Some(&mut tracker), &mut stats)?;
        if piece < 2 {
            let f = transmission_factor(p, if piece == 0 { Interface::C1 } else { Interface::C2 });
            // Extreme scalars are split into mantissa and exponent so they cannot overflow.
            let exp = if (1e-30..=1e30).contains(&f.abs()) { 0 } else { f.abs().log2().floor() as i64 };
            let m = f * 2f64.powi(-(exp as i32));
            carry.u *= m;
            carry.du *= m;
            carry.exponent += exp;
            if f < 0.0 {
                negative += 1;
                tracker.flip(carry.u, carry.du);
            }
        }
    }
    let sigma = phase_scale(lambda);
    Ok(BoundaryData {
        lambda,
        phi_b: carry.u,
        dphi_b: carry.du,
        log2_scale: carry.exponent,
        theta_b: continuous_angle(sigma * carry.u, -carry.du, tracker.total),
        sigma,
        negative_factors: negative,
        integrator_stats: stats,
    })
}

/// Angle of `(x, y)` on the branch whose quadrant index is `quadrants`.
fn continuous_angle(x: f64, y: f64, quadrants: i64) -> f64 {
    let q = quadrant(x, y);
    let mut base = y.atan2(x);
    if base < 0.0 {
        base += 2.0 * PI;
    }
    // Guard against atan2 rounding across the quadrant edge.
    base = base.clamp(q as f64 * FRAC_PI_2, (q + 1) as f64 * FRAC_PI_2);
    let turns = (quadrants - q).div_euclid(4);
    base + 2.0 * PI * turns as f64
}

/// The characteristic function `omega(lambda) = (lambda - h) phi3(b) - phi3'(b)`.
pub fn char_function(p: &ValidatedProblem, lambda: f64) -> Result<f64> {
    Ok(propagate_solution(p, lambda)?.omega(p.h()))
}

/// `omega` as a mantissa and a base-2 exponent.
pub fn char_function_scaled(p: &ValidatedProblem, lambda: f64) -> Result<(f64, i64)> {
    let bd = propagate_solution(p, lambda)?;
    Ok((bd.omega_scaled(p.h()), bd.log2_scale))
}

/// Continuous Prüfer angle `theta(b, lambda)`.
pub fn pruefer_angle(p: &ValidatedProblem, lambda: f64) -> Result<f64> {
    Ok(propagate_solution(p, lambda)?.theta_b)
}

/// Number of eigenvalues strictly below `lambda`, from the phase count.
pub fn count_below(p: &ValidatedProblem, lambda: f64) -> Result<usize> {
    Ok(propagate_solution(p, lambda)?.count_below(p.h()))
}

/// Result of integrating `a -> b -> a` from `(1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundTrip {
    pub lambda: f64,
    /// `|(u - 1, u' / sigma)|` at `a` after the return trip.
    pub error: f64,
    pub u: f64,
    pub du: f64,
    /// Upper bound on how much the return trip can amplify a relative
    /// perturbation at `b`: `exp(2 (b - a) sqrt(max(0, sup|q| - lambda)))`.
    pub amplification: f64,
}

impl RoundTrip {
    /// Best error reachable in double precision, `16 eps amplification`.
    pub fn roundoff_floor(&self) -> f64 {
        16.0 * f64::EPSILON * self.amplification
    }
}

/// Integrates `a -> b`, then back `b -> a` with inverted transmission maps.
pub fn reverse_roundtrip(p: &ValidatedProblem, lambda: f64) -> Result<RoundTrip> {
    let mut carry = Carry { u: 1.0, du: 0.0, exponent: 0 };
    let mut stats = IntegratorStats::default();
    for piece in 0..3 {
        let (lo, hi) = p.piece_bounds(piece);
        run_span(p, piece, lo, hi, &mut carry, lambda, true, None, &mut stats)?;
        if piece < 2 {
            let f = transmission_factor(p, if piece == 0 { Interface::C1 } else { Interface::C2 });
            carry.u *= f;
            carry.du *= f;
        }
    }
    for piece in (0..3).rev() {
        let (lo, hi) = p.piece_bounds(piece);
        run_span(p, piece, hi, lo, &mut carry, lambda, true, None, &mut stats)?;
        if piece > 0 {
            let f = transmission_factor(p, if piece == 2 { Interface::C2 } else { Interface::C1 });
            carry.u /= f;
            carry.du /= f;
        }
    }
    let scale = 2f64.powf(carry.exponent as f64);
    let (u, du) = (carry.u * scale, carry.du * scale);
    let rate = (p.q_sup_bound() - lambda).max(0.0).sqrt();
    Ok(RoundTrip {
        lambda,
        error: (u - 1.0).hypot(du / phase_scale(lambda)),
        u,
        du,
        amplification: (2.0 * p.length() * rate).exp(),
    })
}

/// [`reverse_roundtrip`] error only.
pub fn reverse_roundtrip_error(p: &ValidatedProblem, lambda: f64) -> Result<f64> {
    Ok(reverse_roundtrip(p, lambda)?.error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;
    use crate::problem::{ProblemSpec, SolverSettings};
    use approx::assert_relative_eq;

    fn problem(delta: f64, gamma: f64, h: f64, q: PotentialSpec) -> ValidatedProblem {
        ProblemSpec::new(0.0, 1.0, 0.3, 0.7, delta, gamma, h, q).validate().unwrap()
    }

    #[test]
    fn spectral_point_squares_back() {
        for &l in &[-7.33, 0.0, 1e-8, 4.115858, 1e7] {
            let sp = SpectralPoint::new(l);
            assert_relative_eq!(sp.s_squared(), l, max_relative = 1e-14);
        }
    }

    #[test]
    fn piece_integration_examples() {
        let p = problem(1.0, 1.0, 0.0, PotentialSpec::zero());
        let s = 5.0f64;
        let out = integrate_piece(&p, Piece::Second, StateVector { u: 1.0, du: 0.0, x: 0.3 }, s * s).unwrap();
        assert_relative_eq!(out.u, (0.4 * s).cos(), epsilon = 1e-13);
        assert_relative_eq!(out.du, -s * (0.4 * s).sin(), epsilon = 1e-12);
        assert_eq!(out.x, 0.7);

        let one = problem(1.0, 1.0, 0.0, PotentialSpec::constant(1.0));
        let out = integrate_piece(&one, Piece::Third, StateVector { u: 1.0, du: 0.0, x: 0.7 }, 1.0).unwrap();
        assert_eq!((out.u, out.du), (1.0, 0.0));

        let lin = problem(1.0, 1.0, 0.0, PotentialSpec::global(vec![0.0, 1.0]));
        let out = integrate_piece(&lin, Piece::First, StateVector { u: 1.0, du: 0.0, x: 0.0 }, 0.0).unwrap();
        assert_relative_eq!(out.u, 1.004504, epsilon = 1e-6);
        assert_relative_eq!(out.du, 0.045081, epsilon = 1e-6);

        let err = integrate_piece(&lin, Piece::First, StateVector { u: 1.0, du: 0.0, x: 0.1 }, 0.0).unwrap_err();
        assert!(matches!(err, Error::Position { .. }));
    }

    #[test]
    fn transmission_examples() {
        let p = problem(2.0, 3.0, 0.0, PotentialSpec::zero());
        let s = apply_transmission(&p, Interface::C1, StateVector { u: 1.0, du: 0.0, x: 0.3 }).unwrap();
        assert_eq!((s.u, s.du), (0.5, 0.0));
        let s = apply_transmission(&p, Interface::C2, StateVector { u: 0.5, du: 0.0, x: 0.7 }).unwrap();
        assert_relative_eq!(s.u, 1.0 / 3.0, max_relative = 1e-15);
        let id = problem(1.0, 1.0, 0.0, PotentialSpec::zero());
        let st = StateVector { u: 0.3, du: -1.7, x: 0.7 };
        assert_eq!(apply_transmission(&id, Interface::C2, st).unwrap(), st);
        assert!(matches!(apply_transmission(&p, Interface::C1, st), Err(Error::Position { .. })));
    }

    #[test]
    fn propagation_examples() {
        let p = problem(2.0, 3.0, 0.0, PotentialSpec::zero());
        let bd = propagate_solution(&p, 0.0).unwrap();
        assert_relative_eq!(bd.phi_b, 1.0 / 3.0, max_relative = 1e-15);
        assert_eq!(bd.dphi_b, 0.0);

        let one = problem(2.0, 3.0, 0.0, PotentialSpec::constant(1.0));
        let bd = propagate_solution(&one, 1.0).unwrap();
        assert_relative_eq!(bd.phi_b, 1.0 / 3.0, max_relative = 1e-15);
        assert_eq!(bd.dphi_b, 0.0);

        let id = problem(1.0, 1.0, 0.0, PotentialSpec::zero());
        for &s in &[0.5f64, 3.0, 40.0] {
            let bd = propagate_solution(&id, s * s).unwrap();
            assert_relative_eq!(bd.phi_b, s.cos(), epsilon = 1e-13);
            assert_relative_eq!(bd.dphi_b, -s * s.sin(), epsilon = 1e-12 * s);
        }
    }

    #[test]
    fn char_function_examples() {
        let id = problem(1.0, 1.0, 0.0, PotentialSpec::zero());
        let l = FRAC_PI_2 * FRAC_PI_2;
        assert_relative_eq!(char_function(&id, l).unwrap(), FRAC_PI_2, max_relative = 1e-12);
        let g3 = problem(1.0, 3.0, 0.0, PotentialSpec::zero());
        assert_relative_eq!(char_function(&g3, l).unwrap(), PI / 6.0, max_relative = 1e-12);
        assert!(char_function(&id, 4.115858).unwrap().abs() <= 1e-5);
    }

    #[test]
    fn phase_examples() {
        let id = problem(1.0, 1.0, 0.0, PotentialSpec::zero());
        for &s in &[0.3f64, 2.0, 17.5] {
            let theta = pruefer_angle(&id, s * s).unwrap();
            let sigma = (1.0 + s * s).sqrt();
            assert!((theta - s).abs() < 0.5);
            assert_relative_eq!(theta.tan(), s * s.tan() / sigma, max_relative = 1e-10);
        }
        assert_relative_eq!(pruefer_angle(&id, PI * PI).unwrap(), PI, max_relative = 1e-12);
        let scaled = problem(2.0, 3.0, 0.0, PotentialSpec::zero());
        assert_relative_eq!(pruefer_angle(&scaled, PI * PI).unwrap(), PI, max_relative = 1e-12);
    }

    #[test]
    fn negative_factors_shift_phase() {
        let p = problem(-1.0, 2.0, 0.0, PotentialSpec::zero());
        let bd = propagate_solution(&p, 9.0).unwrap();
        assert_eq!(bd.negative_factors, 2);
        let base = (3.0 * 3f64.sin()).atan2(10f64.sqrt() * 3f64.cos());
        assert_relative_eq!(bd.theta_b, base + 2.0 * PI, max_relative = 1e-12);
        let p = problem(0.5, -4.0, 0.0, PotentialSpec::zero());
        let bd = propagate_solution(&p, 9.0).unwrap();
        assert_eq!(bd.negative_factors, 1);
        assert_relative_eq!(bd.theta_b, base + PI, max_relative = 1e-12);
    }

    #[test]
    fn counts_for_free_problem() {
        // q = 0, h = 0, L = 1: eigenvalues 0, 4.1159, 24.1393, 63.659
        let id = problem(1.0, 1.0, 0.0, PotentialSpec::zero());
        assert_eq!(count_below(&id, -0.5).unwrap(), 0);
        assert_eq!(count_below(&id, 0.5).unwrap(), 1);
        assert_eq!(count_below(&id, 10.0).unwrap(), 2);
        assert_eq!(count_below(&id, 30.0).unwrap(), 3);
        assert_eq!(count_below(&id, 70.0).unwrap(), 4);
        let neg = problem(0.5, -4.0, 0.0, PotentialSpec::zero());
        assert_eq!(count_below(&neg, 30.0).unwrap(), 3);
    }

    #[test]
    fn dormand_prince_route_agrees() {
        let mut solver = SolverSettings::default();
        solver.integrator = IntegratorKind::DormandPrince;
        let lin = problem(2.0, 3.0, 0.0, PotentialSpec::global(vec![0.0, 1.0]));
        let rk = lin.with_solver(solver);
        for &l in &[-20.0, 3.0, 150.0] {
            let a = propagate_solution(&lin, l).unwrap();
            let b = propagate_solution(&rk, l).unwrap();
            assert_relative_eq!(a.phi_b, b.phi_b, epsilon = 1e-8 * (1.0 + a.phi_b.abs()));
            assert_relative_eq!(a.theta_b, b.theta_b, epsilon = 1e-8);
        }
    }

    #[test]
    fn roundtrip_recovers_initial_data() {
        let one = problem(2.0, 3.0, 0.0, PotentialSpec::constant(1.0));
        for &l in &[1.0, 100.0, 1e4] {
            assert!(reverse_roundtrip_error(&one, l).unwrap() <= 1e-12);
        }
        // Growing solutions leave only the double-precision floor.
        let rt = reverse_roundtrip(&one, -100.0).unwrap();
        assert_relative_eq!(rt.amplification, (2.0 * 101f64.sqrt()).exp(), max_relative = 1e-12);
        assert!(rt.error <= rt.roundoff_floor());
    }
}
