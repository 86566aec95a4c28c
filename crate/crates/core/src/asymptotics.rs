//! Large-`s` expansions: the alpha coefficients, the truncated solution on
//! the last piece, the characteristic function, and eigenvalue asymptotics.
//!
//! Values of q at the interfaces are read with the problem's
//! [`SideConvention`]; `q(a)`, `q'(a)` come from the first piece and
//! `q(x)`, `q'(x)`, `q''(x)` for `x` in `(c2, b]` from the third.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{SideConvention, ValidatedProblem};
use crate::shooting::propagate_solution;

/// The four alpha functions and the derivatives the expansions need, at one `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaValues {
    pub x: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    pub alpha1_prime: f64,
    pub alpha3_prime: f64,
    pub alpha4_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticCoefficients {
    pub alpha1_b: f64,
    pub alpha2_b: f64,
    pub alpha3_b: f64,
    pub alpha4_b: f64,
    pub alpha1_prime_b: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3b: f64,
    pub side_convention: SideConvention,
}

/// Eigenvalue asymptotics for one index. `s` is only defined for `n >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticEigen {
    pub n: usize,
    pub s: Option<f64>,
    pub lambda: f64,
}

/// Alpha functions at `x` in `[c2, b]`.
pub fn alpha_values(p: &ValidatedProblem, x: f64) -> Result<AlphaValues> {
    if !(x >= p.c2() && x <= p.b()) {
        return Err(Error::Domain { x, lo: p.c2(), hi: p.b() });
    }
    let q = p.compute_q();
    let (q1, q2) = (q.q1, q.q2);
    let q3 = q.q3_at(x)?;
    let qa = p.piece_value(0, p.a());
    let dqa = p.piece_derivative(0, p.a(), 1);
    let qc1 = p.q_conv(p.c1());
    let qc2 = p.q_conv(p.c2());
    let dqc2 = p.dq_conv(p.c2());
    let qx = p.piece_value(2, x);
    let dqx = p.piece_derivative(2, x, 1);
    let ddqx = p.piece_derivative(2, x, 2);
    let s12 = q1 + q2;
    let p12 = q1 * q2;

    let alpha1 = 0.5 * (q1 + q2 + q3);
    let alpha2 = 0.25 * (qx - qa - p12 - q3 * s12);
    let alpha3 = 0.125 * (qx * s12 - dqx - dqa - qa * q2 + qc1 * s12 - q3 * (qa + p12));
    let alpha4 = 0.25 * (qc2 * q1 - dqc2) + 0.125 * qc2 * (q3 + q2);
    Ok(AlphaValues {
        x,
        alpha1,
        alpha2,
        alpha3,
        alpha4,
        alpha1_prime: 0.5 * qx,
        alpha3_prime: 0.125 * (dqx * s12 - ddqx - qx * (qa + p12)),
        alpha4_prime: 0.125 * qc2 * qx,
    })
}

pub fn alpha_coefficients(p: &ValidatedProblem) -> AsymptoticCoefficients {
    let v = alpha_values(p, p.b()).expect("b lies in [c2, b]");
    let q = p.compute_q();
    AsymptoticCoefficients {
        alpha1_b: v.alpha1,
        alpha2_b: v.alpha2,
        alpha3_b: v.alpha3,
        alpha4_b: v.alpha4,
        alpha1_prime_b: v.alpha1_prime,
        k: 2.0 * (1.0 + v.alpha1) / p.length(),
        q1: q.q1,
        q2: q.q2,
        q3b: q.q3b,
        side_convention: p.sides(),
    }
}

pub fn compute_k(p: &ValidatedProblem) -> f64 {
    alpha_coefficients(p).k
}

fn check_s(s: f64) -> Result<()> {
    if s >= 1.0 {
        Ok(())
    } else {
        Err(Error::SmallS { s })
    }
}

/// Truncated expansions of `phi3(x)` and `phi3'(x)` for `x` in `(c2, b]`.
pub fn phi3_asymptotic(p: &ValidatedProblem, x: f64, s: f64) -> Result<(f64, f64)> {
    if !(x > p.c2() && x <= p.b()) {
        return Err(Error::Domain { x, lo: p.c2(), hi: p.b() });
    }
    check_s(s)?;
    let v = alpha_values(p, x)?;
    let g = p.gamma();
    let (sn, cs) = (s * (x - p.a())).sin_cos();
    let (sn2, cs2) = (s * (x - 2.0 * p.c2() + p.a())).sin_cos();
    let phi = cs / g
        + v.alpha1 / (s * g) * sn
        + v.alpha2 / (s * s * g) * cs
        + (v.alpha3 * sn + v.alpha4 * sn2) / (s.powi(3) * g);
    let dphi = -s / g * sn
        + v.alpha1 / g * cs
        + (v.alpha1_prime - v.alpha2) / (s * g) * sn
        + ((v.alpha3 + v.alpha3_prime) * cs + v.alpha4 * cs2) / (s * s * g)
        + (v.alpha3_prime * sn + v.alpha4_prime * sn2) / (s.powi(3) * g);
    Ok((phi, dphi))
}

/// Truncated asymptotic characteristic function at `lambda = s^2`.
pub fn omega_asymptotic(p: &ValidatedProblem, s: f64) -> Result<f64> {
    check_s(s)?;
    let c = alpha_coefficients(p);
    let l = p.length();
    let h = p.h();
    let (sn, cs) = (s * l).sin_cos();
    let sn2 = (s * (p.b() - 2.0 * p.c2() + p.a())).sin();
    let bracket = s * s * cs
        + s * (1.0 + c.alpha1_b) * sn
        + (c.alpha2_b - c.alpha1_b - h) * cs
        + ((c.alpha3_b - h * c.alpha1_b + c.alpha2_b - c.alpha1_prime_b) * sn + c.alpha4_b * sn2) / s;
    Ok(bracket / p.gamma())
}

/// `(n - 1/2) pi / (b - a)`.
pub fn mu(p: &ValidatedProblem, n: usize) -> f64 {
    (n as f64 - 0.5) * PI / p.length()
}

/// Eigenvalue asymptotics with the remainder terms dropped.
pub fn eig_asymptotic(p: &ValidatedProblem, n: i64) -> Result<AsymptoticEigen> {
    if n < 0 {
        return Err(Error::Index { n });
    }
    let n = n as usize;
    let c = alpha_coefficients(p);
    let m = mu(p, n);
    let s = (n >= 1).then(|| m + (1.0 + c.alpha1_b) / ((n as f64 - 0.5) * PI));
    Ok(AsymptoticEigen { n, s, lambda: m * m + c.k })
}

/// `|gamma omega_shoot(s^2) - gamma omega_asym(s)| / s^2` at each `s`.
pub fn leading_order_residuals(p: &ValidatedProblem, s_values: &[f64]) -> Result<Vec<(f64, f64)>> {
    let g = p.gamma();
    s_values
        .iter()
        .map(|&s| {
            let shot = propagate_solution(p, s * s)?.omega(p.h());
            let asym = omega_asymptotic(p, s)?;
            Ok((s, (g * shot - g * asym).abs() / (s * s)))
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`; `None` if fewer than two usable points.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
