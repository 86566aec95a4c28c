//! Closed-form machinery for `q = 0` and the transmission-factorization
//! comparator. Nothing here goes through the shooting integrators except
//! [`factorization_check`], which compares two shooting runs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::ValidatedProblem;
use crate::shooting::propagate_solution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleRoot {
    pub n: usize,
    /// `s` with `lambda = s^2` for `lambda >= 0`, `t` with `lambda = -t^2` otherwise.
    pub s_or_t: f64,
    pub lambda: f64,
    pub equation_residual: f64,
}

/// The `q = 0` characteristic function with `delta = 1`.
pub fn oracle_omega_qzero(l: f64, gamma: f64, h: f64, lambda: f64) -> f64 {
    if lambda >= 0.0 {
        let s = lambda.sqrt();
        let (sn, cs) = (s * l).sin_cos();
        ((lambda - h) * cs + s * sn) / gamma
    } else {
        let t = (-lambda).sqrt();
        (t * l).cosh() / gamma * ((lambda - h) - t * (t * l).tanh())
    }
}

/// `(s^2 - h) cos(sL) + s sin(sL)`, whose positive zeros are `sqrt(lambda_n)`.
fn trig_equation(l: f64, h: f64, s: f64) -> f64 {
    let (sn, cs) = (s * l).sin_cos();
    (s * s - h) * cs + s * sn
}

/// `-t^2 - h - t tanh(tL)`, whose positive zero gives the negative eigenvalue.
fn hyperbolic_equation(l: f64, h: f64, t: f64) -> f64 {
    -t * t - h - t * (t * l).tanh()
}

/// Plain bisection until the interval stops shrinking.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return if f(lo).abs() <= f(hi).abs() { lo } else { hi };
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
}

/// Lowest `count` eigenvalues of the `q = 0` problem on an interval of length `l`.
pub fn oracle_eigs_qzero(l: f64, h: f64, count: usize) -> Result<Vec<OracleRoot>> {
    if count == 0 {
        return Err(Error::Range { detail: "count must be at least 1".into() });
    }
    if !(l > 0.0) || !h.is_finite() {
        return Err(Error::Range { detail: format!("need L > 0 and finite h, got L={l}, h={h}") });
    }
    let mut roots = Vec::with_capacity(count);
    let push = |roots: &mut Vec<OracleRoot>, s_or_t: f64, lambda: f64, residual: f64| {
        let n = roots.len();
        roots.push(OracleRoot { n, s_or_t, lambda, equation_residual: residual });
    };
    if h < 0.0 {
        // The hyperbolic equation is strictly decreasing in t, from -h > 0.
        let g = |t: f64| hyperbolic_equation(l, h, t);
        let t = bisect(g, 0.0, (-h).sqrt());
        push(&mut roots, t, -t * t, g(t).abs() / (t * t + h.abs()));
    } else if h == 0.0 {
        push(&mut roots, 0.0, 0.0, 0.0);
    }
    // Scan in s fine enough that every root sits in its own cell.
    let ds = std::f64::consts::PI / (64.0 * l);
    let g = |s: f64| trig_equation(l, h, s);
    let mut i = if h == 0.0 { 1 } else { 0 };
    let mut s0 = i as f64 * ds;
    let mut f0 = g(s0);
    while roots.len() < count {
        i += 1;
        let s1 = i as f64 * ds;
        let f1 = g(s1);
        if f1 == 0.0 || (f0 < 0.0) != (f1 < 0.0) {
            let s = if f1 == 0.0 { s1 } else { bisect(g, s0, s1) };
            let scale = (s * s - h).abs() + s;
            push(&mut roots, s, s * s, g(s).abs() / scale);
            // Step past an exact grid zero so it is not found twice.
            if f1 == 0.0 {
                i += 1;
                let s2 = i as f64 * ds;
                s0 = s2;
                f0 = g(s2);
                continue;
            }
        }
        s0 = s1;
        f0 = f1;
    }
    Ok(roots)
}

/// Largest `|gamma omega_{delta,gamma} - omega_{1,1}| / (1 + |omega_{1,1}|)` over the grid.
pub fn factorization_check(p: &ValidatedProblem, lambda_grid: &[f64]) -> Result<f64> {
    if lambda_grid.is_empty() {
        return Err(Error::Range { detail: "empty lambda grid".into() });
    }
    let unit = p.with_transmission(1.0, 1.0)?;
    let mut worst = 0.0f64;
    for &l in lambda_grid {
        let scaled = propagate_solution(p, l)?.omega(p.h());
        let plain = propagate_solution(&unit, l)?.omega(p.h());
        worst = worst.max((p.gamma() * scaled - plain).abs() / (1.0 + plain.abs()));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn omega_examples() {
        let l = (PI / 2.0).powi(2);
        assert_relative_eq!(oracle_omega_qzero(1.0, 1.0, 0.0, l), PI / 2.0, max_relative = 1e-15);
        assert_relative_eq!(oracle_omega_qzero(1.0, 3.0, 0.0, l), PI / 6.0, max_relative = 1e-15);
        let root = -7.318752178188588f64;
        assert!(oracle_omega_qzero(1.0, 1.0, -10.0, root).abs() <= 1e-12 * (-root).sqrt().cosh());
        assert!(oracle_omega_qzero(1.0, 1.0, -10.0, -7.33).abs() <= 1e-1 * 7.33f64.sqrt().cosh());
    }

    #[test]
    fn roots_without_shift() {
        let r = oracle_eigs_qzero(1.0, 0.0, 4).unwrap();
        let expected = [0.0, 4.115858365694523, 24.139342030445557, 63.65910655043869];
        for (root, e) in r.iter().zip(expected) {
            assert_relative_eq!(root.lambda, e, max_relative = 1e-13);
        }
        assert_relative_eq!(r[1].s_or_t, 2.028758, epsilon = 1e-6);
        assert_relative_eq!(r[2].s_or_t, 4.913180, epsilon = 1e-6);
        assert_relative_eq!(r[3].s_or_t, 7.978666, epsilon = 1e-6);
    }

    #[test]
    fn roots_with_shift() {
        let r = oracle_eigs_qzero(1.0, 1.0, 1).unwrap();
        assert_relative_eq!(r[0].lambda, 0.4573183239631182, max_relative = 1e-13);
        let r = oracle_eigs_qzero(1.0, -10.0, 3).unwrap();
        assert_relative_eq!(r[0].lambda, -7.318752178188588, max_relative = 1e-13);
        let t = r[0].s_or_t;
        assert_relative_eq!(t * t.tanh(), 10.0 - t * t, epsilon = 1e-12);
        assert!(r[1].lambda > 0.0);
    }

    #[test]
    fn roots_satisfy_their_equations() {
        for &h in &[0.0, 1.0, -10.0, 3.5] {
            for &l in &[1.0, 2.5] {
                let roots = oracle_eigs_qzero(l, h, 60).unwrap();
                for w in roots.windows(2) {
                    assert!(w[1].lambda > w[0].lambda);
                }
                for r in &roots {
                    assert!(r.equation_residual <= 1e-12, "{r:?}");
                    let om = oracle_omega_qzero(l, 1.0, h, r.lambda);
                    let scale = if r.lambda < 0.0 { (r.s_or_t * l).cosh() } else { 1.0 };
                    assert!(om.abs() <= 1e-10 * (1.0 + r.lambda.abs()) * scale, "{r:?} {om}");
                }
            }
        }
    }

    #[test]
    fn zero_count_is_rejected() {
        assert!(oracle_eigs_qzero(1.0, 0.0, 0).is_err());
    }
}
