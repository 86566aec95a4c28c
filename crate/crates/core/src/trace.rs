//! Regularized first trace: per-term deviations, partial sums, a fitted
//! tail, and the closed-form right-hand side it is compared against.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{compute_k, mu};
use crate::error::{Error, Result};
use crate::problem::ValidatedProblem;
use crate::spectrum::{compute_spectrum, EigenvalueRecord, SpectrumWarning, DEFAULT_ROOT_TOL};

/// Smallest number of terms a trace report accepts.
pub const MIN_TRACE_TERMS: usize = 64;
/// Smallest number of terms the tail fit accepts.
pub const MIN_FIT_TERMS: usize = 32;

/// Which terms are regularized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceConvention {
    /// Every term from `n = 0` is `lambda_n - mu_n^2 - K`.
    #[default]
    Theorem,
    /// `lambda_0` enters bare; regularized terms start at `n = 1`.
    Series31,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub tail: f64,
    pub uncertainty: f64,
    /// Fitted coefficients of `1/(n - 1/2)^2` and `1/(n - 1/2)^3`.
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReport {
    pub convention: TraceConvention,
    pub n_terms: usize,
    pub partial_sum: f64,
    pub tail_estimate: f64,
    pub tail_uncertainty: f64,
    pub total: f64,
    pub closed_form_rhs: f64,
    pub deviation: f64,
    pub stability: f64,
    pub per_term_table: Vec<(usize, f64)>,
    pub warnings: Vec<TraceWarning>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceWarning {
    /// `|total(N) - total(N/2)|` exceeds ten times the tail uncertainty.
    Stability { stability: f64, tail_uncertainty: f64 },
    Spectrum(SpectrumWarning),
}

/// Both conventions from one spectrum, plus the conversion check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceBundle {
    pub theorem: TraceReport,
    pub series31: TraceReport,
    /// `total_theorem - total_series31`.
    pub conversion_difference: f64,
    /// `-(pi^2 / (4 L^2) + K)`.
    pub conversion_expected: f64,
    pub records: Vec<EigenvalueRecord>,
}

impl TraceBundle {
    pub fn report(&self, convention: TraceConvention) -> &TraceReport {
        match convention {
            TraceConvention::Theorem => &self.theorem,
            TraceConvention::Series31 => &self.series31,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitSensitivity {
    pub c1: f64,
    pub c2: f64,
    pub rhs: f64,
}

/// `lambda_n - mu_n^2 - K`.
pub fn trace_term(p: &ValidatedProblem, record: &EigenvalueRecord) -> f64 {
    regularized(record.lambda, mu(p, record.n), compute_k(p))
}

fn regularized(lambda: f64, mu: f64, k: f64) -> f64 {
    lambda - mu * mu - k
}

fn check_consecutive(records: &[EigenvalueRecord]) -> Result<()> {
    for (i, r) in records.iter().enumerate() {
        if r.n != i {
            return Err(Error::IndexGap { position: i, found: r.n });
        }
    }
    Ok(())
}

/// Series terms under `convention`, ascending in `n`.
fn series_terms(p: &ValidatedProblem, records: &[EigenvalueRecord], convention: TraceConvention) -> Vec<(usize, f64)> {
    let k = compute_k(p);
    records
        .iter()
        .map(|r| {
            let t = if r.n == 0 && convention == TraceConvention::Series31 {
                r.lambda
            } else {
                regularized(r.lambda, mu(p, r.n), k)
            };
            (r.n, t)
        })
        .collect()
}

/// Running sums of the series under `convention`.
pub fn partial_sums(p: &ValidatedProblem, records: &[EigenvalueRecord], convention: TraceConvention) -> Result<Vec<f64>> {
    check_consecutive(records)?;
    let mut acc = 0.0;
    Ok(series_terms(p, records, convention)
        .into_iter()
        .map(|(_, t)| {
            acc += t;
            acc
        })
        .collect())
}

/// Hurwitz zeta `sum_{k >= 0} (a + k)^{-s}` for `s > 1`, `a > 0`, by Euler-Maclaurin.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    const M: usize = 12;
    // B_2j / (2j)!
    const COEF: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
    ];
    let mut sum: f64 = (0..M).map(|k| (a + k as f64).powf(-s)).sum();
    let x = a + M as f64;
    sum += x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // Rising factorial s (s+1) ... (s+2j-2) times x^{-s-2j+1}.
    let mut rising = s;
    let mut power = x.powf(-s - 1.0);
    for (j, c) in COEF.iter().enumerate() {
        sum += c * rising * power;
        let m = 2.0 * j as f64;
        rising *= (s + m + 1.0) * (s + m + 2.0);
        power /= x * x;
    }
    sum
}

/// Fits `t_n ~ A/(n-1/2)^2 + B/(n-1/2)^3` on the top half of `terms` and sums
/// the model over every index beyond the last one.
pub fn tail_extrapolate(terms: &[(usize, f64)]) -> Result<TailEstimate> {
    if terms.len() < MIN_FIT_TERMS {
        return Err(Error::FitFailure { detail: format!("need at least {MIN_FIT_TERMS} terms, got {}", terms.len()) });
    }
    let window = &terms[terms.len() / 2..];
    let last = window.last().map(|t| t.0).unwrap_or(0);
    let top = last as f64 - 0.5;
    if window.iter().any(|&(n, _)| n == 0) || top <= 0.0 {
        return Err(Error::FitFailure { detail: "fit window must not contain n = 0".into() });
    }
    // Columns scaled to O(1) by the largest m in the window.
    let cols: Vec<(f64, f64, f64)> = window
        .iter()
        .map(|&(n, t)| {
            let r = top / (n as f64 - 0.5);
            (r * r, r * r * r, t)
        })
        .collect();
    // Modified Gram-Schmidt on the two columns.
    let n1: f64 = cols.iter().map(|c| c.0 * c.0).sum::<f64>().sqrt();
    let q1: Vec<f64> = cols.iter().map(|c| c.0 / n1).collect();
    let r12: f64 = cols.iter().zip(&q1).map(|(c, q)| c.1 * q).sum();
    let v2: Vec<f64> = cols.iter().zip(&q1).map(|(c, q)| c.1 - r12 * q).collect();
    let n2: f64 = v2.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(n2 > 1e-12 * n1) {
        return Err(Error::FitFailure { detail: "fit columns are degenerate over the window".into() });
    }
    let q2: Vec<f64> = v2.iter().map(|v| v / n2).collect();
    let y1: f64 = cols.iter().zip(&q1).map(|(c, q)| c.2 * q).sum();
    let y2: f64 = cols.iter().zip(&q2).map(|(c, q)| c.2 * q).sum();
    let beta = y2 / n2;
    let alpha = (y1 - r12 * beta) / n1;
    let a = alpha * top * top;
    let b = beta * top * top * top;
    let max_resid = cols.iter().map(|c| (c.2 - alpha * c.0 - beta * c.1).abs()).fold(0.0, f64::max);
    let start = last as f64 + 0.5;
    let a_part = a * hurwitz_zeta(2.0, start);
    let b_part = b * hurwitz_zeta(3.0, start);
    Ok(TailEstimate {
        tail: a_part + b_part,
        uncertainty: (max_resid * window.len() as f64).max(b_part.abs()),
        a,
        b,
    })
}

/// The closed-form right-hand side with the problem's own split points.
pub fn trace_closed_form(p: &ValidatedProblem) -> f64 {
    let q = p.compute_q();
    closed_form_with(p, q.q1, q.q2, q.q3b)
}

fn closed_form_with(p: &ValidatedProblem, q1: f64, q2: f64, q3: f64) -> f64 {
    let l = p.length();
    let qa = p.piece_value(0, p.a());
    let qb = p.piece_value(2, p.b());
    p.h() - 0.5 - 2.0 / l - PI * PI / (4.0 * l * l) - 0.25 * (qb - qa) - (q1 + q2 + q3) / l
        - 0.125 * (q1 * q1 + q2 * q2 + q3 * q3)
}

/// The same right-hand side with the piece integrals taken over
/// `[a, c1p]`, `[c1p, c2p]`, `[c2p, b]`. Only for a globally defined q.
pub fn trace_closed_form_splits(p: &ValidatedProblem, c1p: f64, c2p: f64) -> Result<f64> {
    if !(p.a() <= c1p && c1p <= c2p && c2p <= p.b()) {
        let (x, lo, hi) = if c1p < p.a() || c1p > p.b() { (c1p, p.a(), p.b()) } else { (c2p, c1p, p.b()) };
        return Err(Error::Domain { x, lo, hi });
    }
    if !p.is_globally_defined() {
        return Err(Error::Range { detail: "split sensitivity needs a single polynomial on all pieces".into() });
    }
    let (q1, q2, q3) = p.split_integrals(c1p, c2p)?;
    Ok(closed_form_with(p, q1, q2, q3))
}

/// Right-hand side over the 5x5 grid `c1' = a + L i/8`, `c2' = (a+b)/2 + L j/8`,
/// `i, j = 0..4`. `None` unless q is globally defined.
pub fn splits_sensitivity(p: &ValidatedProblem) -> Option<Vec<SplitSensitivity>> {
    if !p.is_globally_defined() {
        return None;
    }
    let l = p.length();
    let mid = 0.5 * (p.a() + p.b());
    let mut out = Vec::with_capacity(25);
    for i in 0..5 {
        for j in 0..5 {
            let c1 = p.a() + l * i as f64 / 8.0;
            let c2 = (mid + l * j as f64 / 8.0).min(p.b());
            let rhs = trace_closed_form_splits(p, c1, c2).ok()?;
            out.push(SplitSensitivity { c1, c2, rhs });
        }
    }
    Some(out)
}

fn totals(p: &ValidatedProblem, records: &[EigenvalueRecord], convention: TraceConvention) -> Result<(f64, TailEstimate)> {
    let sums = partial_sums(p, records, convention)?;
    let terms = series_terms(p, records, convention);
    let tail = tail_extrapolate(&terms)?;
    Ok((sums.last().copied().unwrap_or(0.0) + tail.tail, tail))
}

fn build_report(
    p: &ValidatedProblem,
    records: &[EigenvalueRecord],
    convention: TraceConvention,
    spectrum_warnings: &[SpectrumWarning],
) -> Result<TraceReport> {
    let n = records.len();
    let sums = partial_sums(p, records, convention)?;
    let terms = series_terms(p, records, convention);
    let tail = tail_extrapolate(&terms)?;
    let partial_sum = sums.last().copied().unwrap_or(0.0);
    let total = partial_sum + tail.tail;
    let (half_total, _) = totals(p, &records[..n / 2], convention)?;
    let stability = (total - half_total).abs();
    let closed_form_rhs = trace_closed_form(p);
    let mut warnings: Vec<TraceWarning> = spectrum_warnings.iter().cloned().map(TraceWarning::Spectrum).collect();
    if stability > 10.0 * tail.uncertainty {
        warnings.push(TraceWarning::Stability { stability, tail_uncertainty: tail.uncertainty });
    }
    Ok(TraceReport {
        convention,
        n_terms: n,
        partial_sum,
        tail_estimate: tail.tail,
        tail_uncertainty: tail.uncertainty,
        total,
        closed_form_rhs,
        deviation: total - closed_form_rhs,
        stability,
        per_term_table: terms,
        warnings,
    })
}

/// Both conventions over already computed, consecutive records.
pub fn trace_from_records(
    p: &ValidatedProblem,
    records: &[EigenvalueRecord],
    spectrum_warnings: &[SpectrumWarning],
) -> Result<TraceBundle> {
    if records.len() < MIN_TRACE_TERMS {
        return Err(Error::Range { detail: format!("need at least {MIN_TRACE_TERMS} terms, got {}", records.len()) });
    }
    check_consecutive(records)?;
    let theorem = build_report(p, records, TraceConvention::Theorem, spectrum_warnings)?;
    let series31 = build_report(p, records, TraceConvention::Series31, spectrum_warnings)?;
    let l = p.length();
    Ok(TraceBundle {
        conversion_difference: theorem.total - series31.total,
        conversion_expected: -(PI * PI / (4.0 * l * l) + compute_k(p)),
        theorem,
        series31,
        records: records.to_vec(),
    })
}

/// Computes `n_terms` eigenvalues and reports the trace in both conventions.
pub fn trace_bundle(p: &ValidatedProblem, n_terms: usize) -> Result<TraceBundle> {
    if n_terms < MIN_TRACE_TERMS {
        return Err(Error::Range { detail: format!("need at least {MIN_TRACE_TERMS} terms, got {n_terms}") });
    }
    let spectrum = compute_spectrum(p, n_terms, DEFAULT_ROOT_TOL)?;
    trace_from_records(p, &spectrum.records, &spectrum.warnings)
}

pub fn trace_report(p: &ValidatedProblem, n_terms: usize, convention: TraceConvention) -> Result<TraceReport> {
    Ok(trace_bundle(p, n_terms)?.report(convention).clone())
}
