use std::fmt::Write;

use serde::Serialize;
use sltrace::asymptotics::eig_asymptotic;
use sltrace::reference::{factorization_check, oracle_eigs_qzero};
use sltrace::shooting::{propagate_solution, reverse_roundtrip};
use sltrace::spectrum::{compute_spectrum, Spectrum, SpectrumWarning, DEFAULT_ROOT_TOL};
use sltrace::trace::{splits_sensitivity, trace_bundle, SplitSensitivity, TraceConvention, TraceReport, MIN_TRACE_TERMS};
use sltrace::ValidatedProblem;

use crate::output::fmt_f64;
use crate::{CliError, Outcome, EXIT_ASSERT, EXIT_OK, EXIT_SOLVE};

pub const EIG_HEADER: &str = "n,lambda,s,residual,lambda_asym,deviation";
pub const SCAN_HEADER: &str = "lambda,omega,theta_b";

fn warning_text(w: &SpectrumWarning) -> String {
    serde_json::to_string(w).unwrap_or_else(|_| format!("{w:?}"))
}

fn certified_spectrum(p: &ValidatedProblem, count: usize) -> Result<Spectrum, CliError> {
    let spectrum = compute_spectrum(p, count, DEFAULT_ROOT_TOL)?;
    if !spectrum.all_certified() {
        let detail: Vec<String> = spectrum
            .warnings
            .iter()
            .filter(|w| matches!(w, SpectrumWarning::Certification { .. }))
            .map(warning_text)
            .collect();
        return Err(CliError::Certification(detail.join("; ")));
    }
    Ok(spectrum)
}

/// Two-term asymptotic eigenvalue: `s_n^2` for `n >= 1`, `mu_0^2 + K` for `n = 0`.
pub fn lambda_asym(p: &ValidatedProblem, n: usize) -> Result<f64, CliError> {
    let e = eig_asymptotic(p, n as i64)?;
    Ok(match e.s {
        Some(s) => s * s,
        None => e.lambda,
    })
}

pub fn cmd_eig(p: &ValidatedProblem, count: usize) -> Result<Outcome, CliError> {
    if count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let spectrum = certified_spectrum(p, count)?;
    let mut body = String::new();
    writeln!(body, "{EIG_HEADER}").unwrap();
    for r in &spectrum.records {
        let asym = lambda_asym(p, r.n)?;
        writeln!(
            body,
            "{},{},{},{},{},{}",
            r.n,
            fmt_f64(r.lambda),
            fmt_f64(r.s),
            fmt_f64(r.residual),
            fmt_f64(asym),
            fmt_f64(r.lambda - asym)
        )
        .unwrap();
    }
    Ok(Outcome { body, warnings: spectrum.warnings.iter().map(warning_text).collect(), exit_code: EXIT_OK })
}

fn signed_root(lambda: f64) -> f64 {
    lambda.signum() * lambda.abs().sqrt()
}

/// `points` values spread uniformly in `sign(lambda) sqrt(|lambda|)`, so the
/// positive part is uniform in `s` and the negative part uniform in `t`.
pub fn scan_grid(lambda_min: f64, lambda_max: f64, points: usize) -> Result<Vec<f64>, CliError> {
    if !(lambda_min.is_finite() && lambda_max.is_finite() && lambda_min < lambda_max) {
        return Err(CliError::Usage(format!("need finite --min < --max, got {lambda_min} and {lambda_max}")));
    }
    if points < 2 {
        return Err(CliError::Usage(format!("--points must be at least 2, got {points}")));
    }
    let (r0, r1) = (signed_root(lambda_min), signed_root(lambda_max));
    let m = (points - 1) as f64;
    Ok((0..points)
        .map(|i| match i {
            0 => lambda_min,
            i if i == points - 1 => lambda_max,
            i => {
                let r = r0 + (r1 - r0) * i as f64 / m;
                r * r.abs()
            }
        })
        .collect())
}

pub fn cmd_scan(p: &ValidatedProblem, lambda_min: f64, lambda_max: f64, points: usize) -> Result<Outcome, CliError> {
    let grid = scan_grid(lambda_min, lambda_max, points)?;
    let mut body = String::new();
    writeln!(body, "{SCAN_HEADER}").unwrap();
    for l in grid {
        let data = propagate_solution(p, l)?;
        writeln!(body, "{},{},{}", fmt_f64(l), fmt_f64(data.omega(p.h())), fmt_f64(data.theta_b)).unwrap();
    }
    Ok(Outcome::ok(body))
}

#[derive(Debug, Serialize)]
struct TraceOutput<'a> {
    #[serde(flatten)]
    report: &'a TraceReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    splits_sensitivity: Option<Vec<SplitSensitivity>>,
}

pub fn cmd_trace(
    p: &ValidatedProblem,
    n_terms: usize,
    convention: TraceConvention,
    assert_tol: Option<f64>,
) -> Result<Outcome, CliError> {
    if n_terms < MIN_TRACE_TERMS {
        return Err(CliError::Usage(format!("trace needs n_terms >= {MIN_TRACE_TERMS}, got {n_terms}")));
    }
    if let Some(tol) = assert_tol {
        if !(tol >= 0.0) {
            return Err(CliError::Usage(format!("assert_tol must be non-negative, got {tol}")));
        }
    }
    let bundle = trace_bundle(p, n_terms)?;
    if let Some(r) = bundle.records.iter().find(|r| !r.certified) {
        return Err(CliError::Certification(format!("eigenvalue n = {} is not certified", r.n)));
    }
    let report = bundle.report(convention);
    let out = TraceOutput { report, splits_sensitivity: splits_sensitivity(p) };
    let mut body = serde_json::to_string_pretty(&out).expect("trace report serializes");
    body.push('\n');
    let warnings = report.warnings.iter().map(|w| serde_json::to_string(w).unwrap_or_default()).collect();
    let exit_code = match assert_tol {
        Some(tol) if !(report.deviation.abs() <= tol) => EXIT_ASSERT,
        _ => EXIT_OK,
    };
    Ok(Outcome { body, warnings, exit_code })
}

/// Eigenvalues compared against the q = 0 oracle.
pub const VERIFY_ORACLE_COUNT: usize = 50;
/// Eigenvalues compared across transmission scalars.
pub const VERIFY_INVARIANCE_COUNT: usize = 20;
pub const VERIFY_EIG_TOL: f64 = 1e-9;
pub const VERIFY_INVARIANCE_TOL: f64 = 1e-8;
pub const VERIFY_FACTORIZATION_TOL: f64 = 1e-8;
pub const VERIFY_ROUNDTRIP_TOL: f64 = 1e-8;
pub const VERIFY_CONVERSION_TOL: f64 = 1e-12;
pub const ROUNDTRIP_LAMBDAS: [f64; 4] = [-100.0, 1.0, 1e2, 1e4];
pub const TRANSMISSION_VARIANTS: [(f64, f64); 3] = [(1.0, 1.0), (-1.0, 2.0), (0.5, -4.0)];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    /// Hard checks decide the exit code.
    pub hard: bool,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, hard: bool, measured: f64, bound: f64, detail: String) -> Self {
        Check { name, hard, passed: measured <= bound, measured, bound, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifySummary {
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn rel_diff(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs().max(1.0)
}

fn check_qzero_oracle(p: &ValidatedProblem) -> Result<Check, CliError> {
    let free = p.with_polynomial(vec![vec![0.0]; 3])?;
    let shot = certified_spectrum(&free, VERIFY_ORACLE_COUNT)?;
    let oracle = oracle_eigs_qzero(p.length(), p.h(), VERIFY_ORACLE_COUNT)?;
    let (worst, n) = shot
        .records
        .iter()
        .zip(&oracle)
        .map(|(r, o)| (rel_diff(r.lambda, o.lambda), r.n))
        .fold((0.0, 0), |acc, x| if x.0 > acc.0 { x } else { acc });
    let detail = format!("q = 0 on this geometry, first {VERIFY_ORACLE_COUNT} eigenvalues, worst at n = {n}");
    Ok(Check::new("qzero_oracle", true, worst, VERIFY_EIG_TOL, detail))
}

fn check_factorization(p: &ValidatedProblem) -> Result<Check, CliError> {
    let grid: Vec<f64> = (0..100).map(|i| 0.1 + (100.0 - 0.1) * i as f64 / 99.0).collect();
    let worst = factorization_check(p, &grid)?;
    let detail = "max |gamma omega - omega(1,1)| / (1 + |omega(1,1)|), 100 points in [0.1, 100]".to_string();
    Ok(Check::new("factorization", true, worst, VERIFY_FACTORIZATION_TOL, detail))
}

fn check_transmission_invariance(p: &ValidatedProblem) -> Result<Check, CliError> {
    let base = certified_spectrum(p, VERIFY_INVARIANCE_COUNT)?.lambdas();
    let mut worst = 0.0f64;
    for (delta, gamma) in TRANSMISSION_VARIANTS {
        let other = certified_spectrum(&p.with_transmission(delta, gamma)?, VERIFY_INVARIANCE_COUNT)?.lambdas();
        for (x, y) in other.iter().zip(&base) {
            worst = worst.max(rel_diff(*x, *y));
        }
    }
    let detail = format!("first {VERIFY_INVARIANCE_COUNT} eigenvalues against (delta, gamma) in {TRANSMISSION_VARIANTS:?}");
    Ok(Check::new("transmission_invariance", true, worst, VERIFY_INVARIANCE_TOL, detail))
}

/// The hard check allows the double-precision floor of growing solutions;
/// the strict check holds every lambda to the plain bound and is reported only.
fn check_reverse_integration(p: &ValidatedProblem) -> Result<[Check; 2], CliError> {
    let trips = ROUNDTRIP_LAMBDAS.map(|l| reverse_roundtrip(p, l));
    let mut worst_ratio = 0.0f64;
    let mut worst_error = 0.0f64;
    let mut parts = Vec::new();
    for t in trips {
        let t = t?;
        let bound = VERIFY_ROUNDTRIP_TOL.max(t.roundoff_floor());
        worst_ratio = worst_ratio.max(t.error / bound);
        worst_error = worst_error.max(t.error);
        parts.push(format!("lambda {}: {:.3e} (bound {:.3e})", t.lambda, t.error, bound));
    }
    let hard = Check::new(
        "reverse_integration",
        true,
        worst_ratio,
        1.0,
        format!("error / max(1e-8, roundoff floor); {}", parts.join(", ")),
    );
    let strict = Check::new(
        "reverse_integration_strict",
        false,
        worst_error,
        VERIFY_ROUNDTRIP_TOL,
        format!("largest error over lambda in {ROUNDTRIP_LAMBDAS:?}"),
    );
    Ok([hard, strict])
}

fn check_conversion(p: &ValidatedProblem) -> Result<Check, CliError> {
    let bundle = trace_bundle(p, MIN_TRACE_TERMS)?;
    let gap = (bundle.conversion_difference - bundle.conversion_expected).abs();
    let detail = format!(
        "theorem - series31 = {} vs -(pi^2/(4L^2) + K) = {}",
        fmt_f64(bundle.conversion_difference),
        fmt_f64(bundle.conversion_expected)
    );
    Ok(Check::new("convention_conversion", true, gap, VERIFY_CONVERSION_TOL, detail))
}

pub fn run_checks(p: &ValidatedProblem) -> Result<VerifySummary, CliError> {
    let mut checks = vec![check_qzero_oracle(p)?, check_factorization(p)?, check_transmission_invariance(p)?];
    checks.extend(check_reverse_integration(p)?);
    checks.push(check_conversion(p)?);
    let passed = checks.iter().all(|c| c.passed || !c.hard);
    Ok(VerifySummary { passed, checks })
}

pub fn cmd_verify(p: &ValidatedProblem) -> Result<Outcome, CliError> {
    let summary = run_checks(p)?;
    let mut body = String::new();
    for c in &summary.checks {
        let verdict = match (c.passed, c.hard) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        writeln!(
            body,
            "{verdict} {} measured={:.3e} bound={:.3e} {}",
            c.name,
            c.measured,
            c.bound,
            if c.hard { "hard" } else { "report" }
        )
        .unwrap();
        writeln!(body, "    {}", c.detail).unwrap();
    }
    body.push_str(&serde_json::to_string_pretty(&summary).expect("summary serializes"));
    body.push('\n');
    let exit_code = if summary.passed { EXIT_OK } else { EXIT_SOLVE };
    Ok(Outcome { body, warnings: Vec::new(), exit_code })
}
