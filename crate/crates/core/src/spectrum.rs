//! Eigenvalue location: sign-change scan, bracketed refinement, and index
//! certification by the Prüfer phase count.

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{eig_asymptotic, loglog_slope};
use crate::error::{Error, Result};
use crate::problem::ValidatedProblem;
use crate::shooting::{propagate_solution, BoundaryData};

/// Number of uniform points on the negative part of the scan range.
pub const NEGATIVE_SCAN_POINTS: usize = 200;
/// Scan step in `s = sqrt(lambda)` is `pi / (SCAN_DIVISIONS * (b - a))`.
pub const SCAN_DIVISIONS: f64 = 8.0;
/// Default relative root tolerance, `|d lambda| <= tol (1 + |lambda|)`.
pub const DEFAULT_ROOT_TOL: f64 = 1e-14;
/// Roots whose normalized slope falls below this are flagged as possibly multiple.
pub const MULTIPLICITY_SLOPE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenvalueRecord {
    pub n: usize,
    pub lambda: f64,
    /// `sqrt(lambda)`, or `-sqrt(-lambda)` for negative eigenvalues.
    pub s: f64,
    /// `|omega(lambda)|` in rescaled units.
    pub residual: f64,
    pub bracket: (f64, f64),
    pub certified: bool,
}

impl EigenvalueRecord {
    fn signed_root(lambda: f64) -> f64 {
        if lambda >= 0.0 {
            lambda.sqrt()
        } else {
            -(-lambda).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumWarning {
    /// `|d omega / d s|` (normalized) is tiny at the root.
    Multiplicity { n: usize, lambda: f64, slope: f64 },
    /// The phase at `b` decreased between two scan points.
    PhaseNonMonotone { lambda_lo: f64, lambda_hi: f64 },
    /// The phase count does not confirm the index of a record.
    Certification { n: usize, detail: String },
}

/// One sign change of the characteristic function, with the shots at its ends.
#[derive(Debug, Clone, Copy)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    lo_data: BoundaryData,
    hi_data: BoundaryData,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub brackets: Vec<Bracket>,
    /// Eigenvalues below `lambda_min` by phase count.
    pub count_below_min: usize,
    /// Eigenvalues below `lambda_max` by phase count.
    pub count_below_max: usize,
    pub grid_points: usize,
    pub refinements: u32,
    pub warnings: Vec<SpectrumWarning>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub records: Vec<EigenvalueRecord>,
    pub warnings: Vec<SpectrumWarning>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub grid_points: usize,
    pub refinements: u32,
}

impl Spectrum {
    pub fn all_certified(&self) -> bool {
        self.records.iter().all(|r| r.certified)
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lambda).collect()
    }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn scan_grid(p: &ValidatedProblem, lo: f64, hi: f64, level: u32) -> Vec<f64> {
    let factor = 2f64.powi(level as i32);
    let mut grid = Vec::new();
    if lo < 0.0 {
        let top = hi.min(0.0);
        let m = ((NEGATIVE_SCAN_POINTS - 1) as f64 * factor) as usize;
        for i in 0..=m {
            grid.push(lo + (top - lo) * i as f64 / m as f64);
        }
    }
    if hi > 0.0 {
        let s_lo = lo.max(0.0).sqrt();
        let s_hi = hi.sqrt();
        let ds = std::f64::consts::PI / (SCAN_DIVISIONS * p.length() * factor);
        let m = ((s_hi - s_lo) / ds).ceil().max(1.0) as usize;
        for i in 0..=m {
            let s = if i == m { s_hi } else { s_lo + ds * i as f64 };
            let l = if i == m { hi } else if i == 0 { lo.max(0.0) } else { s * s };
            grid.push(l);
        }
    }
    grid.dedup();
    grid
}

fn shoot_all(p: &ValidatedProblem, grid: &[f64]) -> Result<Vec<BoundaryData>> {
    grid.par_iter().map(|&l| propagate_solution(p, l)).collect()
}

/// All sign-change brackets of `omega` on `[lambda_min, lambda_max]`, with
/// the grid refined until their number matches the phase count.
pub fn scan_sign_changes(p: &ValidatedProblem, lambda_min: f64, lambda_max: f64) -> Result<ScanResult> {
    if !(lambda_min < lambda_max) || !lambda_min.is_finite() || !lambda_max.is_finite() {
        return Err(Error::Range { detail: format!("need lambda_min < lambda_max, got [{lambda_min}, {lambda_max}]") });
    }
    let h = p.h();
    let max_level = p.solver().scan_refinement_max;
    let mut level = 0;
    loop {
        let grid = scan_grid(p, lambda_min, lambda_max, level);
        let shots = shoot_all(p, &grid)?;
        let signs: Vec<i8> = shots.iter().map(|b| sign(b.omega_scaled(h))).collect();
        let mut warnings = Vec::new();
        for i in 0..grid.len() - 1 {
            if shots[i + 1].index_phase(h) < shots[i].index_phase(h) - 1e-9 {
                warnings.push(SpectrumWarning::PhaseNonMonotone { lambda_lo: grid[i], lambda_hi: grid[i + 1] });
            }
        }
        let mut brackets = Vec::new();
        let last = grid.len() - 1;
        for i in 0..=last {
            if signs[i] == 0 {
                // A grid point that is an exact root: bracket it by its neighbours.
                let (l, r) = (i.saturating_sub(1), (i + 1).min(last));
                let (l, r) = if signs[l] * signs[r] < 0 { (l, r) } else { (i, i) };
                brackets.push(Bracket { lo: grid[l], hi: grid[r], lo_data: shots[l], hi_data: shots[r] });
            } else if i < last && signs[i] * signs[i + 1] < 0 {
                brackets.push(Bracket { lo: grid[i], hi: grid[i + 1], lo_data: shots[i], hi_data: shots[i + 1] });
            }
        }
        let count_below_min = shots[0].count_below(h);
        let count_below_max = shots[last].count_below(h);
        let at_max = usize::from(signs[last] == 0);
        let counted = count_below_max + at_max - count_below_min;
        if brackets.len() == counted && warnings.is_empty() {
            return Ok(ScanResult {
                brackets,
                count_below_min,
                count_below_max,
                grid_points: grid.len(),
                refinements: level,
                warnings,
            });
        }
        if level >= max_level {
            if brackets.len() == counted {
                // Counts agree but the phase wobbled: surface it and carry on.
                return Ok(ScanResult {
                    brackets,
                    count_below_min,
                    count_below_max,
                    grid_points: grid.len(),
                    refinements: level,
                    warnings,
                });
            }
            return Err(Error::BudgetExceeded { lambda_min, lambda_max, brackets: brackets.len(), counted });
        }
        level += 1;
    }
}

/// Outcome of the bracketed root search.
struct BrentOutcome {
    root: f64,
    /// A bracket pair of reasonable width, for a slope estimate.
    slope_pair: ((f64, f64), (f64, f64)),
    data: BoundaryData,
}

/// Brent's method on the normalized characteristic function.
fn brent(p: &ValidatedProblem, lo: Bracket, xtol_rel: f64) -> Result<BrentOutcome> {
    let h = p.h();
    let f = |l: f64| -> Result<(f64, BoundaryData)> {
        let bd = propagate_solution(p, l)?;
        Ok((bd.omega_normalized(h), bd))
    };
    let (mut a, mut b) = (lo.lo, lo.hi);
    let (mut fa, mut fb) = (lo.lo_data.omega_normalized(h), lo.hi_data.omega_normalized(h));
    let mut data_b = lo.hi_data;
    if fa == 0.0 {
        return Ok(BrentOutcome { root: a, slope_pair: ((a, fa), (b, fb)), data: lo.lo_data });
    }
    if fb == 0.0 {
        return Ok(BrentOutcome { root: b, slope_pair: ((a, fa), (b, fb)), data: lo.hi_data });
    }
    let slope_width = 1e-9 * (1.0 + a.abs().max(b.abs()));
    let mut pair = ((a, fa), (b, fb));
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        if (c - b).abs() >= slope_width {
            pair = ((b, fb), (c, fc));
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol_rel * (1.0 + b.abs());
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(BrentOutcome { root: b, slope_pair: pair, data: data_b });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut pp, mut qq);
            if a == c {
                pp = 2.0 * m * s;
                qq = 1.0 - s;
            } else {
                let q0 = fa / fc;
                let r = fb / fc;
                pp = s * (2.0 * m * q0 * (q0 - r) - (b - a) * (r - 1.0));
                qq = (q0 - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if pp > 0.0 {
                qq = -qq;
            } else {
                pp = -pp;
            }
            if 2.0 * pp < (3.0 * m * qq - (tol * qq).abs()).min((e * qq).abs()) {
                e = d;
                d = pp / qq;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        let (fnew, data) = f(b)?;
        fb = fnew;
        data_b = data;
    }
    Err(Error::ToleranceFailure { x: p.b(), lambda: b })
}

fn refine_bracket(p: &ValidatedProblem, br: Bracket, tol: f64) -> Result<(f64, BoundaryData, f64)> {
    let out = brent(p, br, tol)?;
    let ((x0, f0), (x1, f1)) = out.slope_pair;
    let mut slope = if x1 != x0 { (f1 - f0) / (x1 - x0) } else { f64::NAN };
    if !slope.is_finite() || (x1 - x0).abs() < 1e-9 * (1.0 + out.root.abs()) {
        let step = 1e-7 * (1.0 + out.root.abs());
        let up = propagate_solution(p, out.root + step)?.omega_normalized(p.h());
        let dn = propagate_solution(p, out.root - step)?.omega_normalized(p.h());
        slope = (up - dn) / (2.0 * step);
    }
    // Slope with respect to the phase scale, so that it is O(L) for a simple root.
    let normalized = slope * 2.0 * out.data.sigma;
    Ok((out.root, out.data, normalized))
}

/// Localizes the root of `omega` in `[lo, hi]` to `|d lambda| <= tol (1 + |lambda|)`.
pub fn refine_root(p: &ValidatedProblem, bracket: (f64, f64), tol: f64) -> Result<EigenvalueRecord> {
    let (lo, hi) = bracket;
    if !(lo <= hi) {
        return Err(Error::Range { detail: format!("bracket ({lo}, {hi}) is reversed") });
    }
    let h = p.h();
    let lo_data = propagate_solution(p, lo)?;
    let hi_data = propagate_solution(p, hi)?;
    let (fl, fh) = (lo_data.omega_scaled(h), hi_data.omega_scaled(h));
    if fl != 0.0 && fh != 0.0 && (fl > 0.0) == (fh > 0.0) {
        return Err(Error::NoSignChange { lo, hi });
    }
    let (lambda, data, _) = refine_bracket(p, Bracket { lo, hi, lo_data, hi_data }, tol)?;
    let n = data.index_phase(h).round().max(0.0) as usize;
    let certified = lo_data.count_below(h) == n && (lo == hi || hi_data.count_below(h) == n + 1);
    Ok(EigenvalueRecord {
        n,
        lambda,
        s: EigenvalueRecord::signed_root(lambda),
        residual: data.omega_scaled(h).abs(),
        bracket,
        certified,
    })
}

/// Default lower scan bound `-(sup|q| + |h| + 1)^2`.
pub fn default_lambda_min(p: &ValidatedProblem) -> f64 {
    -(p.q_sup_bound() + p.h().abs() + 1.0).powi(2)
}

/// The lowest `count` eigenvalues, indexed from 0.
pub fn compute_spectrum(p: &ValidatedProblem, count: usize, tol: f64) -> Result<Spectrum> {
    if count == 0 {
        return Err(Error::Range { detail: "count must be at least 1".into() });
    }
    let h = p.h();
    let mut lambda_min = p.solver().lambda_min_override.unwrap_or_else(|| default_lambda_min(p));
    for _ in 0..64 {
        if propagate_solution(p, lambda_min)?.count_below(h) == 0 {
            break;
        }
        lambda_min = 4.0 * lambda_min - 1.0;
    }
    let mut lambda_max = eig_asymptotic(p, count as i64 + 2)?.lambda.max(lambda_min + 1.0);
    for _ in 0..64 {
        if propagate_solution(p, lambda_max)?.count_below(h) >= count {
            break;
        }
        lambda_max = 2.0 * lambda_max.abs() + 1.0;
    }
    let scan = scan_sign_changes(p, lambda_min, lambda_max)?;
    let mut warnings = scan.warnings.clone();
    if scan.count_below_min != 0 {
        warnings.push(SpectrumWarning::Certification {
            n: 0,
            detail: format!("{} eigenvalues lie below the scan floor {lambda_min}", scan.count_below_min),
        });
    }
    if scan.brackets.len() < count {
        return Err(Error::BudgetExceeded {
            lambda_min,
            lambda_max,
            brackets: scan.brackets.len(),
            counted: count,
        });
    }
    let base = scan.count_below_min;
    let refined: Vec<Result<(EigenvalueRecord, Vec<SpectrumWarning>)>> = scan.brackets[..count]
        .par_iter()
        .enumerate()
        .map(|(i, br)| {
            let n = base + i;
            let (lambda, data, slope) = refine_bracket(p, *br, tol)?;
            let mut w = Vec::new();
            let certified = if br.lo == br.hi {
                data.count_below(h) == n && (data.index_phase(h) - n as f64).abs() < 1e-6
            } else {
                br.lo_data.count_below(h) == n && br.hi_data.count_below(h) == n + 1
            };
            if !certified {
                w.push(SpectrumWarning::Certification {
                    n,
                    detail: format!(
                        "phase counts {} and {} at the bracket ends ({}, {})",
                        br.lo_data.count_below(h),
                        br.hi_data.count_below(h),
                        br.lo,
                        br.hi
                    ),
                });
            }
            if slope.abs() < MULTIPLICITY_SLOPE * p.length() {
                w.push(SpectrumWarning::Multiplicity { n, lambda, slope });
            }
            let record = EigenvalueRecord {
                n,
                lambda,
                s: EigenvalueRecord::signed_root(lambda),
                residual: data.omega_scaled(h).abs(),
                bracket: (br.lo, br.hi),
                certified,
            };
            Ok((record, w))
        })
        .collect();
    let mut records = Vec::with_capacity(count);
    for r in refined {
        let (rec, w) = r?;
        records.push(rec);
        warnings.extend(w);
    }
    for w in records.windows(2) {
        if !(w[1].lambda > w[0].lambda) {
            warnings.push(SpectrumWarning::Certification {
                n: w[1].n,
                detail: format!("eigenvalues not strictly increasing: {} then {}", w[0].lambda, w[1].lambda),
            });
        }
    }
    Ok(Spectrum {
        records,
        warnings,
        lambda_min,
        lambda_max,
        grid_points: scan.grid_points,
        refinements: scan.refinements,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticResiduals {
    /// `(n, lambda_n - lambda_asym(n))`.
    pub deviations: Vec<(usize, f64)>,
    /// Slope of `ln |deviation|` against `ln n` over the top half of indices (`n >= 1`).
    pub decay_exponent: Option<f64>,
}

/// Deviations of the records from the two-term eigenvalue asymptotics.
pub fn asymptotic_residuals(records: &[EigenvalueRecord], p: &ValidatedProblem) -> Result<AsymptoticResiduals> {
    let deviations = records
        .iter()
        .map(|r| Ok((r.n, r.lambda - eig_asymptotic(p, r.n as i64)?.lambda)))
        .collect::<Result<Vec<_>>>()?;
    let usable: Vec<(f64, f64)> = deviations
        .iter()
        .filter(|(n, _)| *n >= 1)
        .map(|&(n, d)| (n as f64, d.abs()))
        .collect();
    let half = usable.len() / 2;
    let decay_exponent = loglog_slope(&usable[half..]);
    Ok(AsymptoticResiduals { deviations, decay_exponent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;
    use crate::problem::ProblemSpec;
    use approx::assert_relative_eq;

    fn free(h: f64, delta: f64, gamma: f64) -> ValidatedProblem {
        ProblemSpec::new(0.0, 1.0, 0.3, 0.7, delta, gamma, h, PotentialSpec::zero()).validate().unwrap()
    }

    #[test]
    fn scan_finds_free_brackets() {
        let p = free(0.0, 1.0, 1.0);
        let scan = scan_sign_changes(&p, -1.0, 30.0).unwrap();
        assert_eq!(scan.brackets.len(), 3);
        let targets = [0.0, 4.115858, 24.139342];
        for (b, t) in scan.brackets.iter().zip(targets) {
            assert!(b.lo <= t && t <= b.hi, "{} {} {}", b.lo, t, b.hi);
        }
        let p = free(-10.0, 1.0, 1.0);
        let scan = scan_sign_changes(&p, -100.0, 1.0).unwrap();
        assert!(scan.brackets.iter().any(|b| b.lo <= -7.33 && -7.33 <= b.hi));
        assert!(matches!(scan_sign_changes(&p, 2.0, 2.0), Err(Error::Range { .. })));
    }

    #[test]
    fn refine_examples() {
        let p = free(0.0, 1.0, 1.0);
        let r = refine_root(&p, (3.9, 4.3), 1e-14).unwrap();
        assert_relative_eq!(r.lambda, 4.115858365694523, max_relative = 1e-12);
        assert_relative_eq!(r.s, 2.028757838110434, max_relative = 1e-12);
        assert_eq!(r.n, 1);
        assert!(r.certified);
        let r = refine_root(&p, (-0.5, 0.5), 1e-14).unwrap();
        assert!(r.lambda.abs() <= 1e-10);
        assert_eq!(r.n, 0);
        assert!(matches!(refine_root(&p, (5.0, 6.0), 1e-14), Err(Error::NoSignChange { .. })));
    }

    #[test]
    fn free_spectrum_and_scaling() {
        let expected = [0.0, 4.115858365694523, 24.139342030445557];
        let s = compute_spectrum(&free(0.0, 1.0, 1.0), 3, DEFAULT_ROOT_TOL).unwrap();
        let t = compute_spectrum(&free(0.0, 2.0, 3.0), 3, DEFAULT_ROOT_TOL).unwrap();
        assert!(s.all_certified() && t.all_certified());
        for i in 0..3 {
            assert_eq!(s.records[i].n, i);
            assert_relative_eq!(s.records[i].lambda, expected[i], max_relative = 1e-12, epsilon = 1e-12);
            assert_relative_eq!(s.records[i].lambda, t.records[i].lambda, epsilon = 1e-8);
        }
        let neg = compute_spectrum(&free(-10.0, 1.0, 1.0), 1, DEFAULT_ROOT_TOL).unwrap();
        assert_relative_eq!(neg.records[0].lambda, -7.318752178188588, max_relative = 1e-10);
        assert!(neg.records[0].s < 0.0);
        assert!(compute_spectrum(&free(0.0, 1.0, 1.0), 0, DEFAULT_ROOT_TOL).is_err());
    }

    #[test]
    fn residual_examples() {
        let p = free(0.0, 1.0, 1.0);
        let s = compute_spectrum(&p, 5, DEFAULT_ROOT_TOL).unwrap();
        let res = asymptotic_residuals(&s.records, &p).unwrap();
        assert_relative_eq!(res.deviations[0].1, -(std::f64::consts::PI.powi(2) / 4.0 + 2.0), epsilon = 1e-9);
        assert_relative_eq!(res.deviations[4].1, -0.013492151424097258, epsilon = 1e-10);
    }
}
