//! TOML run configuration. See `configs/` for complete examples.
//!
//! ```toml
//! [problem]
//! a = 0.0
//! b = 1.0
//! c1 = 0.3
//! c2 = 0.7
//! delta = 2.0
//! gamma = 3.0
//! h = 0.0
//!
//! [potential]
//! mode = "polynomial"          # or "callable-table"
//! pieces = [[1.0], [1.0], [1.0]]
//! side_convention = "left"     # left | right | mean
//!
//! [solver]                     # optional
//! rel_tol = 1e-11
//!
//! [trace]                      # optional
//! n_terms = 2000
//! convention = "theorem"       # theorem | series31
//! ```
//!
//! In `callable-table` mode `pieces` is replaced by three `[[potential.tables]]`
//! entries with sample arrays `x` and `q`, interpolated by natural cubic splines.

use std::path::Path;

use serde::Deserialize;
use sltrace::{
    CallablePotential, IntegratorKind, PotentialSpec, ProblemSpec, SideConvention, SolverSettings, ValidatedProblem,
};
use sltrace::trace::TraceConvention;

use crate::CliError;

pub const DEFAULT_TRACE_TERMS: usize = 2000;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub potential: PotentialSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub trace: TraceSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    pub delta: f64,
    pub gamma: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialMode {
    #[default]
    Polynomial,
    CallableTable,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleTable {
    pub x: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    #[serde(default)]
    pub mode: PotentialMode,
    pub pieces: Option<Vec<Vec<f64>>>,
    pub tables: Option<Vec<SampleTable>>,
    #[serde(default)]
    pub side_convention: SideConvention,
    pub degree_cap: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub scan_refinement_max: u32,
    pub lambda_min_override: Option<f64>,
    pub integrator: IntegratorKind,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverSettings::default();
        SolverSection {
            rel_tol: s.rel_tol,
            abs_tol: s.abs_tol,
            scan_refinement_max: s.scan_refinement_max,
            lambda_min_override: s.lambda_min_override,
            integrator: s.integrator,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceSection {
    pub n_terms: usize,
    pub convention: TraceConvention,
    pub assert_tol: Option<f64>,
}

impl Default for TraceSection {
    fn default() -> Self {
        TraceSection { n_terms: DEFAULT_TRACE_TERMS, convention: TraceConvention::default(), assert_tol: None }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn potential_spec(&self) -> Result<PotentialSpec, CliError> {
        let pot = &self.potential;
        match pot.mode {
            PotentialMode::Polynomial => {
                if pot.tables.is_some() {
                    return Err(CliError::Config("potential.tables is only valid with mode = \"callable-table\"".into()));
                }
                let pieces = pot
                    .pieces
                    .clone()
                    .ok_or_else(|| CliError::Config("potential.pieces is required in polynomial mode".into()))?;
                Ok(PotentialSpec::Polynomial(pieces))
            }
            PotentialMode::CallableTable => {
                if pot.pieces.is_some() {
                    return Err(CliError::Config("potential.pieces is only valid with mode = \"polynomial\"".into()));
                }
                let tables = pot
                    .tables
                    .clone()
                    .ok_or_else(|| CliError::Config("potential.tables is required in callable-table mode".into()))?;
                let tables: [SampleTable; 3] = tables.try_into().map_err(|t: Vec<SampleTable>| {
                    CliError::Config(format!("potential.tables needs exactly 3 entries, got {}", t.len()))
                })?;
                let tables = tables.map(|t| (t.x, t.q));
                CallablePotential::from_tables(tables)
                    .map(PotentialSpec::Callable)
                    .map_err(|e| CliError::Config(format!("potential.tables: {e}")))
            }
        }
    }

    pub fn solver_settings(&self) -> SolverSettings {
        let s = &self.solver;
        SolverSettings {
            rel_tol: s.rel_tol,
            abs_tol: s.abs_tol,
            integrator: s.integrator,
            scan_refinement_max: s.scan_refinement_max,
            lambda_min_override: s.lambda_min_override,
        }
    }

    /// Builds and validates the problem. Every failure is a config error.
    pub fn problem(&self) -> Result<ValidatedProblem, CliError> {
        let s = &self.solver;
        if !(s.rel_tol > 0.0 && s.rel_tol.is_finite()) {
            return Err(CliError::Config(format!("solver.rel_tol must be positive, got {}", s.rel_tol)));
        }
        if !(s.abs_tol > 0.0 && s.abs_tol.is_finite()) {
            return Err(CliError::Config(format!("solver.abs_tol must be positive, got {}", s.abs_tol)));
        }
        let pr = &self.problem;
        let mut spec = ProblemSpec::new(pr.a, pr.b, pr.c1, pr.c2, pr.delta, pr.gamma, pr.h, self.potential_spec()?);
        spec.sides = self.potential.side_convention;
        spec.solver = self.solver_settings();
        if let Some(cap) = self.potential.degree_cap {
            spec.degree_cap = cap;
        }
        spec.validate().map_err(|e| CliError::Config(e.to_string()))
    }
}
