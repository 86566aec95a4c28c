#![allow(dead_code)]

use sltrace::{PotentialSpec, ProblemSpec, ValidatedProblem};

pub fn problem(c1: f64, c2: f64, delta: f64, gamma: f64, h: f64, q: PotentialSpec) -> ValidatedProblem {
    ProblemSpec::new(0.0, 1.0, c1, c2, delta, gamma, h, q).validate().unwrap()
}

/// P0 geometry: `[0, 1]`, splits 0.3 and 0.7, `delta = 2`, `gamma = 3`.
pub fn p0(h: f64, q: PotentialSpec) -> ValidatedProblem {
    problem(0.3, 0.7, 2.0, 3.0, h, q)
}

pub fn free(h: f64) -> ValidatedProblem {
    problem(0.3, 0.7, 1.0, 1.0, h, PotentialSpec::zero())
}

/// `|x - y| / |y|`, or `|x - y|` when `y = 0`.
pub fn rel_err(x: f64, y: f64) -> f64 {
    if y == 0.0 {
        (x - y).abs()
    } else {
        ((x - y) / y).abs()
    }
}
