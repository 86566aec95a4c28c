mod common;

use common::{free, rel_err};
use sltrace::asymptotics::{mu, omega_asymptotic};
use sltrace::reference::{oracle_eigs_qzero, oracle_omega_qzero};
use sltrace::shooting::char_function;
use sltrace::spectrum::{compute_spectrum, DEFAULT_ROOT_TOL};

#[test]
fn first_fifty_match_oracle() {
    for h in [0.0, 1.0, -10.0, 5.0] {
        let p = free(h);
        let shot = compute_spectrum(&p, 50, DEFAULT_ROOT_TOL).unwrap();
        let oracle = oracle_eigs_qzero(1.0, h, 50).unwrap();
        assert!(shot.all_certified());
        for (r, o) in shot.records.iter().zip(&oracle) {
            assert_eq!(r.n, o.n);
            assert!(rel_err(r.lambda, o.lambda) <= 1e-9, "h = {h}: {r:?} vs {o:?}");
        }
    }
}

#[test]
fn negative_eigenvalue_for_large_negative_shift() {
    let shot = compute_spectrum(&free(-10.0), 2, DEFAULT_ROOT_TOL).unwrap();
    assert!((shot.records[0].lambda - -7.318752178188588).abs() <= 1e-12);
    assert!(shot.records[1].lambda > 0.0);
}

#[test]
fn char_function_matches_closed_form() {
    for &gamma in &[1.0, 3.0, -0.5] {
        let p = common::problem(0.3, 0.7, 2.0, gamma, 0.7, sltrace::PotentialSpec::zero());
        for i in 0..200 {
            let l = 0.1 * (1e5f64).powf(i as f64 / 199.0);
            let s = l.sqrt();
            let exact = oracle_omega_qzero(1.0, gamma, 0.7, l);
            let scale = ((l - 0.7).abs() + s) / gamma.abs();
            let shot = char_function(&p, l).unwrap();
            assert!((shot - exact).abs() <= 1e-9 * scale, "lambda {l}: {shot} vs {exact}");
        }
    }
}

#[test]
fn asymptotic_omega_is_exact_without_potential() {
    let p = free(0.0);
    for n in 1..60 {
        let s = mu(&p, n) + 0.37;
        let exact = oracle_omega_qzero(1.0, 1.0, 0.0, s * s);
        let asym = omega_asymptotic(&p, s).unwrap();
        assert!((asym - exact).abs() <= 1e-12 * (s * s), "s = {s}: {asym} vs {exact}");
    }
}

#[test]
fn deviation_constant_for_free_problem() {
    // mpmath: (lambda_200 - mu_200^2 - 2) (199.5)^2 for tan s = -s.
    let shot = compute_spectrum(&free(0.0), 201, DEFAULT_ROOT_TOL).unwrap();
    let r = &shot.records[200];
    let m = mu(&free(0.0), 200);
    let c = (r.lambda - m * m - 2.0) * 199.5f64.powi(2);
    assert!((c - -0.16886750448784008).abs() <= 1e-3, "{c}");
}
