use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::parse::{parse_system, RunConfig};
use crate::poly::Polynomial;
use crate::sdp::{BuiltinIpm, SolveOptions};
use crate::sos::{solve_program, ProgramStatus};

use super::*;

fn cfg_1d() -> RunConfig<f64> {
    RunConfig { deg_vn: 2, deg_r: 2, gamma_hi: 10.0, bisect_tol: 1e-3, ..RunConfig::default() }
}

fn x_squared() -> Polynomial<f64> {
    let x = Polynomial::<f64>::variable(1, 0);
    &x * &x
}

fn solve_feasibility(prog: &crate::sos::SosProgram<f64>) -> ProgramStatus {
    solve_program(prog, &BuiltinIpm, &SolveOptions::default()).unwrap().status
}

#[test]
fn step1_linear_contraction_feasible() {
    let sys = parse_system::<f64>("vars: x1\ndot x1 = -x1\n").unwrap();
    let prog = step1_conditions(&sys, &x_squared(), 1.0, &cfg_1d());
    assert_eq!(solve_feasibility(&prog), ProgramStatus::Optimal);
}

#[test]
fn step1_unstable_origin_infeasible() {
    let sys = parse_system::<f64>("vars: x1\ndot x1 = x1\n").unwrap();
    for gamma in [0.1, 1.0, 5.0] {
        let prog = step1_conditions(&sys, &x_squared(), gamma, &cfg_1d());
        assert_eq!(solve_feasibility(&prog), ProgramStatus::Infeasible);
    }
}

#[test]
fn step1_gamma_search_hits_upper_bound_on_global_contraction() {
    let sys = parse_system::<f64>("vars: x1\ndot x1 = -x1\n").unwrap();
    let mut cfg = cfg_1d();
    cfg.gamma_lo = 1.0;
    cfg.gamma_hi = 100.0;
    let s1 = step1_maximize_gamma(&sys, &x_squared(), &cfg, &BuiltinIpm).unwrap();
    assert_eq!(s1.gamma, 100.0);
}

#[test]
fn step1_gamma_search_finds_invariance_threshold() {
    // xdot = -x + x^3 with R = x^2: E(R, gamma) is invariant iff gamma < 1.
    let sys = parse_system::<f64>("vars: x1\ndot x1 = -x1 + x1^3\n").unwrap();
    let mut cfg = cfg_1d();
    cfg.gamma_lo = 0.25;
    let s1 = step1_maximize_gamma(&sys, &x_squared(), &cfg, &BuiltinIpm).unwrap();
    assert!(
        s1.gamma >= 0.99 && s1.gamma <= 1.0,
        "gamma* = {} outside [0.99, 1]",
        s1.gamma
    );
}

#[test]
fn step1_errors_when_gamma_lo_infeasible() {
    let sys = parse_system::<f64>("vars: x1\ndot x1 = -x1 + x1^3\n").unwrap();
    let mut cfg = cfg_1d();
    cfg.gamma_lo = 2.0; // beyond the invariance threshold
    let err = step1_maximize_gamma(&sys, &x_squared(), &cfg, &BuiltinIpm).unwrap_err();
    assert!(matches!(err, RoaError::InfeasibleAtGammaLo { .. }));
}

#[test]
fn step2_identity_update_on_linear_contraction() {
    let sys = parse_system::<f64>("vars: x1\ndot x1 = -x1\n").unwrap();
    let mut cfg = cfg_1d();
    cfg.gamma_lo = 1.0;
    cfg.gamma_hi = 4.0;
    let s1 = step1_maximize_gamma(&sys, &x_squared(), &cfg, &BuiltinIpm).unwrap();
    assert_eq!(s1.gamma, 4.0);
    let out = step2_update_r(&sys, &x_squared(), &s1, &cfg, &BuiltinIpm).unwrap();
    match out {
        Step2Outcome::Updated { gamma_new, r_new, link, .. } => {
            assert!(gamma_new >= s1.gamma);
            // Containment sampling oracle: R_hat(z) <= gamma* implies
            // R_new(z) <= gamma_new.
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let mut checked = 0;
            while checked < 500 {
                let z = [rng.gen_range(-3.0..3.0)];
                if z[0] * z[0] <= s1.gamma {
                    assert!(r_new.evaluate(&z) <= gamma_new + 1e-7);
                    checked += 1;
                }
            }
            // The stored identity re-expands to the Gram certificate.
            let expr = reexpand_containment(&link);
            let expanded = link.cond.to_poly(1);
            assert!(expr.approx_eq(&expanded, 1e-6));
            assert!(crate::linalg::min_eig(&link.cond.grams[0].q) >= -1e-7);
        }
        Step2Outcome::FixedPoint { .. } => panic!("expected an update"),
    }
}

#[test]
fn algorithm3_on_linear_contraction_reaches_gamma_hi() {
    let sys = parse_system::<f64>("vars: x1\ndot x1 = -x1\n").unwrap();
    let mut cfg = cfg_1d();
    cfg.gamma_hi = 16.0;
    cfg.max_outer_iters = 4;
    let run = algorithm3(&sys, &cfg, &BuiltinIpm).unwrap();
    let last = run.last();
    assert!(last.gamma >= 16.0 * (1.0 - 2e-3));
    // gamma trace is non-decreasing.
    for w in run.gamma_trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-12);
    }
}

#[test]
fn algorithm3_monotone_on_cubic_toy() {
    let sys = parse_system::<f64>("vars: x1\ndot x1 = -x1 + x1^3\n").unwrap();
    let mut cfg = cfg_1d();
    cfg.max_outer_iters = 4;
    let run = algorithm3(&sys, &cfg, &BuiltinIpm).unwrap();
    for w in run.gamma_trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-12);
    }
    // Every link's m3 Gram is PSD and the identity re-expands.
    for cert in &run.certificates {
        for link in &cert.m3_chain {
            for g in &link.cond.grams {
                assert!(crate::linalg::min_eig(&g.q) >= -1e-7);
            }
            let expr = reexpand_containment(link);
            assert!(expr.approx_eq(&link.cond.to_poly(1), 1e-6));
        }
    }
}

#[test]
fn remark7_degeneration_matches_general_conditions() {
    // Classical level-set method (R = V_N fixed) and the general Step-1
    // conditions agree on feasibility across gamma in {0.5, 0.9, 1.1}.
    let sys = parse_system::<f64>("vars: x1\ndot x1 = -x1 + x1^3\n").unwrap();
    let v = x_squared();
    let cfg = cfg_1d();
    let expected = [
        (0.5, ProgramStatus::Optimal),
        (0.9, ProgramStatus::Optimal),
        (1.1, ProgramStatus::Infeasible),
    ];
    for (gamma, want) in expected {
        let (classical, _) = remark7_conditions(&sys, &v, gamma, &cfg);
        let general = step1_conditions(&sys, &v, gamma, &cfg);
        let got_classical = solve_feasibility(&classical);
        let got_general = solve_feasibility(&general);
        assert_eq!(got_classical, want, "classical at gamma = {}", gamma);
        assert_eq!(got_general, want, "general at gamma = {}", gamma);
    }
}

#[test]
fn rational_recovery_on_linear_contraction() {
    let sys = parse_system::<f64>("vars: x1\ndot x1 = -x1\n").unwrap();
    let mut cfg = cfg_1d();
    cfg.gamma_lo = 0.5;
    cfg.gamma_hi = 1.0;
    let r = x_squared();
    let s1 = step1_maximize_gamma(&sys, &r, &cfg, &BuiltinIpm).unwrap();
    let out = recover_rational_lf(&sys, &r, s1.gamma, &s1.p, &cfg, &BuiltinIpm).unwrap();
    match out {
        RationalOutcome::Found { v_n, m2, .. } => {
            assert!(!v_n.is_zero());
            assert!(m2.gram.is_some() || m2.poly.is_zero());
        }
        other => panic!("expected a rational certificate, got {:?}", other),
    }
}

#[test]
fn piecewise_single_piece_reduces_to_step1() {
    let sys = parse_system::<f64>("vars: x1\ndot x1 = -x1 + x1^3\n").unwrap();
    let cfg = cfg_1d();
    let cert = piecewise_era(&sys, &[x_squared()], &cfg, &BuiltinIpm).unwrap();
    assert!(cert.gamma >= 0.99 && cert.gamma <= 1.0, "gamma = {}", cert.gamma);
    assert!(!cert.set.is_piecewise());
}

#[test]
fn certificate_json_round_trip() {
    let sys = parse_system::<f64>("vars: x1\ndot x1 = -x1 + x1^3\n").unwrap();
    let mut cfg = cfg_1d();
    cfg.max_outer_iters = 2;
    let run = algorithm3(&sys, &cfg, &BuiltinIpm).unwrap();
    let mut cert = run.certificates.last().unwrap().clone();
    // Attach a rational part so the optional field is exercised.
    let r = cert.set.pieces()[0].clone();
    if let Ok(out) = recover_rational_lf(&sys, &r, cert.gamma, &cert.mults[0].p, &cfg, &BuiltinIpm)
    {
        apply_rational(&mut cert, out);
    }
    let text = cert::to_json_string(&cert);
    let back = cert::from_json_str(&text).unwrap();
    assert_eq!(back.gamma, cert.gamma);
    assert!(back.v_n.approx_eq(&cert.v_n, 0.0));
    assert_eq!(back.m3_chain.len(), cert.m3_chain.len());
    let text2 = cert::to_json_string(&back);
    assert_eq!(text, text2, "byte-identical round trip");
}

#[test]
fn containment_prover_on_nested_circles() {
    let r_small = x_squared();
    let r_big = x_squared().scale(0.5);
    let cfg = cfg_1d();
    // E(x^2, 1) = [-1,1] inside E(x^2/2, 1) = [-sqrt 2, sqrt 2].
    let link = prove_containment(&r_small, 1.0, &r_big, 1.0, &cfg, &BuiltinIpm)
        .unwrap()
        .expect("containment holds");
    let expr = reexpand_containment(&link);
    assert!(expr.approx_eq(&link.cond.to_poly(1), 1e-6));
    // The reverse containment must fail.
    let rev = prove_containment(&r_big, 1.0, &r_small, 1.0, &cfg, &BuiltinIpm).unwrap();
    assert!(rev.is_none());
}
