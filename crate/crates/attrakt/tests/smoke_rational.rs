//! Scratch diagnosis of rational recovery on Example 1 (removed later).

use attrakt::parse::{parse_system, RunConfig};
use attrakt::roa::{algorithm3, reexpand_conditions};
use attrakt::sdp::{BuiltinIpm, SolveOptions};
use attrakt::poly::Polynomial;
use attrakt::sos::{monomial_basis, solve_program, ProgramStatus, SosExpr, SosProgram};

const EX1: &str = "\
vars: x1 x2
dot x1 = -0.42*x1 - 1.05*x2 - 2.3*x1^2 - 0.5*x1*x2 - x1^3
dot x2 = 1.98*x1 + x1*x2
";

#[test]
#[ignore]
fn diagnose() {
    let sys = parse_system::<f64>(EX1).unwrap();
    let cfg = RunConfig::<f64> { deg_vn: 4, deg_r: 4, ..RunConfig::default() };
    let run = algorithm3(&sys, &cfg, &BuiltinIpm).unwrap();
    let last = run.last();
    let r = last.set.pieces()[0].clone();
    println!("gamma* = {}", last.gamma);
    println!("p = {}", last.mults[0].p);
    println!("V_N = {}", last.v_n);

    // Verify the claim-I certificate identities hold (sanity).
    for (name, expr) in reexpand_conditions(last, &sys) {
        let cond = last.condition(&name).unwrap();
        println!("identity {}: diff = {:e}", name, expr.max_coeff_diff(&cond.to_poly(2)));
    }

    // Route A compile diagnostics.
    let (prog_a, _) = attrakt::roa::encode_rational(&sys, &r, last.gamma, &last.mults[0].p, &cfg);
    let compiled = prog_a.compile().unwrap();
    println!(
        "route A: m = {}, proven_infeasible = {:?}",
        compiled.problem.num_constraints(),
        compiled.proven_infeasible
    );
    let sol = solve_program(&prog_a, &BuiltinIpm, &SolveOptions::default()).unwrap();
    println!("route A solver status: {:?} in {} iters", sol.sdp_status, sol.iterations);
    assert!(sol.status != ProgramStatus::Unknown || true);

    // Experiment: maximize p(0) at the final (R, gamma*), then route A.
    for frac in [1.0, 0.9, 0.7, 0.5] {
        let g = last.gamma * frac;
        let n = 2usize;
        let f = &sys.f;
        let margin = Polynomial::sum_sq_vars(n).scale(-cfg.eps_margin);
        let gmr = &Polynomial::constant(n, g) - &r;
        let lie_r = r.lie_derivative(f);
        let mut prog = SosProgram::new(n);
        let vn = prog.free_poly("V_N", monomial_basis(n, 1, 4));
        let p0 = prog.free_scalar("p0");
        let p_rest = prog.free_poly("p_rest", monomial_basis(n, 1, 2));
        let m0 = prog.sos_poly("m0", Vec::new());
        let m1 = prog.sos_poly("m1", monomial_basis(n, 1, 1));
        prog.sos_constraint(
            "inv_grad",
            SosExpr::from_poly(&(-&lie_r) + &margin)
                .plus_mul(-&gmr, p0)
                .plus_mul(-&gmr, p_rest),
        );
        prog.sos_constraint(
            "vn_pos",
            SosExpr::from_poly(margin.clone())
                .plus_mul(Polynomial::constant(n, 1.0), vn)
                .plus_mul(-&gmr, m0),
        );
        prog.sos_constraint(
            "vn_dec",
            SosExpr::from_poly(margin.clone())
                .plus_lie(f, -1.0, vn)
                .plus_mul(-&gmr, m1),
        );
        prog.maximize(p0);
        let sol = solve_program(&prog, &BuiltinIpm, &SolveOptions::default()).unwrap();
        if sol.status != ProgramStatus::Optimal {
            println!("maxp0 frac {}: {:?}", frac, sol.sdp_status);
            continue;
        }
        let p_best = {
            let a = sol.poly(p0).clone();
            let b = sol.poly(p_rest).clone();
            &a + &b
        };
        println!("maxp0 frac {}: p(0) = {:?}", frac, sol.objective);
        let out = attrakt::roa::recover_rational_lf(&sys, &r, g, &p_best, &cfg, &BuiltinIpm).unwrap();
        println!(
            "  route A with max-p0 p: {}",
            match out {
                attrakt::roa::RationalOutcome::Found { .. } => "FOUND",
                attrakt::roa::RationalOutcome::Infeasible => "infeas",
                attrakt::roa::RationalOutcome::Unknown => "unknown",
            }
        );
    }

    // Margin-B program diagnostics (V_N fixed, p searched, maximize delta).
    let (prog_b, ids) = attrakt::roa::encode_rational_margin(
        &sys, &r, last.gamma, None, Some(&last.v_n), &cfg);
    let solb = solve_program(&prog_b, &BuiltinIpm, &SolveOptions::default()).unwrap();
    println!(
        "margin-B: sdp_status {:?}, iters {}, objective {:?}",
        solb.sdp_status, solb.iterations, solb.objective
    );
    if solb.status == ProgramStatus::Optimal {
        let p1 = solb.poly(ids.coord).clone();
        println!("margin-B p = {}", p1);
        let (prog_a2, ids2) = attrakt::roa::encode_rational_margin(
            &sys, &r, last.gamma, Some(&p1), None, &cfg);
        let sola = solve_program(&prog_a2, &BuiltinIpm, &SolveOptions::default()).unwrap();
        println!(
            "margin-A: sdp_status {:?}, iters {}, objective {:?}",
            sola.sdp_status, sola.iterations, sola.objective
        );
        let _ = ids2;
    }
}
