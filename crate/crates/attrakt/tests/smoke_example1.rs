//! Scratch timing probe for the Lotka-Volterra example (removed later).

use attrakt::parse::{parse_system, RunConfig};
use attrakt::roa::{algorithm3, recover_rational_lf_with_fallback, RationalOutcome};
use attrakt::sdp::BuiltinIpm;

const EX1: &str = "\
vars: x1 x2
dot x1 = -0.42*x1 - 1.05*x2 - 2.3*x1^2 - 0.5*x1*x2 - x1^3
dot x2 = 1.98*x1 + x1*x2
";

#[test]
#[ignore]
fn example1_probe() {
    let sys = parse_system::<f64>(EX1).unwrap();
    let cfg = RunConfig::<f64> { deg_vn: 4, deg_r: 4, ..RunConfig::default() };
    let t0 = std::time::Instant::now();
    let run = algorithm3(&sys, &cfg, &BuiltinIpm).unwrap();
    println!("algorithm3: {:?}", t0.elapsed());
    println!("gamma trace: {:?}", run.gamma_trace);
    let last = run.last();
    println!("final gamma: {}", last.gamma);
    println!("final R: {}", last.set.pieces()[0]);
    let t1 = std::time::Instant::now();
    let out = recover_rational_lf_with_fallback(
        &sys,
        &last.set.pieces()[0],
        last.gamma,
        &last.mults[0].p,
        &last.v_n,
        &cfg,
        &BuiltinIpm,
    )
    .unwrap();
    println!("rational recovery: {:?}", t1.elapsed());
    match out {
        RationalOutcome::Found { .. } => println!("rational: FOUND"),
        RationalOutcome::Infeasible => println!("rational: INFEASIBLE"),
        RationalOutcome::Unknown => println!("rational: UNKNOWN"),
    }
    for frac in [1.0, 0.995, 0.98, 0.95, 0.9, 0.8, 0.5] {
        let g = last.gamma * frac;
        let out_a = attrakt::roa::recover_rational_lf(
            &sys, &last.set.pieces()[0], g, &last.mults[0].p, &cfg, &BuiltinIpm).unwrap();
        let out_b = recover_rational_lf_with_fallback(
            &sys, &last.set.pieces()[0], g, &last.mults[0].p, &last.v_n, &cfg, &BuiltinIpm).unwrap();
        println!("frac {:5}: A = {:?}   A-or-B = {:?}", frac,
            match out_a { RationalOutcome::Found{..} => "FOUND", RationalOutcome::Infeasible => "infeas", RationalOutcome::Unknown => "unknown" },
            match out_b { RationalOutcome::Found{..} => "FOUND", RationalOutcome::Infeasible => "infeas", RationalOutcome::Unknown => "unknown" });
    }
}
