use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::SymMatrix;

use super::*;

fn default_opts() -> SolveOptions<f64> {
    SolveOptions::default()
}

fn dense(entries: &[&[f64]]) -> BlockPart<f64> {
    BlockPart::Dense(sym_from_rows::<f64>(entries))
}

fn one_block_constraint(blocks: &[Block], part: BlockPart<f64>) -> BlockSym<f64> {
    let mut a = BlockSym::zeros(blocks);
    a.parts[0] = part;
    a
}

/// min tr(X) s.t. X_11 = 1, X psd (2x2) -> objective 1, X = e1 e1^T.
#[test]
fn trace_minimization_analytic() {
    let blocks = vec![Block::Psd(2)];
    let mut prob = SdpProblem::new(blocks.clone());
    prob.objective = BlockSym { parts: vec![dense(&[&[1.0, 0.0], &[0.0, 1.0]])] };
    prob.add_constraint(
        one_block_constraint(&blocks, dense(&[&[1.0, 0.0], &[0.0, 0.0]])),
        1.0,
    );
    let sol = solve_builtin_for_tests(&prob);
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.objective - 1.0).abs() < 1e-7);
    match &sol.x.parts[0] {
        BlockPart::Dense(x) => {
            assert!((x.get(0, 0) - 1.0).abs() < 1e-6);
            assert!(x.get(1, 1).abs() < 1e-6);
            assert!(x.get(0, 1).abs() < 1e-6);
        }
        _ => unreachable!(),
    }
    let check = verify_solution(&prob, &sol);
    assert!(check.primal_res < 1e-8);
    assert!(check.dual_res < 1e-8);
    assert!(check.min_eigs[0] > -1e-9);
}

/// X_11 = -1 contradicts psd-ness: PrimalInfeasible with a verified ray.
#[test]
fn diagonal_infeasibility_detected() {
    let blocks = vec![Block::Psd(2)];
    let mut prob = SdpProblem::new(blocks.clone());
    prob.add_constraint(
        one_block_constraint(&blocks, dense(&[&[1.0, 0.0], &[0.0, 0.0]])),
        -1.0,
    );
    let sol = solve_builtin_for_tests(&prob);
    assert_eq!(sol.status, SdpStatus::PrimalInfeasible);
    // The returned ray satisfies b^T y = 1 and A^T y + s ~ 0 with s >= 0.
    let by: f64 = prob.rhs.iter().zip(&sol.y).map(|(b, y)| b * y).sum();
    assert!((by - 1.0).abs() < 1e-6);
    let mut slack = prob.apply_at(&sol.y);
    slack.add_scaled_mut(&sol.s, 1.0);
    assert!(slack.norm_inf() < 1e-6);
    assert!(sol.s.min_eig() > -1e-9);
}

/// min <C,X> with C = [[0,1],[1,0]], tr X = 1: optimum is the smallest
/// eigenvalue of C (-1), attained at X = 0.5 [[1,-1],[-1,1]].
#[test]
fn eigenvalue_instance_analytic() {
    let blocks = vec![Block::Psd(2)];
    let mut prob = SdpProblem::new(blocks.clone());
    prob.objective = BlockSym { parts: vec![dense(&[&[0.0, 1.0], &[1.0, 0.0]])] };
    prob.add_constraint(
        one_block_constraint(&blocks, dense(&[&[1.0, 0.0], &[0.0, 1.0]])),
        1.0,
    );
    let sol = solve_builtin_for_tests(&prob);
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.objective + 1.0).abs() < 1e-7);
    match &sol.x.parts[0] {
        BlockPart::Dense(x) => {
            assert!((x.get(0, 0) - 0.5).abs() < 1e-6);
            assert!((x.get(0, 1) + 0.5).abs() < 1e-6);
        }
        _ => unreachable!(),
    }
}

#[test]
fn verify_solution_reports_tampering() {
    let blocks = vec![Block::Psd(2)];
    let mut prob = SdpProblem::new(blocks.clone());
    prob.objective = BlockSym { parts: vec![dense(&[&[1.0, 0.0], &[0.0, 1.0]])] };
    prob.add_constraint(
        one_block_constraint(&blocks, dense(&[&[1.0, 0.0], &[0.0, 0.0]])),
        1.0,
    );
    let mut sol = solve_builtin_for_tests(&prob);
    // Perturb X_11 by +1: primal residual ~ 1 must be reported.
    if let BlockPart::Dense(x) = &mut sol.x.parts[0] {
        let v = x.get(0, 0);
        x.set(0, 0, v + 1.0);
    }
    let check = verify_solution(&prob, &sol);
    assert!((check.primal_res - 1.0).abs() < 1e-6);
}

#[test]
fn random_feasible_three_by_three_verified() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // Build an instance from a known PSD interior point.
    let blocks = vec![Block::Psd(3)];
    let x0 = random_psd(&mut rng, 3, 0.5);
    let mut prob = SdpProblem::new(blocks.clone());
    prob.objective = BlockSym { parts: vec![BlockPart::Dense(random_psd(&mut rng, 3, 0.0))] };
    for _ in 0..4 {
        let a = random_sym(&mut rng, 3);
        let b = a.inner(&x0);
        prob.add_constraint(BlockSym { parts: vec![BlockPart::Dense(a)] }, b);
    }
    // Make the objective dual-feasible too (C = A^T y0 + S0).
    let y0: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut c = prob.apply_at(&y0);
    c.add_scaled_mut(
        &BlockSym { parts: vec![BlockPart::Dense(random_psd(&mut rng, 3, 0.3))] },
        1.0,
    );
    prob.objective = c;
    let sol = solve_builtin_for_tests(&prob);
    assert_eq!(sol.status, SdpStatus::Optimal);
    let check = verify_solution(&prob, &sol);
    assert!(check.min_eigs[0] >= -1e-8);
    assert!(check.primal_res <= 1e-7);
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix<f64> {
    SymMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> SymMatrix<f64> {
    let g = random_sym(rng, n);
    // G G^T + shift I
    SymMatrix::from_fn(n, |i, j| {
        let mut s = if i == j { shift } else { 0.0 };
        for k in 0..n {
            s += g.get(i, k) * g.get(j, k);
        }
        s
    })
}

fn solve_builtin_for_tests(prob: &SdpProblem<f64>) -> SdpSolution<f64> {
    BuiltinIpm.solve(prob, &default_opts())
}

/// Random strictly feasible instances (primal and dual interior points
/// planted) must reach Optimal with gap <= 1e-8 within the iteration cap,
/// and weak duality must hold on near-feasible iterates.
#[test]
fn random_strictly_feasible_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..50 {
        let prob = random_strictly_feasible(&mut rng);
        let sol = solve_builtin_for_tests(&prob);
        assert_eq!(
            sol.status,
            SdpStatus::Optimal,
            "trial {} did not reach Optimal (iters {})",
            trial,
            sol.iterations
        );
        assert!(sol.iterations <= 100);
        assert!(sol.gap <= 1e-8, "trial {} gap {}", trial, sol.gap);
        for st in &sol.trace {
            if st.primal_res <= 1e-6 && st.dual_res <= 1e-6 {
                assert!(
                    st.pobj >= st.dobj - 1e-7,
                    "weak duality violated: pobj {} dobj {}",
                    st.pobj,
                    st.dobj
                );
            }
        }
    }
}

pub(super) fn random_strictly_feasible(rng: &mut ChaCha8Rng) -> SdpProblem<f64> {
    let psd_dim = rng.gen_range(2..5);
    let nn_dim = rng.gen_range(1..4);
    let m = rng.gen_range(1..6);
    let blocks = vec![Block::Psd(psd_dim), Block::Nonneg(nn_dim)];
    let x0 = BlockSym {
        parts: vec![
            BlockPart::Dense(random_psd(rng, psd_dim, 0.4)),
            BlockPart::Diag((0..nn_dim).map(|_| rng.gen_range(0.2..2.0)).collect()),
        ],
    };
    let mut prob = SdpProblem::new(blocks.clone());
    for _ in 0..m {
        let a = BlockSym {
            parts: vec![
                BlockPart::Dense(random_sym(rng, psd_dim)),
                BlockPart::Diag((0..nn_dim).map(|_| rng.gen_range(-1.0..1.0)).collect()),
            ],
        };
        let b = a.inner(&x0);
        prob.add_constraint(a, b);
    }
    let y0: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let s0 = BlockSym {
        parts: vec![
            BlockPart::Dense(random_psd(rng, psd_dim, 0.3)),
            BlockPart::Diag((0..nn_dim).map(|_| rng.gen_range(0.2..2.0)).collect()),
        ],
    };
    let mut c = prob.apply_at(&y0);
    c.add_scaled_mut(&s0, 1.0);
    prob.objective = c;
    prob
}

/// Instances planted infeasible through `<e_jj, X> = -1` must come back
/// PrimalInfeasible.
#[test]
fn planted_infeasible_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let mut prob = random_strictly_feasible(&mut rng);
        let psd_dim = match prob.blocks[0] {
            Block::Psd(s) => s,
            _ => unreachable!(),
        };
        let j = rng.gen_range(0..psd_dim);
        let mut bad = BlockSym::zeros(&prob.blocks);
        if let BlockPart::Dense(d) = &mut bad.parts[0] {
            d.set(j, j, 1.0);
        }
        prob.add_constraint(bad, -1.0);
        let sol = solve_builtin_for_tests(&prob);
        assert_eq!(sol.status, SdpStatus::PrimalInfeasible);
    }
}

#[test]
fn feasibility_problem_min_zero() {
    // No objective: feasible iff Optimal.
    let blocks = vec![Block::Psd(2), Block::Nonneg(2)];
    let mut prob = SdpProblem::new(blocks.clone());
    let mut a = BlockSym::zeros(&blocks);
    if let BlockPart::Dense(d) = &mut a.parts[0] {
        d.set(0, 0, 1.0);
        d.set(1, 1, 1.0);
    }
    if let BlockPart::Diag(d) = &mut a.parts[1] {
        d[0] = 1.0;
    }
    prob.add_constraint(a, 2.0);
    let sol = solve_builtin_for_tests(&prob);
    assert_eq!(sol.status, SdpStatus::Optimal);
}

#[test]
fn sparse_dump_format() {
    let blocks = vec![Block::Psd(2), Block::Nonneg(1)];
    let mut prob = SdpProblem::new(blocks.clone());
    if let BlockPart::Dense(d) = &mut prob.objective.parts[0] {
        d.set(0, 1, 2.5);
    }
    let mut a = BlockSym::zeros(&blocks);
    if let BlockPart::Diag(d) = &mut a.parts[1] {
        d[0] = -1.0;
    }
    prob.add_constraint(a, 3.0);
    let dump = prob.dump_sparse();
    assert!(dump.contains("m 1"));
    assert!(dump.contains("blocks 2: s2 n1"));
    assert!(dump.contains("b 1 3"));
    assert!(dump.contains("e 0 0 0 1 2.5"));
    assert!(dump.contains("e 1 1 0 0 -1"));
}

#[test]
fn backend_from_env_rejects_unknown() {
    std::env::set_var("ATTRAKT_SOLVER", "nonexistent");
    assert!(backend_from_env::<f64>().is_err());
    std::env::set_var("ATTRAKT_SOLVER", "builtin");
    assert!(backend_from_env::<f64>().is_ok());
    std::env::remove_var("ATTRAKT_SOLVER");
}
