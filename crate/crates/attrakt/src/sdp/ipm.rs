//! Homogeneous self-dual interior-point method with Nesterov-Todd scaling
//! and a Mehrotra predictor-corrector step.
//!
//! The embedding solves for (x, y, s, tau, kappa) with x, s in the cone:
//!
//! ```text
//! A(x) - b*tau            = 0
//! -A^T(y) - s + C*tau     = 0
//! b^T y - <C,x> - kappa   = 0
//! x o s = mu e,  tau*kappa = mu
//! ```
//!
//! tau -> positive gives an optimal pair; kappa -> positive gives an
//! infeasibility certificate (a Farkas ray), which is what the gamma
//! bisection upstream relies on. Search directions come from a dense
//! Cholesky of the Schur complement `M_ij = <A_i, W A_j W>`.

use crate::linalg::{cholesky, chol_solve, congr_mut, congr_tum, jacobi_eigen, Mat, SymMatrix};
use crate::scalar::{real, Scalar};

use super::{Block, BlockPart, BlockSym, IterStats, SdpProblem, SdpSolution, SdpStatus, SolveOptions};

enum ScalePart<T: Scalar> {
    Psd {
        r: Mat<T>,
        rinv: Mat<T>,
        lambda: Vec<T>,
        lx_inv: Mat<T>,
        ls_inv: Mat<T>,
    },
    Diag {
        w: Vec<T>,
        lambda: Vec<T>,
    },
}

struct Scaling<T: Scalar> {
    parts: Vec<ScalePart<T>>,
}

/// Nesterov-Todd scaling point per block: for PSD blocks, R with
/// `R^-1 X R^-T = R^T S R = diag(lambda)` and `W = R R^T`.
fn nt_scaling<T: Scalar>(x: &BlockSym<T>, s: &BlockSym<T>) -> Option<Scaling<T>> {
    let mut parts = Vec::with_capacity(x.parts.len());
    for (xp, sp) in x.parts.iter().zip(&s.parts) {
        match (xp, sp) {
            (BlockPart::Dense(xm), BlockPart::Dense(sm)) => {
                let n = xm.dim();
                let lx = cholesky(xm)?;
                let ls = cholesky(sm)?;
                // K = Lx^T S Lx = V diag(lambda^2) V^T
                let k = congr_tum(&lx, sm);
                let (sig2, v) = jacobi_eigen(&k, real::<T>(1e-13), 60);
                let mut lambda = Vec::with_capacity(n);
                for &s2 in &sig2 {
                    if !(s2 > T::zero()) || !s2.is_finite() {
                        return None;
                    }
                    lambda.push(s2.sqrt());
                }
                // R = Lx V diag(lambda)^{-1/2}
                let mut r = Mat::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = T::zero();
                        for kk in 0..n {
                            acc += lx.get(i, kk) * v.get(kk, j);
                        }
                        r.set(i, j, acc / lambda[j].sqrt());
                    }
                }
                // R^{-1} = diag(lambda)^{1/2} V^T Lx^{-1}
                let lx_inv = lx.lower_inverse();
                let ls_inv = ls.lower_inverse();
                let mut rinv = Mat::zeros(n, n);
                for i in 0..n {
                    let scale = lambda[i].sqrt();
                    for j in 0..n {
                        let mut acc = T::zero();
                        for kk in 0..n {
                            acc += v.get(kk, i) * lx_inv.get(kk, j);
                        }
                        rinv.set(i, j, acc * scale);
                    }
                }
                parts.push(ScalePart::Psd { r, rinv, lambda, lx_inv, ls_inv });
            }
            (BlockPart::Diag(xd), BlockPart::Diag(sd)) => {
                let mut w = Vec::with_capacity(xd.len());
                let mut lambda = Vec::with_capacity(xd.len());
                for (&xi, &si) in xd.iter().zip(sd) {
                    if !(xi > T::zero() && si > T::zero()) {
                        return None;
                    }
                    w.push((xi / si).sqrt());
                    lambda.push((xi * si).sqrt());
                }
                parts.push(ScalePart::Diag { w, lambda });
            }
            _ => panic!("block structure mismatch"),
        }
    }
    Some(Scaling { parts })
}

/// `W U W` blockwise.
fn apply_w<T: Scalar>(sc: &Scaling<T>, u: &BlockSym<T>) -> BlockSym<T> {
    let parts = sc
        .parts
        .iter()
        .zip(&u.parts)
        .map(|(p, up)| match (p, up) {
            (ScalePart::Psd { r, .. }, BlockPart::Dense(um)) => {
                // W U W = R (R^T U R) R^T
                BlockPart::Dense(congr_mut(r, &congr_tum(r, um)))
            }
            (ScalePart::Diag { w, .. }, BlockPart::Diag(ud)) => BlockPart::Diag(
                w.iter().zip(ud).map(|(wi, ui)| *wi * *wi * *ui).collect(),
            ),
            _ => panic!("block structure mismatch"),
        })
        .collect();
    BlockSym { parts }
}

/// `R^{-1} U R^{-T}` blockwise (primal scaling).
fn scale_primal<T: Scalar>(sc: &Scaling<T>, u: &BlockSym<T>) -> BlockSym<T> {
    let parts = sc
        .parts
        .iter()
        .zip(&u.parts)
        .map(|(p, up)| match (p, up) {
            (ScalePart::Psd { rinv, .. }, BlockPart::Dense(um)) => {
                BlockPart::Dense(congr_mut(rinv, um))
            }
            (ScalePart::Diag { w, .. }, BlockPart::Diag(ud)) => {
                BlockPart::Diag(w.iter().zip(ud).map(|(wi, ui)| *ui / *wi).collect())
            }
            _ => panic!("block structure mismatch"),
        })
        .collect();
    BlockSym { parts }
}

/// `R^T U R` blockwise (dual scaling).
fn scale_dual<T: Scalar>(sc: &Scaling<T>, u: &BlockSym<T>) -> BlockSym<T> {
    let parts = sc
        .parts
        .iter()
        .zip(&u.parts)
        .map(|(p, up)| match (p, up) {
            (ScalePart::Psd { r, .. }, BlockPart::Dense(um)) => {
                BlockPart::Dense(congr_tum(r, um))
            }
            (ScalePart::Diag { w, .. }, BlockPart::Diag(ud)) => {
                BlockPart::Diag(w.iter().zip(ud).map(|(wi, ui)| *ui * *wi).collect())
            }
            _ => panic!("block structure mismatch"),
        })
        .collect();
    BlockSym { parts }
}

/// `R G R^T` blockwise (maps a scaled-space target back to primal space).
fn unscale_target<T: Scalar>(sc: &Scaling<T>, g: &BlockSym<T>) -> BlockSym<T> {
    let parts = sc
        .parts
        .iter()
        .zip(&g.parts)
        .map(|(p, gp)| match (p, gp) {
            (ScalePart::Psd { r, .. }, BlockPart::Dense(gm)) => {
                BlockPart::Dense(congr_mut(r, gm))
            }
            (ScalePart::Diag { w, .. }, BlockPart::Diag(gd)) => {
                BlockPart::Diag(w.iter().zip(gd).map(|(wi, gi)| *wi * *gi).collect())
            }
            _ => panic!("block structure mismatch"),
        })
        .collect();
    BlockSym { parts }
}

/// Complementarity target in scaled space for the combined corrector step:
/// `d = sigma*mu*I - Lambda^2 - H`, mapped through the arrowhead inverse
/// `G_ij = 2 d_ij / (lambda_i + lambda_j)`.
fn corrector_target<T: Scalar>(
    sc: &Scaling<T>,
    sigma_mu: T,
    h: Option<&BlockSym<T>>,
) -> BlockSym<T> {
    let parts = sc
        .parts
        .iter()
        .enumerate()
        .map(|(bi, p)| match p {
            ScalePart::Psd { lambda, .. } => {
                let n = lambda.len();
                let mut g = SymMatrix::zeros(n);
                for i in 0..n {
                    for j in 0..=i {
                        let mut d = if i == j {
                            sigma_mu - lambda[i] * lambda[i]
                        } else {
                            T::zero()
                        };
                        if let Some(hm) = h {
                            if let BlockPart::Dense(hmat) = &hm.parts[bi] {
                                d -= hmat.get(i, j);
                            }
                        }
                        g.set(i, j, real::<T>(2.0) * d / (lambda[i] + lambda[j]));
                    }
                }
                BlockPart::Dense(g)
            }
            ScalePart::Diag { lambda, .. } => {
                let g = lambda
                    .iter()
                    .enumerate()
                    .map(|(i, &li)| {
                        let mut d = sigma_mu - li * li;
                        if let Some(hm) = h {
                            if let BlockPart::Diag(hd) = &hm.parts[bi] {
                                d -= hd[i];
                            }
                        }
                        d / li
                    })
                    .collect();
                BlockPart::Diag(g)
            }
        })
        .collect();
    BlockSym { parts }
}

/// Symmetrized product `(A B + B A) / 2` blockwise.
fn sym_product<T: Scalar>(a: &BlockSym<T>, b: &BlockSym<T>) -> BlockSym<T> {
    let half = real::<T>(0.5);
    let parts = a
        .parts
        .iter()
        .zip(&b.parts)
        .map(|(ap, bp)| match (ap, bp) {
            (BlockPart::Dense(am), BlockPart::Dense(bm)) => {
                let prod = am.to_mat().matmul(&bm.to_mat());
                let n = am.dim();
                let mut out = SymMatrix::zeros(n);
                for i in 0..n {
                    for j in 0..=i {
                        out.set(i, j, half * (prod.get(i, j) + prod.get(j, i)));
                    }
                }
                BlockPart::Dense(out)
            }
            (BlockPart::Diag(ad), BlockPart::Diag(bd)) => {
                BlockPart::Diag(ad.iter().zip(bd).map(|(x, y)| *x * *y).collect())
            }
            _ => panic!("block structure mismatch"),
        })
        .collect();
    BlockSym { parts }
}

/// Largest step alpha with `x + alpha dx` staying in the cone, using the
/// given Cholesky inverse of the current point per PSD block.
fn max_cone_step<T: Scalar>(
    x: &BlockSym<T>,
    dx: &BlockSym<T>,
    inv_factors: &[Option<&Mat<T>>],
) -> T {
    let mut best = T::infinity();
    for ((xp, dp), li) in x.parts.iter().zip(&dx.parts).zip(inv_factors) {
        match (xp, dp) {
            (BlockPart::Dense(_), BlockPart::Dense(dm)) => {
                let li = li.expect("PSD block needs an inverse factor");
                let b = congr_mut(li, dm);
                let (evals, _) = jacobi_eigen(&b, real::<T>(1e-10), 30);
                let lo = evals.into_iter().fold(T::infinity(), |a, v| a.min(v));
                if lo < T::zero() {
                    best = best.min(-T::one() / lo);
                }
            }
            (BlockPart::Diag(xd), BlockPart::Diag(dd)) => {
                for (xi, di) in xd.iter().zip(dd) {
                    if *di < T::zero() {
                        best = best.min(-*xi / *di);
                    }
                }
            }
            _ => panic!("block structure mismatch"),
        }
    }
    best
}

struct SchurSystem<T: Scalar> {
    m: SymMatrix<T>,
    factor: Mat<T>,
}

impl<T: Scalar> SchurSystem<T> {
    fn solve(&self, rhs: &[T]) -> Vec<T> {
        if rhs.is_empty() {
            return Vec::new();
        }
        let mut x = chol_solve(&self.factor, rhs);
        // One round of iterative refinement against the unregularized matrix.
        let n = rhs.len();
        let mut r = vec![T::zero(); n];
        for i in 0..n {
            let mut s = rhs[i];
            for j in 0..n {
                s -= self.m.get(i, j) * x[j];
            }
            r[i] = s;
        }
        let dx = chol_solve(&self.factor, &r);
        for i in 0..n {
            x[i] += dx[i];
        }
        x
    }
}

/// Assembles and factors `M_ij = <A_i, W A_j W>`, with escalating diagonal
/// regularization if the Cholesky breaks down.
fn build_schur<T: Scalar>(
    prob: &SdpProblem<T>,
    sc: &Scaling<T>,
    nonzero: &[Vec<usize>],
) -> Option<SchurSystem<T>> {
    let m = prob.num_constraints();
    let mut mat = SymMatrix::zeros(m);
    for (bi, block) in prob.blocks.iter().enumerate() {
        let nz = &nonzero[bi];
        if nz.is_empty() {
            continue;
        }
        match block {
            Block::Psd(_) => {
                let (r,) = match &sc.parts[bi] {
                    ScalePart::Psd { r, .. } => (r,),
                    _ => unreachable!(),
                };
                for (jj, &j) in nz.iter().enumerate() {
                    let aj = match &prob.constraints[j].parts[bi] {
                        BlockPart::Dense(mj) => mj,
                        _ => unreachable!(),
                    };
                    let vj = congr_mut(r, &congr_tum(r, aj));
                    for &i in nz.iter().take(jj + 1) {
                        let ai = match &prob.constraints[i].parts[bi] {
                            BlockPart::Dense(mi) => mi,
                            _ => unreachable!(),
                        };
                        mat.add_to(i.max(j), i.min(j), ai.inner(&vj));
                    }
                }
            }
            Block::Nonneg(_) => {
                let w = match &sc.parts[bi] {
                    ScalePart::Diag { w, .. } => w,
                    _ => unreachable!(),
                };
                for (jj, &j) in nz.iter().enumerate() {
                    let aj = match &prob.constraints[j].parts[bi] {
                        BlockPart::Diag(dj) => dj,
                        _ => unreachable!(),
                    };
                    for &i in nz.iter().take(jj + 1) {
                        let ai = match &prob.constraints[i].parts[bi] {
                            BlockPart::Diag(di) => di,
                            _ => unreachable!(),
                        };
                        let mut s = T::zero();
                        for ((a, b), wi) in ai.iter().zip(aj).zip(w) {
                            s += *a * *b * *wi * *wi;
                        }
                        mat.add_to(i.max(j), i.min(j), s);
                    }
                }
            }
        }
    }
    if m == 0 {
        return Some(SchurSystem { m: mat.clone(), factor: Mat::zeros(0, 0) });
    }
    let mut diag_max = T::zero();
    for i in 0..m {
        diag_max = diag_max.max(mat.get(i, i).abs());
    }
    let scale = diag_max.max(T::one());
    for reg_exp in [0.0f64, 1e-12, 1e-9, 1e-6] {
        let mut trial = mat.clone();
        if reg_exp > 0.0 {
            let reg = real::<T>(reg_exp) * scale;
            for i in 0..m {
                trial.add_to(i, i, reg);
            }
        }
        if let Some(factor) = cholesky(&trial) {
            return Some(SchurSystem { m: mat, factor });
        }
    }
    None
}

struct State<T: Scalar> {
    x: BlockSym<T>,
    y: Vec<T>,
    s: BlockSym<T>,
    tau: T,
    kappa: T,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

fn vec_norm_inf<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |a, x| a.max(x.abs()))
}

pub fn solve<T: Scalar>(prob: &SdpProblem<T>, opts: &SolveOptions<T>) -> SdpSolution<T> {
    if let Err(msg) = prob.validate() {
        panic!("invalid SDP problem: {}", msg);
    }
    let m = prob.num_constraints();
    let nu = real::<T>(prob.cone_degree() as f64);
    let mut st = State {
        x: BlockSym::identity(&prob.blocks),
        y: vec![T::zero(); m],
        s: BlockSym::identity(&prob.blocks),
        tau: T::one(),
        kappa: T::one(),
    };

    // Per-block lists of constraints with a nonzero part there.
    let nonzero: Vec<Vec<usize>> = (0..prob.blocks.len())
        .map(|bi| {
            (0..m)
                .filter(|&i| match &prob.constraints[i].parts[bi] {
                    BlockPart::Dense(d) => d.max_abs() > T::zero(),
                    BlockPart::Diag(d) => d.iter().any(|v| *v != T::zero()),
                })
                .collect()
        })
        .collect();

    let norm_b = T::one() + vec_norm_inf(&prob.rhs);
    let norm_c = T::one() + prob.objective.norm_inf();
    let norm_a = prob
        .constraints
        .iter()
        .fold(T::zero(), |acc, a| acc.max(a.norm_inf()))
        .max(T::one());

    let mut trace: Vec<IterStats<T>> = Vec::new();
    let fail = |status: SdpStatus, st: &State<T>, trace: &Vec<IterStats<T>>| {
        let tau = st.tau.max(real::<T>(1e-300));
        finish(prob, status, st.x.scaled(T::one() / tau), scale_vec(&st.y, T::one() / tau),
               st.s.scaled(T::one() / tau), trace.clone())
    };

    for iter in 0..opts.max_iters {
        // Residuals of the self-dual system.
        let ax = prob.apply_a(&st.x);
        let mut p_res: Vec<T> = ax
            .iter()
            .zip(&prob.rhs)
            .map(|(axi, bi)| *axi - *bi * st.tau)
            .collect();
        let mut d_res = prob.objective.scaled(st.tau);
        d_res.add_scaled_mut(&prob.apply_at(&st.y), -T::one());
        d_res.add_scaled_mut(&st.s, -T::one());
        let by = dot(&prob.rhs, &st.y);
        let cx = prob.objective.inner(&st.x);
        let g_res = by - cx - st.kappa;
        let mu = (st.x.inner(&st.s) + st.tau * st.kappa) / (nu + T::one());

        // Candidate solution and termination tests.
        let inv_tau = T::one() / st.tau;
        let pres_rel = vec_norm_inf(&p_res) * inv_tau / norm_b;
        let mut dres_mat = d_res.clone();
        dres_mat.scale_mut(inv_tau);
        let dres_rel = dres_mat.norm_inf() / norm_c;
        let pobj = cx * inv_tau;
        let dobj = by * inv_tau;
        let gap_rel = (pobj - dobj).abs() / (T::one() + pobj.abs() + dobj.abs());
        trace.push(IterStats { pobj, dobj, mu, primal_res: pres_rel, dual_res: dres_rel });
        if opts.verbose {
            eprintln!(
                "ipm iter {:3}  mu {:9.2e}  pres {:9.2e}  dres {:9.2e}  gap {:9.2e}  tau {:8.2e}  kappa {:8.2e}",
                iter,
                mu.to_f64().unwrap_or(f64::NAN),
                pres_rel.to_f64().unwrap_or(f64::NAN),
                dres_rel.to_f64().unwrap_or(f64::NAN),
                gap_rel.to_f64().unwrap_or(f64::NAN),
                st.tau.to_f64().unwrap_or(f64::NAN),
                st.kappa.to_f64().unwrap_or(f64::NAN)
            );
        }
        if pres_rel <= opts.tol_feas && dres_rel <= opts.tol_feas && gap_rel <= opts.tol_gap {
            return finish(
                prob,
                SdpStatus::Optimal,
                st.x.scaled(inv_tau),
                scale_vec(&st.y, inv_tau),
                st.s.scaled(inv_tau),
                trace,
            );
        }
        // Farkas-ray infeasibility certificates; verified before declaring.
        if by > real::<T>(1e-10) {
            let mut ray_slack = prob.apply_at(&st.y);
            ray_slack.add_scaled_mut(&st.s, T::one());
            if ray_slack.norm_inf() / by <= opts.tol_feas * norm_a {
                let inv = T::one() / by;
                return finish(
                    prob,
                    SdpStatus::PrimalInfeasible,
                    st.x.scaled(inv_tau),
                    scale_vec(&st.y, inv),
                    st.s.scaled(inv),
                    trace,
                );
            }
        }
        if cx < -real::<T>(1e-10) {
            let ray_res = vec_norm_inf(&ax) / (-cx);
            if ray_res <= opts.tol_feas * norm_a {
                let inv = -T::one() / cx;
                return finish(
                    prob,
                    SdpStatus::DualInfeasible,
                    st.x.scaled(inv),
                    scale_vec(&st.y, inv_tau),
                    st.s.scaled(inv_tau),
                    trace,
                );
            }
        }

        // NT scaling and Schur factorization.
        let sc = match nt_scaling(&st.x, &st.s) {
            Some(sc) => sc,
            None => return fail(SdpStatus::NumericalFailure, &st, &trace),
        };
        let schur = match build_schur(prob, &sc, &nonzero) {
            Some(s) => s,
            None => return fail(SdpStatus::NumericalFailure, &st, &trace),
        };
        let wc = apply_w(&sc, &prob.objective);
        let mut rhs2 = prob.apply_a(&wc);
        for (r, b) in rhs2.iter_mut().zip(&prob.rhs) {
            *r += *b;
        }
        let v = schur.solve(&rhs2);
        let s2_base = {
            let mut s2 = prob.objective.clone();
            s2.add_scaled_mut(&prob.apply_at(&v), -T::one());
            s2
        };
        let x2 = {
            let mut t = apply_w(&sc, &s2_base);
            t.scale_mut(-T::one());
            t
        };
        let dtau_den = dot(&prob.rhs, &v) - prob.objective.inner(&x2) + st.kappa / st.tau;

        // Negate residuals once: the Newton right-hand sides use -P, -D, -G.
        for r in p_res.iter_mut() {
            *r = -*r;
        }
        let neg_g = -g_res;

        let solve_direction = |gmat: &BlockSym<T>, dtau_rhs: T| -> Option<Direction<T>> {
            let rgr = unscale_target(&sc, gmat);
            let wd = apply_w(&sc, &d_res);
            let mut rhs1 = prob.apply_a(&rgr);
            for ((r1, pr), wdi) in rhs1.iter_mut().zip(&p_res).zip(prob.apply_a(&wd)) {
                // rhs1 = -P - A(RGR) + A(WDW); p_res already negated.
                *r1 = *pr - *r1 + wdi;
            }
            let u = schur.solve(&rhs1);
            let mut s1 = d_res.clone();
            s1.add_scaled_mut(&prob.apply_at(&u), -T::one());
            let mut x1 = rgr.clone();
            {
                let mut ws1 = apply_w(&sc, &s1);
                ws1.scale_mut(-T::one());
                x1.add_scaled_mut(&ws1, T::one());
            }
            if dtau_den.abs() < real::<T>(1e-300) {
                return None;
            }
            let dtau_num =
                neg_g - dot(&prob.rhs, &u) + prob.objective.inner(&x1) + dtau_rhs / st.tau;
            let dtau = dtau_num / dtau_den;
            let dkappa = (dtau_rhs - st.kappa * dtau) / st.tau;
            let mut dx = x1;
            dx.add_scaled_mut(&x2, dtau);
            let mut ds = s1;
            ds.add_scaled_mut(&s2_base, dtau);
            let mut dy = u;
            for (yi, vi) in dy.iter_mut().zip(&v) {
                *yi += *vi * dtau;
            }
            Some(Direction { dx, dy, ds, dtau, dkappa })
        };

        // Inverse factors of the current point for step-length computation.
        let x_inv_factors: Vec<Option<&Mat<T>>> = sc
            .parts
            .iter()
            .map(|p| match p {
                ScalePart::Psd { lx_inv, .. } => Some(lx_inv),
                ScalePart::Diag { .. } => None,
            })
            .collect();
        let s_inv_factors: Vec<Option<&Mat<T>>> = sc
            .parts
            .iter()
            .map(|p| match p {
                ScalePart::Psd { ls_inv, .. } => Some(ls_inv),
                ScalePart::Diag { .. } => None,
            })
            .collect();
        let step_to_boundary = |d: &Direction<T>| -> T {
            let mut a = max_cone_step(&st.x, &d.dx, &x_inv_factors);
            a = a.min(max_cone_step(&st.s, &d.ds, &s_inv_factors));
            if d.dtau < T::zero() {
                a = a.min(-st.tau / d.dtau);
            }
            if d.dkappa < T::zero() {
                a = a.min(-st.kappa / d.dkappa);
            }
            a
        };

        // Predictor (affine direction): target = -Lambda in scaled space.
        let g_aff = corrector_target(&sc, T::zero(), None);
        let aff = match solve_direction(&g_aff, -st.tau * st.kappa) {
            Some(d) => d,
            None => return fail(SdpStatus::NumericalFailure, &st, &trace),
        };
        let alpha_aff = step_to_boundary(&aff).min(T::one());
        let mu_aff = {
            let mut xa = st.x.clone();
            xa.add_scaled_mut(&aff.dx, alpha_aff);
            let mut sa = st.s.clone();
            sa.add_scaled_mut(&aff.ds, alpha_aff);
            let ta = st.tau + alpha_aff * aff.dtau;
            let ka = st.kappa + alpha_aff * aff.dkappa;
            (xa.inner(&sa) + ta * ka) / (nu + T::one())
        };
        let sigma = {
            let ratio = (mu_aff / mu).max(T::zero()).min(T::one());
            ratio * ratio * ratio
        };

        // Combined corrector.
        let dxt = scale_primal(&sc, &aff.dx);
        let dst = scale_dual(&sc, &aff.ds);
        let h = sym_product(&dxt, &dst);
        let g_comb = corrector_target(&sc, sigma * mu, Some(&h));
        let dtau_rhs = sigma * mu - st.tau * st.kappa - aff.dtau * aff.dkappa;
        let dir = match solve_direction(&g_comb, dtau_rhs) {
            Some(d) => d,
            None => return fail(SdpStatus::NumericalFailure, &st, &trace),
        };
        let alpha = (opts.step_frac * step_to_boundary(&dir)).min(T::one());
        if !(alpha > real::<T>(1e-10)) || !alpha.is_finite() {
            return fail(SdpStatus::NumericalFailure, &st, &trace);
        }
        st.x.add_scaled_mut(&dir.dx, alpha);
        st.s.add_scaled_mut(&dir.ds, alpha);
        for (yi, dyi) in st.y.iter_mut().zip(&dir.dy) {
            *yi += *dyi * alpha;
        }
        st.tau += alpha * dir.dtau;
        st.kappa += alpha * dir.dkappa;
        if !st.tau.is_finite() || !st.kappa.is_finite() {
            return fail(SdpStatus::NumericalFailure, &st, &trace);
        }
    }

    fail(SdpStatus::MaxIterations, &st, &trace)
}

struct Direction<T: Scalar> {
    dx: BlockSym<T>,
    dy: Vec<T>,
    ds: BlockSym<T>,
    dtau: T,
    dkappa: T,
}

fn scale_vec<T: Scalar>(v: &[T], c: T) -> Vec<T> {
    v.iter().map(|x| *x * c).collect()
}

fn finish<T: Scalar>(
    prob: &SdpProblem<T>,
    status: SdpStatus,
    x: BlockSym<T>,
    y: Vec<T>,
    s: BlockSym<T>,
    trace: Vec<IterStats<T>>,
) -> SdpSolution<T> {
    let ax = prob.apply_a(&x);
    let mut primal_res = T::zero();
    for (axi, bi) in ax.iter().zip(&prob.rhs) {
        primal_res = primal_res.max((*axi - *bi).abs());
    }
    let mut dual = prob.objective.clone();
    dual.add_scaled_mut(&prob.apply_at(&y), -T::one());
    dual.add_scaled_mut(&s, -T::one());
    let dual_res = dual.norm_inf();
    let pobj = prob.objective.inner(&x);
    let dobj = dot(&prob.rhs, &y);
    let gap = (pobj - dobj).abs() / (T::one() + pobj.abs() + dobj.abs());
    let iterations = trace.len();
    SdpSolution {
        status,
        x,
        y,
        s,
        objective: pobj,
        primal_res,
        dual_res,
        gap,
        iterations,
        trace,
    }
}
