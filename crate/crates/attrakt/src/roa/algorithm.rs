//! Gamma line searches, the outer alternation (Step 1 / Step 2), rational
//! Lyapunov recovery, and the fixed-pieces variant.
//!
//! "Feasible" always means the solver returned a verified Optimal status;
//! iteration caps and numerical failures shrink the search bracket like an
//! infeasibility would, so accepted gammas are never optimistic.

use crate::linalg::{linearize, solve_lyapunov};
use crate::parse::{PolySystem, RunConfig};
use crate::poly::{Monomial, Polynomial};
use crate::scalar::{real, Scalar};
use crate::sdp::{SdpBackend, SolveOptions};
use crate::sos::{solve_program, DecId, ProgramStatus, SosProgram, SosSolution};

use super::encode::{
    self, containment_conditions, piecewise_conditions, rational_conditions,
    rational_conditions_fixed_vn, rational_margin_program, step2_conditions,
};
use super::{
    CertPoly, CondCert, ContainmentLink, EraCertificate, GramCert, PieceMultipliers, RoaError,
    SetFn,
};

/// One gamma probe of a line search.
#[derive(Debug, Clone)]
pub struct Probe<T: Scalar> {
    pub gamma: T,
    pub status: ProgramStatus,
}

/// Re-exported builder (the conditions of Step 1 at fixed R and gamma).
pub fn step1_conditions<T: Scalar>(
    sys: &PolySystem<T>,
    r: &Polynomial<T>,
    gamma: T,
    cfg: &RunConfig<T>,
) -> SosProgram<T> {
    encode::step1_conditions(sys, r, gamma, cfg).0
}

fn solve_opts<T: Scalar>(cfg: &RunConfig<T>) -> SolveOptions<T> {
    SolveOptions {
        tol_feas: cfg.tol_feas,
        tol_gap: cfg.tol_gap,
        max_iters: cfg.max_iters,
        ..SolveOptions::default()
    }
}

fn status_name(s: ProgramStatus) -> &'static str {
    match s {
        ProgramStatus::Optimal => "feasible",
        ProgramStatus::Infeasible => "infeasible",
        ProgramStatus::Unbounded => "unbounded",
        ProgramStatus::Unknown => "unknown (iteration cap or numerics)",
    }
}

/// Collects the Gram certificates of every SOS constraint of a solved
/// program, keyed by constraint name.
fn collect_cond_certs<T: Scalar>(prog: &SosProgram<T>, sol: &SosSolution<T>) -> Vec<CondCert<T>> {
    (0..prog.num_constraints())
        .filter_map(|ci| {
            let grams: Vec<GramCert<T>> = sol
                .constraint_grams(ci)
                .iter()
                .map(|(basis, q)| GramCert { basis: basis.clone(), q: q.clone() })
                .collect();
            if grams.is_empty() {
                None
            } else {
                Some(CondCert { name: prog.constraint_name(ci).to_string(), grams })
            }
        })
        .collect()
}

fn cert_poly<T: Scalar>(sol: &SosSolution<T>, id: DecId) -> CertPoly<T> {
    CertPoly {
        poly: sol.poly(id).clone(),
        gram: sol
            .decision_gram(id)
            .map(|(basis, q)| GramCert { basis: basis.clone(), q: q.clone() }),
    }
}

/// Bisection for the largest feasible gamma in `[lo, hi]`, given that `lo`
/// is feasible with artifacts `bundle`. Not-proven-feasible outcomes
/// (including solver iteration caps) shrink the upper bracket.
fn bisect_gamma<T: Scalar, B>(
    lo: T,
    hi: T,
    tol: T,
    bundle: B,
    mut solve_at: impl FnMut(T) -> (ProgramStatus, Option<B>),
    probes: &mut Vec<Probe<T>>,
) -> (T, B) {
    let mut lo = lo;
    let mut best = bundle;
    let (status, out) = solve_at(hi);
    probes.push(Probe { gamma: hi, status });
    if let (ProgramStatus::Optimal, Some(b)) = (status, out) {
        return (hi, b);
    }
    let mut hi = hi;
    while (hi - lo) > tol * hi.max(real::<T>(1e-12)) {
        let mid = (lo + hi) * real::<T>(0.5);
        let (status, out) = solve_at(mid);
        probes.push(Probe { gamma: mid, status });
        match (status, out) {
            (ProgramStatus::Optimal, Some(b)) => {
                lo = mid;
                best = b;
            }
            _ => hi = mid,
        }
    }
    (lo, best)
}

/// Halve gamma from 1 until the program is feasible (at most `max_halvings`
/// tries). Returns the first feasible gamma with its artifacts.
fn halve_until_feasible<T: Scalar, B>(
    max_halvings: usize,
    mut solve_at: impl FnMut(T) -> (ProgramStatus, Option<B>),
    probes: &mut Vec<Probe<T>>,
) -> Option<(T, B)> {
    let mut gamma = T::one();
    for _ in 0..=max_halvings {
        let (status, out) = solve_at(gamma);
        probes.push(Probe { gamma, status });
        if let (ProgramStatus::Optimal, Some(b)) = (status, out) {
            return Some((gamma, b));
        }
        gamma = gamma * real::<T>(0.5);
    }
    None
}

/// Artifacts of a Step-1 solve: the largest certified gamma with the
/// defining multipliers and Gram certificates.
#[derive(Debug, Clone)]
pub struct Step1Result<T: Scalar> {
    pub gamma: T,
    pub v_n: Polynomial<T>,
    pub p: Polynomial<T>,
    pub m0: CertPoly<T>,
    pub m1: CertPoly<T>,
    pub conditions: Vec<CondCert<T>>,
    pub probes: Vec<Probe<T>>,
}

struct Step1Bundle<T: Scalar> {
    v_n: Polynomial<T>,
    p: Polynomial<T>,
    m0: CertPoly<T>,
    m1: CertPoly<T>,
    conditions: Vec<CondCert<T>>,
}

fn solve_step1_at<T: Scalar>(
    sys: &PolySystem<T>,
    r: &Polynomial<T>,
    gamma: T,
    cfg: &RunConfig<T>,
    backend: &dyn SdpBackend<T>,
) -> Result<(ProgramStatus, Option<Step1Bundle<T>>), RoaError> {
    let (prog, ids) = encode::step1_conditions(sys, r, gamma, cfg);
    let sol = solve_program(&prog, backend, &solve_opts(cfg))?;
    if sol.status != ProgramStatus::Optimal {
        return Ok((sol.status, None));
    }
    let bundle = Step1Bundle {
        v_n: sol.poly(ids.vn).clone(),
        p: sol.poly(ids.p).clone(),
        m0: cert_poly(&sol, ids.m0),
        m1: cert_poly(&sol, ids.m1),
        conditions: collect_cond_certs(&prog, &sol),
    };
    Ok((ProgramStatus::Optimal, Some(bundle)))
}

/// Step 1: maximize gamma by bisection at fixed `R`, starting from
/// `cfg.gamma_lo` (which must be feasible).
pub fn step1_maximize_gamma<T: Scalar>(
    sys: &PolySystem<T>,
    r: &Polynomial<T>,
    cfg: &RunConfig<T>,
    backend: &dyn SdpBackend<T>,
) -> Result<Step1Result<T>, RoaError> {
    let mut probes = Vec::new();
    let (status, bundle) = solve_step1_at(sys, r, cfg.gamma_lo, cfg, backend)?;
    probes.push(Probe { gamma: cfg.gamma_lo, status });
    let bundle = match bundle {
        Some(b) => b,
        None => {
            return Err(RoaError::InfeasibleAtGammaLo {
                gamma: cfg.gamma_lo.to_f64().unwrap_or(f64::NAN),
                status: status_name(status).to_string(),
            })
        }
    };
    let mut err = None;
    let (gamma, bundle) = bisect_gamma(
        cfg.gamma_lo,
        cfg.gamma_hi,
        cfg.bisect_tol,
        bundle,
        |g| match solve_step1_at(sys, r, g, cfg, backend) {
            Ok(pair) => pair,
            Err(e) => {
                err = Some(e);
                (ProgramStatus::Unknown, None)
            }
        },
        &mut probes,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok(Step1Result {
        gamma,
        v_n: bundle.v_n,
        p: bundle.p,
        m0: bundle.m0,
        m1: bundle.m1,
        conditions: bundle.conditions,
        probes,
    })
}

/// Outcome of a Step-2 update.
#[derive(Debug, Clone)]
pub enum Step2Outcome<T: Scalar> {
    /// New set function with its containment certificate against the input.
    Updated {
        r_new: Polynomial<T>,
        gamma_new: T,
        v_n: Polynomial<T>,
        link: ContainmentLink<T>,
        probes: Vec<Probe<T>>,
    },
    /// Infeasible at gamma*, so the previous set is a fixed point.
    FixedPoint { probes: Vec<Probe<T>> },
}

struct Step2Bundle<T: Scalar> {
    r_new: Polynomial<T>,
    v_n: Polynomial<T>,
    m3: CertPoly<T>,
    containment: CondCert<T>,
}

/// Step 2: with `p`, `m0`, `m1` fixed from Step 1, search the largest gamma
/// for which a new set function `R` exists whose sublevel set stays above
/// `E(r_hat, gamma_prev)` (certified by `m3`) and satisfies compactness.
pub fn step2_update_r<T: Scalar>(
    sys: &PolySystem<T>,
    r_hat: &Polynomial<T>,
    s1: &Step1Result<T>,
    cfg: &RunConfig<T>,
    backend: &dyn SdpBackend<T>,
) -> Result<Step2Outcome<T>, RoaError> {
    let gamma_prev = s1.gamma;
    let compile_err: std::cell::RefCell<Option<RoaError>> = std::cell::RefCell::new(None);
    let solve_at = |gamma: T| -> (ProgramStatus, Option<Step2Bundle<T>>) {
        let (prog, ids) =
            step2_conditions(sys, r_hat, gamma, &s1.p, &s1.m0.poly, &s1.m1.poly, cfg);
        match solve_program(&prog, backend, &solve_opts(cfg)) {
            Err(e) => {
                *compile_err.borrow_mut() = Some(e.into());
                (ProgramStatus::Unknown, None)
            }
            Ok(sol) => {
                if sol.status != ProgramStatus::Optimal {
                    return (sol.status, None);
                }
                let conds = collect_cond_certs(&prog, &sol);
                let containment = conds
                    .iter()
                    .find(|c| c.name == "containment")
                    .cloned()
                    .expect("containment condition present");
                let bundle = Step2Bundle {
                    r_new: sol.poly(ids.r).clone(),
                    v_n: sol.poly(ids.vn).clone(),
                    m3: cert_poly(&sol, ids.m3),
                    containment,
                };
                (ProgramStatus::Optimal, Some(bundle))
            }
        }
    };

    let mut probes = Vec::new();
    let (status, bundle) = solve_at(gamma_prev);
    probes.push(Probe { gamma: gamma_prev, status });
    if let Some(e) = compile_err.borrow_mut().take() {
        return Err(e);
    }
    let bundle = match bundle {
        Some(b) => b,
        None => return Ok(Step2Outcome::FixedPoint { probes }),
    };
    let (gamma_new, bundle) =
        bisect_gamma(gamma_prev, cfg.gamma_hi, cfg.bisect_tol, bundle, solve_at, &mut probes);
    if let Some(e) = compile_err.borrow_mut().take() {
        return Err(e);
    }
    // The solved identity is (g - R) - m3 (g - R_hat) at g = gamma_new. The
    // chain stores the nesting against the certified previous level:
    //   (g - R) - m3 (gamma_prev - R_hat)
    //     = [(g - R) - m3 (g - R_hat)] + m3 (g - gamma_prev),
    // so appending m3's Gram scaled by (g - gamma_prev) certifies it.
    let mut cond = bundle.containment;
    let lift = gamma_new - gamma_prev;
    if lift > T::zero() {
        if let Some(g3) = &bundle.m3.gram {
            let mut scaled = g3.clone();
            scaled.q.scale_mut(lift);
            cond.grams.push(scaled);
        }
    }
    let link = ContainmentLink {
        prev_r: r_hat.clone(),
        prev_gamma: gamma_prev,
        r: bundle.r_new.clone(),
        gamma: gamma_new,
        m3: bundle.m3,
        cond,
    };
    Ok(Step2Outcome::Updated {
        r_new: bundle.r_new,
        gamma_new,
        v_n: bundle.v_n,
        link,
        probes,
    })
}

/// Raises the certified gamma of a containment link. The identity
/// `(g - R) - m3 (g_prev - R_prev)` gains the nonnegative constant
/// `g_new - g_old`, which is absorbed into the Gram entry of the constant
/// basis monomial.
fn bump_link_gamma<T: Scalar>(link: &mut ContainmentLink<T>, gamma_new: T) -> bool {
    let delta = gamma_new - link.gamma;
    if delta < T::zero() {
        return false;
    }
    if delta == T::zero() {
        return true;
    }
    for g in link.cond.grams.iter_mut() {
        if let Some(idx) = g.basis.iter().position(|m| m.is_one()) {
            let v = g.q.get(idx, idx);
            g.q.set(idx, idx, v + delta);
            link.gamma = gamma_new;
            return true;
        }
    }
    false
}

/// Run summary of the outer alternation.
#[derive(Debug)]
pub struct Alg3Run<T: Scalar> {
    /// One certificate per outer iteration (each from its Step-1 solve).
    pub certificates: Vec<EraCertificate<T>>,
    /// gamma* per outer iteration.
    pub gamma_trace: Vec<T>,
}

impl<T: Scalar> Alg3Run<T> {
    pub fn last(&self) -> &EraCertificate<T> {
        self.certificates.last().expect("at least one iteration")
    }
}

/// The full alternation, self-initialized with the quadratic Lyapunov
/// function of the linearization.
pub fn algorithm3<T: Scalar>(
    sys: &PolySystem<T>,
    cfg: &RunConfig<T>,
    backend: &dyn SdpBackend<T>,
) -> Result<Alg3Run<T>, RoaError> {
    let a = linearize(sys);
    let p = solve_lyapunov(&a).ok_or(RoaError::NotHurwitz)?;
    let n = sys.nvars();
    let mut r0 = Polynomial::zero(n);
    for i in 0..n {
        for j in 0..n {
            let mut exps = vec![0u32; n];
            exps[i] += 1;
            exps[j] += 1;
            r0.add_term(Monomial::new(exps), p.get(i, j));
        }
    }
    algorithm3_seeded(sys, cfg, backend, r0)
}

/// The alternation from an explicit initial set function (used to re-seed
/// with a previously obtained `V_N`).
pub fn algorithm3_seeded<T: Scalar>(
    sys: &PolySystem<T>,
    cfg: &RunConfig<T>,
    backend: &dyn SdpBackend<T>,
    r0: Polynomial<T>,
) -> Result<Alg3Run<T>, RoaError> {
    // Bracket initialization: halve gamma from 1 until Step 1 is feasible.
    let mut init_probes = Vec::new();
    let mut err = None;
    let found = halve_until_feasible(
        40,
        |g| match solve_step1_at(sys, &r0, g, cfg, backend) {
            Ok(pair) => pair,
            Err(e) => {
                err = Some(e);
                (ProgramStatus::Unknown, None)
            }
        },
        &mut init_probes,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let (gamma_init, _) = found.ok_or(RoaError::NoFeasibleGamma(40))?;

    let mut certificates: Vec<EraCertificate<T>> = Vec::new();
    let mut gamma_trace: Vec<T> = Vec::new();
    let mut chain: Vec<ContainmentLink<T>> = Vec::new();
    let mut r_k = r0;
    let mut gamma_lo = gamma_init;
    let mut slow_progress = 0usize;

    for k in 0..cfg.max_outer_iters {
        let mut local = cfg.clone();
        local.gamma_lo = gamma_lo;
        let s1 = step1_maximize_gamma(sys, &r_k, &local, backend)?;
        // A Step-1 gamma increase keeps every stored containment valid; the
        // latest link absorbs the increase into its Gram constant.
        if let Some(last) = chain.last_mut() {
            if !bump_link_gamma(last, s1.gamma) {
                // Re-prove at the final gamma if the constant monomial was
                // trimmed away (not expected with the default bases).
                let deg_m3 = last.r.degree().max(0) as usize;
                if let Some((m3, cond)) = prove_containment_raw(
                    &last.prev_r,
                    last.prev_gamma,
                    &last.r,
                    s1.gamma,
                    deg_m3,
                    cfg,
                    backend,
                )? {
                    last.gamma = s1.gamma;
                    last.m3 = m3;
                    last.cond = cond;
                }
            }
        }
        gamma_trace.push(s1.gamma);
        certificates.push(EraCertificate {
            var_names: sys.var_names.clone(),
            set: SetFn::Single(r_k.clone()),
            gamma: s1.gamma,
            v_n: s1.v_n.clone(),
            mults: vec![PieceMultipliers::plain(
                s1.p.clone(),
                s1.m0.clone(),
                s1.m1.clone(),
            )],
            conditions: s1.conditions.clone(),
            m3_chain: chain.clone(),
            eps_margin: cfg.eps_margin,
            iteration: k,
            gamma_trace: gamma_trace.clone(),
            config: cfg.clone(),
        });

        // Stopping criterion: relative gamma progress below 1e-3 twice in a
        // row, the iteration cap, or a Step-2 fixed point.
        if k > 0 {
            let prev = gamma_trace[k - 1];
            let rel = (s1.gamma - prev) / s1.gamma.max(real::<T>(1e-300));
            if rel < real::<T>(1e-3) {
                slow_progress += 1;
            } else {
                slow_progress = 0;
            }
            if slow_progress >= 2 {
                break;
            }
        }
        if k + 1 == cfg.max_outer_iters {
            break;
        }

        match step2_update_r(sys, &r_k, &s1, cfg, backend)? {
            Step2Outcome::FixedPoint { .. } => break,
            Step2Outcome::Updated { r_new, gamma_new, link, .. } => {
                chain.push(link);
                r_k = r_new;
                gamma_lo = gamma_new;
            }
        }
    }

    Ok(Alg3Run { certificates, gamma_trace })
}

/// Outcome of the rational Lyapunov recovery.
#[derive(Debug)]
pub enum RationalOutcome<T: Scalar> {
    Found {
        v_n: Polynomial<T>,
        p: Polynomial<T>,
        m0: CertPoly<T>,
        m1: CertPoly<T>,
        m2: CertPoly<T>,
        conditions: Vec<CondCert<T>>,
    },
    /// Proven infeasible: an expected outcome, not an error.
    Infeasible,
    /// Solver gave no certificate either way.
    Unknown,
}

/// Recovers a rational Lyapunov certificate `V_N / (gamma - R)` at fixed
/// `R`, `gamma`, and `p`, replacing `V_N`, `m0`, `m1` and adding `m2`.
pub fn recover_rational_lf<T: Scalar>(
    sys: &PolySystem<T>,
    r: &Polynomial<T>,
    gamma: T,
    p: &Polynomial<T>,
    cfg: &RunConfig<T>,
    backend: &dyn SdpBackend<T>,
) -> Result<RationalOutcome<T>, RoaError> {
    let (prog, ids) = rational_conditions(sys, r, gamma, p, cfg);
    let sol = solve_program(&prog, backend, &solve_opts(cfg))?;
    match sol.status {
        ProgramStatus::Optimal => Ok(RationalOutcome::Found {
            v_n: sol.poly(ids.vn).clone(),
            p: p.clone(),
            m0: cert_poly(&sol, ids.m0),
            m1: cert_poly(&sol, ids.m1),
            m2: cert_poly(&sol, ids.m2),
            conditions: collect_cond_certs(&prog, &sol),
        }),
        ProgramStatus::Infeasible => Ok(RationalOutcome::Infeasible),
        _ => Ok(RationalOutcome::Unknown),
    }
}

/// Rational recovery with a coordinate-swap fallback: first the standard
/// search at fixed `p`; then the swapped route holding `v_n` fixed; then a
/// coordinate ascent on the rational margin, alternating the two affine
/// routes while the achievable strictness margin improves.
pub fn recover_rational_lf_with_fallback<T: Scalar>(
    sys: &PolySystem<T>,
    r: &Polynomial<T>,
    gamma: T,
    p: &Polynomial<T>,
    v_n: &Polynomial<T>,
    cfg: &RunConfig<T>,
    backend: &dyn SdpBackend<T>,
) -> Result<RationalOutcome<T>, RoaError> {
    match recover_rational_lf(sys, r, gamma, p, cfg, backend)? {
        RationalOutcome::Infeasible => {}
        other => return Ok(other),
    }
    match rational_fixed_vn(sys, r, gamma, v_n, cfg, backend)? {
        RationalOutcome::Infeasible => {}
        other => return Ok(other),
    }

    // Margin ascent: maximize the rational margin delta with one coordinate
    // fixed per solve. Each half-step can only raise delta; stop on success
    // (delta >= eps_margin, then re-solve the clean program) or stall.
    let mut vn_cur = v_n.clone();
    let mut delta_prev = T::neg_infinity();
    for _round in 0..10 {
        // Fix V_N, search p (and multipliers).
        let (prog, ids) = rational_margin_program(sys, r, gamma, None, Some(&vn_cur), cfg);
        let sol = solve_program(&prog, backend, &solve_opts(cfg))?;
        if sol.status != ProgramStatus::Optimal {
            return Ok(RationalOutcome::Unknown);
        }
        let delta_b = sol.objective.unwrap_or(T::neg_infinity());
        let p_cur = sol.poly(ids.coord).clone();
        if delta_b >= cfg.eps_margin {
            match recover_rational_lf(sys, r, gamma, &p_cur, cfg, backend)? {
                RationalOutcome::Infeasible => {}
                other => return Ok(other),
            }
        }
        // Fix p, search V_N (and multipliers).
        let (prog, ids) = rational_margin_program(sys, r, gamma, Some(&p_cur), None, cfg);
        let sol = solve_program(&prog, backend, &solve_opts(cfg))?;
        if sol.status != ProgramStatus::Optimal {
            return Ok(RationalOutcome::Unknown);
        }
        let delta_a = sol.objective.unwrap_or(T::neg_infinity());
        vn_cur = sol.poly(ids.coord).clone();
        if delta_a >= cfg.eps_margin {
            match rational_fixed_vn(sys, r, gamma, &vn_cur, cfg, backend)? {
                RationalOutcome::Infeasible => {}
                other => return Ok(other),
            }
        }
        let progress = delta_a - delta_prev;
        if progress <= real::<T>(1e-6) * (T::one() + delta_a.abs()) {
            break;
        }
        delta_prev = delta_a;
    }
    Ok(RationalOutcome::Infeasible)
}

fn rational_fixed_vn<T: Scalar>(
    sys: &PolySystem<T>,
    r: &Polynomial<T>,
    gamma: T,
    v_n: &Polynomial<T>,
    cfg: &RunConfig<T>,
    backend: &dyn SdpBackend<T>,
) -> Result<RationalOutcome<T>, RoaError> {
    let (prog, ids) = rational_conditions_fixed_vn(sys, r, gamma, v_n, cfg);
    let sol = solve_program(&prog, backend, &solve_opts(cfg))?;
    match sol.status {
        ProgramStatus::Optimal => Ok(RationalOutcome::Found {
            v_n: v_n.clone(),
            p: sol.poly(ids.p).clone(),
            m0: cert_poly(&sol, ids.m0),
            m1: cert_poly(&sol, ids.m1),
            m2: cert_poly(&sol, ids.m2),
            conditions: collect_cond_certs(&prog, &sol),
        }),
        ProgramStatus::Infeasible => Ok(RationalOutcome::Infeasible),
        _ => Ok(RationalOutcome::Unknown),
    }
}

/// Applies a successful rational recovery to a certificate.
pub fn apply_rational<T: Scalar>(cert: &mut EraCertificate<T>, outcome: RationalOutcome<T>) -> bool {
    if let RationalOutcome::Found { v_n, p, m0, m1, m2, conditions } = outcome {
        cert.v_n = v_n;
        let m = &mut cert.mults[0];
        m.p = p;
        m.m0 = m0;
        m.m1 = m1;
        m.m2 = Some(m2);
        cert.conditions = conditions;
        true
    } else {
        false
    }
}

fn prove_containment_raw<T: Scalar>(
    r_prev: &Polynomial<T>,
    gamma_prev: T,
    r_new: &Polynomial<T>,
    gamma_new: T,
    deg_m3: usize,
    cfg: &RunConfig<T>,
    backend: &dyn SdpBackend<T>,
) -> Result<Option<(CertPoly<T>, CondCert<T>)>, RoaError> {
    let (prog, m3) = containment_conditions(r_prev, gamma_prev, r_new, gamma_new, deg_m3);
    let sol = solve_program(&prog, backend, &solve_opts(cfg))?;
    if sol.status != ProgramStatus::Optimal {
        return Ok(None);
    }
    let conds = collect_cond_certs(&prog, &sol);
    let cond = conds.into_iter().find(|c| c.name == "containment").unwrap();
    Ok(Some((cert_poly(&sol, m3), cond)))
}

/// Proves `E(r_prev, gamma_prev) <= E(r_new, gamma_new)` with an explicit
/// SOS multiplier, returning the containment link on success.
pub fn prove_containment<T: Scalar>(
    r_prev: &Polynomial<T>,
    gamma_prev: T,
    r_new: &Polynomial<T>,
    gamma_new: T,
    cfg: &RunConfig<T>,
    backend: &dyn SdpBackend<T>,
) -> Result<Option<ContainmentLink<T>>, RoaError> {
    let deg_m3 = (r_new.degree().max(r_prev.degree()).max(0)) as usize;
    Ok(prove_containment_raw(r_prev, gamma_prev, r_new, gamma_new, deg_m3, cfg, backend)?
        .map(|(m3, cond)| ContainmentLink {
            prev_r: r_prev.clone(),
            prev_gamma: gamma_prev,
            r: r_new.clone(),
            gamma: gamma_new,
            m3,
            cond,
        }))
}

struct PieceBundle<T: Scalar> {
    v_n: Polynomial<T>,
    mults: Vec<PieceMultipliers<T>>,
    conditions: Vec<CondCert<T>>,
}

fn solve_piecewise_at<T: Scalar>(
    sys: &PolySystem<T>,
    pieces: &[Polynomial<T>],
    gamma: T,
    cfg: &RunConfig<T>,
    backend: &dyn SdpBackend<T>,
    fixed_p: Option<&[Polynomial<T>]>,
) -> Result<(ProgramStatus, Option<PieceBundle<T>>), RoaError> {
    let (prog, ids) = piecewise_conditions(sys, pieces, gamma, cfg, fixed_p);
    let sol = solve_program(&prog, backend, &solve_opts(cfg))?;
    if sol.status != ProgramStatus::Optimal {
        return Ok((sol.status, None));
    }
    let mut mults = Vec::new();
    for (i, pid) in ids.per_piece.iter().enumerate() {
        let p = match fixed_p {
            Some(ps) => ps[i].clone(),
            None => sol.poly(pid.p).clone(),
        };
        mults.push(PieceMultipliers {
            p,
            m0: cert_poly(&sol, pid.m0),
            m1: cert_poly(&sol, pid.m1),
            m2: pid.m2.map(|id| cert_poly(&sol, id)),
            s_invariance: pid.s_invariance.iter().map(|&(_, id)| cert_poly(&sol, id)).collect(),
            s_positivity: pid.s_positivity.iter().map(|&(_, id)| cert_poly(&sol, id)).collect(),
            s_decrease: pid.s_decrease.iter().map(|&(_, id)| cert_poly(&sol, id)).collect(),
            s_rational: pid.s_rational.iter().map(|&(_, id)| cert_poly(&sol, id)).collect(),
        });
    }
    Ok((
        ProgramStatus::Optimal,
        Some(PieceBundle {
            v_n: sol.poly(ids.vn).clone(),
            mults,
            conditions: collect_cond_certs(&prog, &sol),
        }),
    ))
}

/// ERA search with a fixed piecewise-maximum set function: a gamma line
/// search over the localized conditions, then a fixed-gamma rational pass.
pub fn piecewise_era<T: Scalar>(
    sys: &PolySystem<T>,
    pieces: &[Polynomial<T>],
    cfg: &RunConfig<T>,
    backend: &dyn SdpBackend<T>,
) -> Result<EraCertificate<T>, RoaError> {
    assert!(!pieces.is_empty(), "at least one piece required");
    for p in pieces {
        assert_eq!(p.nvars(), sys.nvars(), "piece dimension mismatch");
    }
    let mut probes = Vec::new();
    let err: std::cell::RefCell<Option<RoaError>> = std::cell::RefCell::new(None);
    let mut solve_at = |g: T| match solve_piecewise_at(sys, pieces, g, cfg, backend, None) {
        Ok(pair) => pair,
        Err(e) => {
            *err.borrow_mut() = Some(e);
            (ProgramStatus::Unknown, None)
        }
    };
    let found = halve_until_feasible(40, &mut solve_at, &mut probes);
    if let Some(e) = err.borrow_mut().take() {
        return Err(e);
    }
    let (gamma_init, bundle) = found.ok_or(RoaError::NoFeasibleGamma(40))?;
    let (gamma, bundle) =
        bisect_gamma(gamma_init, cfg.gamma_hi, cfg.bisect_tol, bundle, &mut solve_at, &mut probes);
    if let Some(e) = err.borrow_mut().take() {
        return Err(e);
    }

    // Final fixed-gamma pass for the rational certificate, keeping the
    // accepted multipliers p_i.
    let fixed_p: Vec<Polynomial<T>> = bundle.mults.iter().map(|m| m.p.clone()).collect();
    let bundle = match solve_piecewise_at(sys, pieces, gamma, cfg, backend, Some(&fixed_p))? {
        (ProgramStatus::Optimal, Some(rat)) => rat,
        _ => bundle,
    };

    let gamma_trace: Vec<T> = {
        let mut g: Vec<T> = probes
            .iter()
            .filter(|p| p.status == ProgramStatus::Optimal)
            .map(|p| p.gamma)
            .collect();
        g.sort_by(|a, b| a.partial_cmp(b).unwrap());
        g
    };

    let set = if pieces.len() == 1 {
        SetFn::Single(pieces[0].clone())
    } else {
        SetFn::Max(pieces.to_vec())
    };
    Ok(EraCertificate {
        var_names: sys.var_names.clone(),
        set,
        gamma,
        v_n: bundle.v_n,
        mults: bundle.mults,
        conditions: bundle.conditions,
        m3_chain: Vec::new(),
        eps_margin: cfg.eps_margin,
        iteration: 0,
        gamma_trace,
        config: cfg.clone(),
    })
}
