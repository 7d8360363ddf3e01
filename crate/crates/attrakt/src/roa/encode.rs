//! SOS condition encodings for the invariant-set search.
//!
//! Each builder produces a feasibility program that is affine in the
//! decision polynomials. Strict inequalities carry an explicit margin
//! `eps * sum_i x_i^2`, so accepted certificates stay valid under solver
//! tolerance. Multiplier degrees are balanced so that every condition's
//! two sides reach the same (even) total degree; the `deg_*` keys of the
//! run configuration override the balanced choice.
//!
//! Multipliers that are forced to vanish at the origin by feasibility
//! (m0, m1, m2 when the set functions vanish there) get Gram bases without
//! the constant monomial; this removes a zero-eigenvalue face from every
//! compiled SDP without shrinking the certificate class.

use crate::parse::{PolySystem, RunConfig};
use crate::poly::{Monomial, Polynomial};
use crate::scalar::{real, Scalar};
use crate::sos::{monomial_basis, DecId, SosExpr, SosProgram};

use super::{ContainmentLink, EraCertificate};

pub(crate) fn ceil_even(d: usize) -> usize {
    d + (d & 1)
}

fn deg_of<T: Scalar>(p: &Polynomial<T>) -> usize {
    p.degree().max(0) as usize
}

fn override_deg<T: Scalar>(cfg: &RunConfig<T>, key: &str, balanced: usize) -> usize {
    ceil_even(cfg.deg_overrides.get(key).copied().unwrap_or(balanced))
}

/// `-eps * sum x_i^2`, the strictness margin added to positivity conditions.
fn neg_margin<T: Scalar>(nvars: usize, eps: T) -> Polynomial<T> {
    Polynomial::sum_sq_vars(nvars).scale(-eps)
}

/// Gram basis for an SOS multiplier of the given (even) degree.
fn mult_basis(nvars: usize, deg: usize, trim_constant: bool) -> Vec<Monomial> {
    let min_deg = usize::from(trim_constant);
    if deg / 2 < min_deg {
        return Vec::new();
    }
    monomial_basis(nvars, min_deg, deg / 2)
}

pub struct Step1Ids {
    pub vn: DecId,
    pub p: DecId,
    pub m0: DecId,
    pub m1: DecId,
}

/// Step-1 conditions at fixed `R` and `gamma`: find `V_N`, `p`, `m0`, `m1`
/// certifying that `E(R, gamma)` is a positively invariant ERA.
pub fn step1_conditions<T: Scalar>(
    sys: &PolySystem<T>,
    r: &Polynomial<T>,
    gamma: T,
    cfg: &RunConfig<T>,
) -> (SosProgram<T>, Step1Ids) {
    let n = sys.nvars();
    let f = &sys.f;
    let deg_r = deg_of(r);
    let deg_f = sys.max_degree().max(1) as usize;
    let margin = neg_margin(n, cfg.eps_margin);
    let gmr = &Polynomial::constant(n, gamma) - r; // gamma - R
    let lie_r = r.lie_derivative(f);

    let deg_p = override_deg(cfg, "p", ceil_even(deg_of(&lie_r)).saturating_sub(deg_r));
    let deg_m0 = override_deg(cfg, "m0", cfg.deg_vn.saturating_sub(deg_r));
    let deg_m1 = override_deg(
        cfg,
        "m1",
        ceil_even(cfg.deg_vn - 1 + deg_f).saturating_sub(deg_r),
    );

    let mut prog = SosProgram::new(n);
    let vn = prog.free_poly("V_N", monomial_basis(n, 1, cfg.deg_vn));
    let p = prog.free_poly("p", monomial_basis(n, 0, deg_p));
    let m0 = prog.sos_poly("m0", mult_basis(n, deg_m0, true));
    let m1 = prog.sos_poly("m1", mult_basis(n, deg_m1, true));

    // -<grad R, f> - p (gamma - R) - eps|x|^2 in SOS
    prog.sos_constraint(
        "inv_grad",
        SosExpr::from_poly(&(-&lie_r) + &margin).plus_mul(-&gmr, p),
    );
    // V_N - m0 (gamma - R) - eps|x|^2 in SOS
    prog.sos_constraint(
        "vn_pos",
        SosExpr::from_poly(margin.clone())
            .plus_mul(Polynomial::constant(n, T::one()), vn)
            .plus_mul(-&gmr, m0),
    );
    // -<grad V_N, f> - m1 (gamma - R) - eps|x|^2 in SOS
    prog.sos_constraint(
        "vn_dec",
        SosExpr::from_poly(margin).plus_lie(f, -T::one(), vn).plus_mul(-&gmr, m1),
    );

    (prog, Step1Ids { vn, p, m0, m1 })
}

pub struct Step2Ids {
    pub r: DecId,
    pub vn: DecId,
    pub m3: DecId,
}

/// Step-2 conditions at fixed multipliers: `R` becomes a decision variable,
/// the previous set stays contained through `m3`, and compactness is
/// enforced by `R >= c + kappa |x|^(2k)`.
pub fn step2_conditions<T: Scalar>(
    sys: &PolySystem<T>,
    r_hat: &Polynomial<T>,
    gamma: T,
    p_fixed: &Polynomial<T>,
    m0_fixed: &Polynomial<T>,
    m1_fixed: &Polynomial<T>,
    cfg: &RunConfig<T>,
) -> (SosProgram<T>, Step2Ids) {
    let n = sys.nvars();
    let f = &sys.f;
    let margin = neg_margin(n, cfg.eps_margin);
    let deg_m3 = override_deg(cfg, "m3", cfg.deg_r.saturating_sub(deg_of(r_hat)));
    let k = cfg.compact_k();

    let mut prog = SosProgram::new(n);
    let r = prog.free_poly("R", monomial_basis(n, 1, cfg.deg_r));
    let vn = prog.free_poly("V_N", monomial_basis(n, 1, cfg.deg_vn));
    // The identity update m3 = 1 must stay representable: keep the constant.
    let m3 = prog.sos_poly("m3", mult_basis(n, deg_m3, false));
    let c = prog.free_poly("c", monomial_basis(n, 0, 2 * k - 1));

    // -<grad R, f> - p (gamma - R) = -<grad R, f> - p gamma + p R
    prog.sos_constraint(
        "inv_grad",
        SosExpr::from_poly(&p_fixed.scale(-gamma) + &margin)
            .plus_lie(f, -T::one(), r)
            .plus_mul(p_fixed.clone(), r),
    );
    // V_N - m0 (gamma - R)
    prog.sos_constraint(
        "vn_pos",
        SosExpr::from_poly(&m0_fixed.scale(-gamma) + &margin)
            .plus_mul(Polynomial::constant(n, T::one()), vn)
            .plus_mul(m0_fixed.clone(), r),
    );
    // -<grad V_N, f> - m1 (gamma - R)
    prog.sos_constraint(
        "vn_dec",
        SosExpr::from_poly(&m1_fixed.scale(-gamma) + &margin)
            .plus_lie(f, -T::one(), vn)
            .plus_mul(m1_fixed.clone(), r),
    );
    // (gamma - R) - m3 (gamma - R_hat): the same gamma on both sides pins
    // the scale of (R, gamma); the growing set E(R_hat, gamma) must stay
    // inside the new sublevel set.
    let hat_level = &Polynomial::constant(n, gamma) - r_hat;
    prog.sos_constraint(
        "containment",
        SosExpr::from_poly(Polynomial::constant(n, gamma))
            .plus_mul(Polynomial::constant(n, -T::one()), r)
            .plus_mul(-&hat_level, m3),
    );
    // R - c - kappa (sum x_i^2)^k
    let norm_pow = Polynomial::sum_sq_vars(n).pow(k);
    prog.sos_constraint(
        "compact",
        SosExpr::from_poly(norm_pow.scale(-cfg.kappa))
            .plus_mul(Polynomial::constant(n, T::one()), r)
            .plus_mul(Polynomial::constant(n, -T::one()), c),
    );

    (prog, Step2Ids { r, vn, m3 })
}

pub struct RationalIds {
    pub vn: DecId,
    pub m0: DecId,
    pub m1: DecId,
    pub m2: DecId,
}

/// Rational Lyapunov recovery at fixed `R`, `gamma`, `p`: find `V_N` and
/// multipliers `m0`, `m1`, `m2` so that `V_N / (gamma - R)` is a Lyapunov
/// function on the open set.
pub fn rational_conditions<T: Scalar>(
    sys: &PolySystem<T>,
    r: &Polynomial<T>,
    gamma: T,
    p_fixed: &Polynomial<T>,
    cfg: &RunConfig<T>,
) -> (SosProgram<T>, RationalIds) {
    let n = sys.nvars();
    let f = &sys.f;
    let deg_r = deg_of(r);
    let deg_f = sys.max_degree().max(1) as usize;
    let margin = neg_margin(n, cfg.eps_margin);
    let gmr = &Polynomial::constant(n, gamma) - r;
    let lie_r = r.lie_derivative(f);

    let deg_m0 = override_deg(cfg, "m0", cfg.deg_vn.saturating_sub(deg_r));
    let d_lie_vn = ceil_even(cfg.deg_vn - 1 + deg_f);
    let deg_m1 = override_deg(cfg, "m1", d_lie_vn.saturating_sub(deg_r));
    let deg_m2 = override_deg(
        cfg,
        "m2",
        ceil_even(d_lie_vn.max(cfg.deg_vn + deg_of(p_fixed))).saturating_sub(deg_r),
    );

    let mut prog = SosProgram::new(n);
    let vn = prog.free_poly("V_N", monomial_basis(n, 1, cfg.deg_vn));
    let m0 = prog.sos_poly("m0", mult_basis(n, deg_m0, true));
    let m1 = prog.sos_poly("m1", mult_basis(n, deg_m1, true));
    let m2 = prog.sos_poly("m2", mult_basis(n, deg_m2, true));

    // Re-certified with the data p: -<grad R, f> - p (gamma - R).
    prog.sos_constraint(
        "inv_grad",
        SosExpr::from_poly(&(&(-&lie_r) - &(p_fixed * &gmr)) + &margin),
    );
    prog.sos_constraint(
        "vn_pos",
        SosExpr::from_poly(margin.clone())
            .plus_mul(Polynomial::constant(n, T::one()), vn)
            .plus_mul(-&gmr, m0),
    );
    prog.sos_constraint(
        "vn_dec",
        SosExpr::from_poly(margin.clone()).plus_lie(f, -T::one(), vn).plus_mul(-&gmr, m1),
    );
    // -<grad V_N, f> + V_N p - m2 (gamma - R)
    prog.sos_constraint(
        "rational",
        SosExpr::from_poly(margin)
            .plus_lie(f, -T::one(), vn)
            .plus_mul(p_fixed.clone(), vn)
            .plus_mul(-&gmr, m2),
    );

    (prog, RationalIds { vn, m0, m1, m2 })
}

/// Classical level-set conditions (the `R = V_N` degeneration): `V` is a
/// fixed Lyapunov candidate and only the decrease multiplier is searched.
pub fn remark7_conditions<T: Scalar>(
    sys: &PolySystem<T>,
    v_fixed: &Polynomial<T>,
    gamma: T,
    cfg: &RunConfig<T>,
) -> (SosProgram<T>, DecId) {
    let n = sys.nvars();
    let f = &sys.f;
    let margin = neg_margin(n, cfg.eps_margin);
    let gmv = &Polynomial::constant(n, gamma) - v_fixed;
    let lie_v = v_fixed.lie_derivative(f);
    let deg_m1 = override_deg(
        cfg,
        "m1",
        ceil_even(deg_of(&lie_v)).saturating_sub(deg_of(v_fixed)),
    );

    let mut prog = SosProgram::new(n);
    let m1 = prog.sos_poly("m1", mult_basis(n, deg_m1, true));
    prog.sos_constraint("vn_pos", SosExpr::from_poly(&v_fixed.clone() + &margin));
    prog.sos_constraint(
        "vn_dec",
        SosExpr::from_poly(&(-&lie_v) + &margin).plus_mul(-&gmv, m1),
    );
    (prog, m1)
}

/// Containment feasibility: `(gamma_new - r_new) - m3 (gamma_prev - r_prev)`
/// SOS with `m3` SOS.
pub fn containment_conditions<T: Scalar>(
    r_prev: &Polynomial<T>,
    gamma_prev: T,
    r_new: &Polynomial<T>,
    gamma_new: T,
    deg_m3: usize,
) -> (SosProgram<T>, DecId) {
    let n = r_prev.nvars();
    let mut prog = SosProgram::new(n);
    let m3 = prog.sos_poly("m3", mult_basis(n, ceil_even(deg_m3), false));
    let new_level = &Polynomial::constant(n, gamma_new) - r_new;
    let prev_level = &Polynomial::constant(n, gamma_prev) - r_prev;
    prog.sos_constraint(
        "containment",
        SosExpr::from_poly(new_level).plus_mul(-&prev_level, m3),
    );
    (prog, m3)
}

pub struct RationalVnIds {
    pub p: DecId,
    pub m0: DecId,
    pub m1: DecId,
    pub m2: DecId,
}

/// Rational recovery with the opposite coordinate fixed: `V_N` is data and
/// the multiplier `p` is searched together with `m0`, `m1`, `m2` (every
/// condition stays affine because the product `V_N p` has a known factor).
pub fn rational_conditions_fixed_vn<T: Scalar>(
    sys: &PolySystem<T>,
    r: &Polynomial<T>,
    gamma: T,
    v_n: &Polynomial<T>,
    cfg: &RunConfig<T>,
) -> (SosProgram<T>, RationalVnIds) {
    let n = sys.nvars();
    let f = &sys.f;
    let deg_r = deg_of(r);
    let margin = neg_margin(n, cfg.eps_margin);
    let gmr = &Polynomial::constant(n, gamma) - r;
    let lie_r = r.lie_derivative(f);
    let lie_vn = v_n.lie_derivative(f);

    let deg_p = override_deg(cfg, "p", ceil_even(deg_of(&lie_r)).saturating_sub(deg_r));
    let deg_m0 = override_deg(cfg, "m0", deg_of(v_n).saturating_sub(deg_r));
    let deg_m1 = override_deg(cfg, "m1", ceil_even(deg_of(&lie_vn)).saturating_sub(deg_r));
    let deg_m2 = override_deg(
        cfg,
        "m2",
        ceil_even(deg_of(&lie_vn).max(deg_of(v_n) + deg_p)).saturating_sub(deg_r),
    );

    let mut prog = SosProgram::new(n);
    let p = prog.free_poly("p", monomial_basis(n, 0, deg_p));
    let m0 = prog.sos_poly("m0", mult_basis(n, deg_m0, true));
    let m1 = prog.sos_poly("m1", mult_basis(n, deg_m1, true));
    let m2 = prog.sos_poly("m2", mult_basis(n, deg_m2, true));

    prog.sos_constraint(
        "inv_grad",
        SosExpr::from_poly(&(-&lie_r) + &margin).plus_mul(-&gmr, p),
    );
    prog.sos_constraint(
        "vn_pos",
        SosExpr::from_poly(&v_n.clone() + &margin).plus_mul(-&gmr, m0),
    );
    prog.sos_constraint(
        "vn_dec",
        SosExpr::from_poly(&(-&lie_vn) + &margin).plus_mul(-&gmr, m1),
    );
    prog.sos_constraint(
        "rational",
        SosExpr::from_poly(&(-&lie_vn) + &margin)
            .plus_mul(v_n.clone(), p)
            .plus_mul(-&gmr, m2),
    );

    (prog, RationalVnIds { p, m0, m1, m2 })
}

/// Decision handles of a margin-relaxed rational program.
pub struct RationalMarginIds {
    /// The searched coordinate: `V_N` when `p` is fixed, `p` otherwise.
    pub coord: DecId,
    pub m0: DecId,
    pub m1: DecId,
    pub m2: DecId,
    pub delta: DecId,
}

/// Margin-relaxed rational condition for the coordinate-ascent search: the
/// strictness margin of the rational condition becomes a maximized scalar
/// `delta` against the carrier `w = |x|^2 + (|x|^2)^(d/2)`, which dominates
/// the condition at every degree, so the relaxed program is always feasible
/// and the ascent is monotone.
pub fn rational_margin_program<T: Scalar>(
    sys: &PolySystem<T>,
    r: &Polynomial<T>,
    gamma: T,
    fixed_p: Option<&Polynomial<T>>,
    fixed_vn: Option<&Polynomial<T>>,
    cfg: &RunConfig<T>,
) -> (SosProgram<T>, RationalMarginIds) {
    assert!(fixed_p.is_some() != fixed_vn.is_some(), "fix exactly one coordinate");
    let n = sys.nvars();
    let f = &sys.f;
    let deg_r = deg_of(r);
    let deg_f = sys.max_degree().max(1) as usize;
    let margin = neg_margin(n, cfg.eps_margin);
    let gmr = &Polynomial::constant(n, gamma) - r;
    let lie_r = r.lie_derivative(f);

    let deg_vn = fixed_vn.map(deg_of).unwrap_or(cfg.deg_vn);
    let deg_p = fixed_p
        .map(deg_of)
        .unwrap_or_else(|| override_deg(cfg, "p", ceil_even(deg_of(&lie_r)).saturating_sub(deg_r)));
    let d_lie_vn = ceil_even(deg_vn.saturating_sub(1) + deg_f);
    let deg_m0 = override_deg(cfg, "m0", deg_vn.saturating_sub(deg_r));
    let deg_m1 = override_deg(cfg, "m1", d_lie_vn.saturating_sub(deg_r));
    let rat_deg = ceil_even(d_lie_vn.max(deg_vn + deg_p));
    let deg_m2 = override_deg(cfg, "m2", rat_deg.saturating_sub(deg_r));

    let mut prog = SosProgram::new(n);
    let m0 = prog.sos_poly("m0", mult_basis(n, deg_m0, true));
    let m1 = prog.sos_poly("m1", mult_basis(n, deg_m1, true));
    let m2 = prog.sos_poly("m2", mult_basis(n, deg_m2, true));
    let delta = prog.free_scalar("delta");
    let sumsq = Polynomial::sum_sq_vars(n);
    let carrier = &sumsq + &sumsq.pow(rat_deg / 2);

    match (fixed_p, fixed_vn) {
        (Some(p), None) => {
            let vn = prog.free_poly("V_N", monomial_basis(n, 1, cfg.deg_vn));
            prog.sos_constraint(
                "inv_grad",
                SosExpr::from_poly(&(&(-&lie_r) - &(p * &gmr)) + &margin),
            );
            prog.sos_constraint(
                "vn_pos",
                SosExpr::from_poly(margin.clone())
                    .plus_mul(Polynomial::constant(n, T::one()), vn)
                    .plus_mul(-&gmr, m0),
            );
            prog.sos_constraint(
                "vn_dec",
                SosExpr::from_poly(margin.clone())
                    .plus_lie(f, -T::one(), vn)
                    .plus_mul(-&gmr, m1),
            );
            prog.sos_constraint(
                "rational",
                SosExpr::zero(n)
                    .plus_lie(f, -T::one(), vn)
                    .plus_mul(p.clone(), vn)
                    .plus_mul(-&gmr, m2)
                    .plus_mul(-&carrier, delta),
            );
            prog.maximize(delta);
            (prog, RationalMarginIds { coord: vn, m0, m1, m2, delta })
        }
        (None, Some(vn)) => {
            let lie_vn = vn.lie_derivative(f);
            let p = prog.free_poly("p", monomial_basis(n, 0, deg_p));
            prog.sos_constraint(
                "inv_grad",
                SosExpr::from_poly(&(-&lie_r) + &margin).plus_mul(-&gmr, p),
            );
            prog.sos_constraint(
                "vn_pos",
                SosExpr::from_poly(&vn.clone() + &margin).plus_mul(-&gmr, m0),
            );
            prog.sos_constraint(
                "vn_dec",
                SosExpr::from_poly(&(-&lie_vn) + &margin).plus_mul(-&gmr, m1),
            );
            prog.sos_constraint(
                "rational",
                SosExpr::from_poly(-&lie_vn)
                    .plus_mul(vn.clone(), p)
                    .plus_mul(-&gmr, m2)
                    .plus_mul(-&carrier, delta),
            );
            prog.maximize(delta);
            (prog, RationalMarginIds { coord: p, m0, m1, m2, delta })
        }
        _ => unreachable!(),
    }
}

pub struct PieceIds {
    pub vn: DecId,
    pub per_piece: Vec<PieceDecIds>,
}

pub struct PieceDecIds {
    pub p: DecId,
    pub m0: DecId,
    pub m1: DecId,
    pub m2: Option<DecId>,
    /// (other piece index, multiplier id), per condition.
    pub s_invariance: Vec<(usize, DecId)>,
    pub s_positivity: Vec<(usize, DecId)>,
    pub s_decrease: Vec<(usize, DecId)>,
    pub s_rational: Vec<(usize, DecId)>,
}

/// Piecewise conditions for `R_M = max(R_1..R_d)` at fixed pieces: the
/// invariance, positivity, and decrease conditions of the plain case are
/// localized to each region `M_i = {R_i >= R_j}` with S-procedure
/// multipliers against `R_i - R_j`.
///
/// With `fixed_p` the invariance condition is data (the final rational
/// pass), and a per-piece rational condition with `m2_i` is added.
pub fn piecewise_conditions<T: Scalar>(
    sys: &PolySystem<T>,
    pieces: &[Polynomial<T>],
    gamma: T,
    cfg: &RunConfig<T>,
    fixed_p: Option<&[Polynomial<T>]>,
) -> (SosProgram<T>, PieceIds) {
    let n = sys.nvars();
    let f = &sys.f;
    let d = pieces.len();
    let margin = neg_margin(n, cfg.eps_margin);
    let deg_f = sys.max_degree().max(1) as usize;
    let origin = vec![T::zero(); n];
    let all_zero_at_origin = pieces
        .iter()
        .all(|ri| ri.evaluate(&origin).abs() <= real::<T>(1e-9));

    let mut prog = SosProgram::new(n);
    let vn = prog.free_poly("V_N", monomial_basis(n, 1, cfg.deg_vn));
    let mut per_piece = Vec::with_capacity(d);

    for i in 0..d {
        let ri = &pieces[i];
        let deg_ri = deg_of(ri);
        let gmr_i = &Polynomial::constant(n, gamma) - ri;
        let lie_i = ri.lie_derivative(f);
        let deg_inv = ceil_even(deg_of(&lie_i).max(deg_ri));
        let d_lie_vn = ceil_even(cfg.deg_vn - 1 + deg_f);
        let deg_p = override_deg(cfg, "p", deg_inv.saturating_sub(deg_ri));
        let deg_m0 = override_deg(cfg, "m0", cfg.deg_vn.saturating_sub(deg_ri));
        let deg_m1 = override_deg(cfg, "m1", d_lie_vn.saturating_sub(deg_ri));
        let tag = |base: &str| format!("{}_{}", base, i + 1);

        let p = prog.free_poly(&tag("p"), monomial_basis(n, 0, deg_p));
        let m0 = prog.sos_poly(&tag("m0"), mult_basis(n, deg_m0, all_zero_at_origin));
        let m1 = prog.sos_poly(&tag("m1"), mult_basis(n, deg_m1, all_zero_at_origin));

        let others: Vec<usize> = (0..d).filter(|&j| j != i).collect();
        let mut s_invariance = Vec::new();
        let mut s_positivity = Vec::new();
        let mut s_decrease = Vec::new();
        let mut s_rational = Vec::new();

        // Region localization terms sum_j s_ij (R_i - R_j); on M_i the
        // differences are nonnegative, so subtracting them is free there.
        let diffs: Vec<(usize, Polynomial<T>)> =
            others.iter().map(|&j| (j, ri - &pieces[j])).collect();
        let s_deg = |expr_deg: usize, diff: &Polynomial<T>| {
            override_deg(cfg, "s", expr_deg.saturating_sub(deg_of(diff)))
        };

        // (a) invariance: -<grad R_i, f> - p_i (gamma - R_i) - sum s (R_i - R_j)
        let mut inv_expr = if let Some(ps) = fixed_p {
            SosExpr::from_poly(&(&(-&lie_i) - &(&ps[i] * &gmr_i)) + &margin)
        } else {
            SosExpr::from_poly(&(-&lie_i) + &margin).plus_mul(-&gmr_i, p)
        };
        for (j, diff) in &diffs {
            let s = prog.sos_poly(
                &format!("s_inv_{}_{}", i + 1, j + 1),
                mult_basis(n, s_deg(deg_inv, diff), false),
            );
            inv_expr = inv_expr.plus_mul(-diff, s);
            s_invariance.push((*j, s));
        }
        prog.sos_constraint(&tag("inv_grad"), inv_expr);

        // (b) positivity: V_N - m0_i (gamma - R_i) - sum s (R_i - R_j)
        let mut pos_expr = SosExpr::from_poly(margin.clone())
            .plus_mul(Polynomial::constant(n, T::one()), vn)
            .plus_mul(-&gmr_i, m0);
        for (j, diff) in &diffs {
            let s = prog.sos_poly(
                &format!("s_pos_{}_{}", i + 1, j + 1),
                mult_basis(n, s_deg(cfg.deg_vn, diff), false),
            );
            pos_expr = pos_expr.plus_mul(-diff, s);
            s_positivity.push((*j, s));
        }
        prog.sos_constraint(&tag("vn_pos"), pos_expr);

        // (c) decrease: -<grad V_N, f> - m1_i (gamma - R_i) - sum s (R_i - R_j)
        let mut dec_expr = SosExpr::from_poly(margin.clone())
            .plus_lie(f, -T::one(), vn)
            .plus_mul(-&gmr_i, m1);
        for (j, diff) in &diffs {
            let s = prog.sos_poly(
                &format!("s_dec_{}_{}", i + 1, j + 1),
                mult_basis(n, s_deg(d_lie_vn, diff), false),
            );
            dec_expr = dec_expr.plus_mul(-diff, s);
            s_decrease.push((*j, s));
        }
        prog.sos_constraint(&tag("vn_dec"), dec_expr);

        // (c') rational: -<grad V_N, f> + V_N p_i - m2_i (gamma - R_i) - ...
        let m2 = if let Some(ps) = fixed_p {
            let deg_m2 = override_deg(
                cfg,
                "m2",
                ceil_even(d_lie_vn.max(cfg.deg_vn + deg_of(&ps[i]))).saturating_sub(deg_ri),
            );
            let m2 = prog.sos_poly(&tag("m2"), mult_basis(n, deg_m2, all_zero_at_origin));
            let mut rat_expr = SosExpr::from_poly(margin.clone())
                .plus_lie(f, -T::one(), vn)
                .plus_mul(ps[i].clone(), vn)
                .plus_mul(-&gmr_i, m2);
            let rat_deg = ceil_even(d_lie_vn.max(cfg.deg_vn + deg_of(&ps[i])));
            for (j, diff) in &diffs {
                let s = prog.sos_poly(
                    &format!("s_rat_{}_{}", i + 1, j + 1),
                    mult_basis(n, s_deg(rat_deg, diff), false),
                );
                rat_expr = rat_expr.plus_mul(-diff, s);
                s_rational.push((*j, s));
            }
            prog.sos_constraint(&tag("rational"), rat_expr);
            Some(m2)
        } else {
            None
        };

        per_piece.push(PieceDecIds {
            p,
            m0,
            m1,
            m2,
            s_invariance,
            s_positivity,
            s_decrease,
            s_rational,
        });
    }

    (prog, PieceIds { vn, per_piece })
}

/// Rebuilds each named SOS condition of a certificate as a polynomial, so it
/// can be compared against the stored Gram expansions.
pub fn reexpand_conditions<T: Scalar>(
    cert: &EraCertificate<T>,
    sys: &PolySystem<T>,
) -> Vec<(String, Polynomial<T>)> {
    let n = cert.nvars();
    let f = &sys.f;
    let margin = neg_margin(n, cert.eps_margin);
    let mut out = Vec::new();
    let pieces = cert.set.pieces();
    let piecewise = cert.set.is_piecewise();
    for (i, ri) in pieces.iter().enumerate() {
        let mults = &cert.mults[i];
        let gmr = &Polynomial::constant(n, cert.gamma) - ri;
        let lie_i = ri.lie_derivative(f);
        let tag = |base: &str| {
            if piecewise {
                format!("{}_{}", base, i + 1)
            } else {
                base.to_string()
            }
        };
        let local = |s_list: &[super::CertPoly<T>]| {
            // sum_j s_ij (R_i - R_j), with s entries aligned to other pieces.
            let mut acc = Polynomial::zero(n);
            let others: Vec<usize> = (0..pieces.len()).filter(|&j| j != i).collect();
            for (s, &j) in s_list.iter().zip(&others) {
                acc = &acc + &(&s.poly * &(ri - &pieces[j]));
            }
            acc
        };

        let mut inv = &(-&lie_i) - &(&mults.p * &gmr);
        inv = &(&inv + &margin) - &local(&mults.s_invariance);
        out.push((tag("inv_grad"), inv));

        let mut pos = &cert.v_n - &(&mults.m0.poly * &gmr);
        pos = &(&pos + &margin) - &local(&mults.s_positivity);
        out.push((tag("vn_pos"), pos));

        let mut dec = -&cert.v_n.lie_derivative(f);
        dec = &(&dec - &(&mults.m1.poly * &gmr)) + &margin;
        dec = &dec - &local(&mults.s_decrease);
        out.push((tag("vn_dec"), dec));

        if let Some(m2) = &mults.m2 {
            let mut rat = -&cert.v_n.lie_derivative(f);
            rat = &rat + &(&cert.v_n * &mults.p);
            rat = &(&rat - &(&m2.poly * &gmr)) + &margin;
            rat = &rat - &local(&mults.s_rational);
            out.push((tag("rational"), rat));
        }
    }
    out
}

/// Rebuilds the containment identity of a chain link:
/// `(gamma - r) - m3 (prev_gamma - prev_r)`.
pub fn reexpand_containment<T: Scalar>(link: &ContainmentLink<T>) -> Polynomial<T> {
    let n = link.r.nvars();
    let new_level = &Polynomial::constant(n, link.gamma) - &link.r;
    let prev_level = &Polynomial::constant(n, link.prev_gamma) - &link.prev_r;
    &new_level - &(&link.m3.poly * &prev_level)
}
