//! SOS programs: affine combinations of known polynomials and decision
//! polynomials constrained to be sums of squares (or identically zero),
//! compiled to block-diagonal SDPs.
//!
//! Decision polynomials are either *free* (one scalar variable per basis
//! monomial) or *sos-constrained* (a Gram matrix variable over a half-degree
//! basis). Expressions are affine in the decision objects by construction;
//! multiplying two decision-carrying expressions is a build error, mirroring
//! the structure that keeps every search step convex.
//!
//! The compiler eliminates the free scalar variables from the coefficient-
//! matching equalities by Gauss-Jordan pivoting, so the emitted SDP contains
//! only Gram blocks. Free values are recovered from the solved Grams by
//! back-substitution through the recorded pivot rows.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::linalg::SymMatrix;
use crate::poly::{Monomial, Polynomial};
use crate::scalar::{real, Scalar};
use crate::sdp::{
    Block, BlockPart, BlockSym, SdpBackend, SdpProblem, SdpSolution, SdpStatus, SolveOptions,
};

/// Handle for a decision polynomial within one program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct DecId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecKind {
    Free,
    Sos,
}

/// A decision polynomial: named, with an explicit monomial basis.
///
/// For `Free` the basis lists the support monomials (one scalar variable
/// each); for `Sos` it is the Gram basis, so the polynomial is
/// `Z^T Q Z` with `Q` a PSD matrix variable.
#[derive(Debug, Clone)]
pub struct DecisionPoly {
    pub id: DecId,
    pub name: String,
    pub kind: DecKind,
    pub basis: Vec<Monomial>,
}

/// Linear operator applied to a decision polynomial inside an expression.
#[derive(Debug, Clone)]
pub enum PolyOp<T: Scalar> {
    /// Pointwise product with a known polynomial.
    Mul(Polynomial<T>),
    /// Scaled Lie derivative along a known vector field:
    /// `scale * <grad(.), field>`.
    Lie { field: Vec<Polynomial<T>>, scale: T },
}

impl<T: Scalar> PolyOp<T> {
    /// Image of a single monomial under the operator.
    fn apply_mono(&self, m: &Monomial, nvars: usize) -> Polynomial<T> {
        match self {
            PolyOp::Mul(p) => {
                let mut unit = Polynomial::zero(nvars);
                unit.add_term(m.clone(), T::one());
                p * &unit
            }
            PolyOp::Lie { field, scale } => {
                let mut out = Polynomial::zero(nvars);
                for (i, fi) in field.iter().enumerate() {
                    if let Some((e, dm)) = m.partial(i) {
                        let mut part = Polynomial::zero(nvars);
                        part.add_term(dm, real::<T>(e as f64) * *scale);
                        out = &out + &(&part * fi);
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Term<T: Scalar> {
    pub dec: DecId,
    pub op: PolyOp<T>,
}

/// Affine expression in the decision polynomials.
#[derive(Debug, Clone)]
pub struct SosExpr<T: Scalar> {
    pub constant: Polynomial<T>,
    pub terms: Vec<Term<T>>,
}

impl<T: Scalar> SosExpr<T> {
    pub fn zero(nvars: usize) -> Self {
        SosExpr { constant: Polynomial::zero(nvars), terms: Vec::new() }
    }

    pub fn from_poly(p: Polynomial<T>) -> Self {
        SosExpr { constant: p, terms: Vec::new() }
    }

    pub fn plus_poly(mut self, p: &Polynomial<T>) -> Self {
        self.constant = &self.constant + p;
        self
    }

    /// Adds `mult * dec`.
    pub fn plus_mul(mut self, mult: Polynomial<T>, dec: DecId) -> Self {
        self.terms.push(Term { dec, op: PolyOp::Mul(mult) });
        self
    }

    /// Adds `scale * <grad(dec), field>`.
    pub fn plus_lie(mut self, field: &[Polynomial<T>], scale: T, dec: DecId) -> Self {
        self.terms.push(Term { dec, op: PolyOp::Lie { field: field.to_vec(), scale } });
        self
    }

    pub fn plus_expr(mut self, other: SosExpr<T>) -> Self {
        self.constant = &self.constant + &other.constant;
        self.terms.extend(other.terms);
        self
    }

    /// Product of two expressions. Fails if both carry decision objects:
    /// that would be bilinear in the decision variables.
    pub fn try_mul(a: &SosExpr<T>, b: &SosExpr<T>) -> Result<SosExpr<T>, CompileError> {
        if !a.terms.is_empty() && !b.terms.is_empty() {
            return Err(CompileError::Bilinear);
        }
        let (with_terms, known) = if a.terms.is_empty() { (b, a) } else { (a, b) };
        let c = &known.constant;
        let mut out = SosExpr::from_poly(&with_terms.constant * c);
        for t in &with_terms.terms {
            let op = match &t.op {
                PolyOp::Mul(p) => PolyOp::Mul(p * c),
                // c(x) * <grad d, f> = <grad d, c(x) f>
                PolyOp::Lie { field, scale } => PolyOp::Lie {
                    field: field.iter().map(|fi| fi * c).collect(),
                    scale: *scale,
                },
            };
            out.terms.push(Term { dec: t.dec, op });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Sos,
    Zero,
}

#[derive(Debug, Clone)]
pub struct SosConstraint<T: Scalar> {
    pub name: String,
    pub expr: SosExpr<T>,
    pub kind: ConstraintKind,
    /// Optional explicit cap on the Gram half-degree (None = auto-sized).
    pub gram_half_deg: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
pub enum Objective {
    Maximize(DecId),
    Minimize(DecId),
}

/// A declarative SOS program.
#[derive(Debug, Clone)]
pub struct SosProgram<T: Scalar> {
    nvars: usize,
    decisions: Vec<DecisionPoly>,
    constraints: Vec<SosConstraint<T>>,
    objective: Option<Objective>,
}

#[derive(Debug, Clone, Error)]
pub enum CompileError {
    #[error("expression is bilinear in decision polynomials")]
    Bilinear,
    #[error("constraint `{constraint}` has degree {got} exceeding 2 x half basis degree {cap}")]
    DegreeOverflow { constraint: String, got: usize, cap: usize },
    #[error("objective variable `{0}` is unconstrained; the objective is unbounded")]
    UnboundedObjective(String),
    #[error("objective must be a free scalar decision (basis = [1])")]
    BadObjective,
}

/// All monomials with `deg_min <= degree <= deg_max` in graded-lex order.
pub fn monomial_basis(nvars: usize, deg_min: usize, deg_max: usize) -> Vec<Monomial> {
    assert!(deg_min <= deg_max, "deg_min must not exceed deg_max");
    let mut out = Vec::new();
    let mut exps = vec![0u32; nvars];
    for d in deg_min..=deg_max {
        gen_degree(nvars, 0, d as u32, &mut exps, &mut out);
    }
    out
}

fn gen_degree(
    nvars: usize,
    pos: usize,
    remaining: u32,
    exps: &mut Vec<u32>,
    out: &mut Vec<Monomial>,
) {
    if pos + 1 == nvars {
        exps[pos] = remaining;
        out.push(Monomial::new(exps.clone()));
        exps[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        exps[pos] = e;
        gen_degree(nvars, pos + 1, remaining - e, exps, out);
        exps[pos] = 0;
    }
}

impl<T: Scalar> SosProgram<T> {
    pub fn new(nvars: usize) -> Self {
        SosProgram { nvars, decisions: Vec::new(), constraints: Vec::new(), objective: None }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn decisions(&self) -> &[DecisionPoly] {
        &self.decisions
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraint_name(&self, ci: usize) -> &str {
        &self.constraints[ci].name
    }

    /// Declares a free decision polynomial over the given support basis.
    pub fn free_poly(&mut self, name: &str, basis: Vec<Monomial>) -> DecId {
        let id = DecId(self.decisions.len());
        self.decisions.push(DecisionPoly {
            id,
            name: name.to_string(),
            kind: DecKind::Free,
            basis,
        });
        id
    }

    /// Declares a free scalar decision (basis = [1]).
    pub fn free_scalar(&mut self, name: &str) -> DecId {
        let one = Monomial::one(self.nvars);
        self.free_poly(name, vec![one])
    }

    /// Declares an sos-constrained decision polynomial with the given Gram
    /// basis. An empty basis degenerates to the zero polynomial.
    pub fn sos_poly(&mut self, name: &str, gram_basis: Vec<Monomial>) -> DecId {
        let id = DecId(self.decisions.len());
        let kind = if gram_basis.is_empty() { DecKind::Free } else { DecKind::Sos };
        self.decisions.push(DecisionPoly {
            id,
            name: name.to_string(),
            kind,
            basis: gram_basis,
        });
        id
    }

    pub fn sos_constraint(&mut self, name: &str, expr: SosExpr<T>) {
        self.constraints.push(SosConstraint {
            name: name.to_string(),
            expr,
            kind: ConstraintKind::Sos,
            gram_half_deg: None,
        });
    }

    /// SOS constraint with an explicit half-degree cap on the Gram basis.
    pub fn sos_constraint_capped(&mut self, name: &str, expr: SosExpr<T>, half_deg: usize) {
        self.constraints.push(SosConstraint {
            name: name.to_string(),
            expr,
            kind: ConstraintKind::Sos,
            gram_half_deg: Some(half_deg),
        });
    }

    pub fn zero_constraint(&mut self, name: &str, expr: SosExpr<T>) {
        self.constraints.push(SosConstraint {
            name: name.to_string(),
            expr,
            kind: ConstraintKind::Zero,
            gram_half_deg: None,
        });
    }

    pub fn maximize(&mut self, dec: DecId) {
        self.objective = Some(Objective::Maximize(dec));
    }

    pub fn minimize(&mut self, dec: DecId) {
        self.objective = Some(Objective::Minimize(dec));
    }

    pub fn compile(&self) -> Result<Compiled<T>, CompileError> {
        compile(self)
    }
}

// ---------------------------------------------------------------------------
// Compilation
// ---------------------------------------------------------------------------

enum TermImages<T: Scalar> {
    /// Images per free-variable index of the decision.
    Free(Vec<(usize, Polynomial<T>)>),
    /// Images per Gram pair (block, i, j, multiplicity).
    SosPairs(Vec<(usize, usize, usize, T, Polynomial<T>)>),
}

#[derive(Debug, Clone)]
enum FreeSol<T: Scalar> {
    /// `u = rhs - sum kappa_q * Q_entry` over (block, i, j, kappa).
    Eliminated { rhs: T, gram: Vec<(usize, usize, usize, T)> },
    /// Variable never appeared in any constraint.
    Zero,
}

struct RowBuild<T: Scalar> {
    free: Vec<T>,
    gram: BTreeMap<(usize, usize, usize), T>,
    rhs: T,
}

/// Compiled SDP plus the index maps needed to extract decision polynomials
/// and Gram certificates from a solution.
pub struct Compiled<T: Scalar> {
    pub problem: SdpProblem<T>,
    /// Set when elimination exposed an inconsistent equality (0 = nonzero):
    /// the program is infeasible without invoking the solver.
    pub proven_infeasible: Option<String>,
    nvars: usize,
    /// Gram basis per SDP block.
    bases: Vec<Vec<Monomial>>,
    /// Block index per sos-constrained decision.
    dec_block: BTreeMap<usize, usize>,
    /// Own Gram blocks per constraint index (empty for Zero constraints).
    constraint_blocks: Vec<Vec<usize>>,
    /// Free variable layout: (decision id, basis index) per variable.
    free_owner: Vec<(usize, usize)>,
    free_sols: Vec<FreeSol<T>>,
    decisions: Vec<(DecId, DecKind, Vec<Monomial>)>,
    objective: Option<Objective>,
}

fn compile<T: Scalar>(prog: &SosProgram<T>) -> Result<Compiled<T>, CompileError> {
    let nvars = prog.nvars;

    // Free variable layout.
    let mut free_owner: Vec<(usize, usize)> = Vec::new();
    let mut free_start: BTreeMap<usize, usize> = BTreeMap::new();
    for d in &prog.decisions {
        if d.kind == DecKind::Free {
            free_start.insert(d.id.0, free_owner.len());
            for k in 0..d.basis.len() {
                free_owner.push((d.id.0, k));
            }
        }
    }
    let nfree = free_owner.len();

    // Gram blocks: sos decisions first, then per-constraint blocks.
    let mut bases: Vec<Vec<Monomial>> = Vec::new();
    let mut dec_block: BTreeMap<usize, usize> = BTreeMap::new();
    for d in &prog.decisions {
        if d.kind == DecKind::Sos {
            dec_block.insert(d.id.0, bases.len());
            bases.push(d.basis.clone());
        }
    }

    // Per-term images, shared by span computation and row construction.
    let mut images: Vec<Vec<TermImages<T>>> = Vec::new();
    for c in &prog.constraints {
        let mut per_term = Vec::new();
        for t in &c.expr.terms {
            let d = &prog.decisions[t.dec.0];
            match d.kind {
                DecKind::Free => {
                    let start = free_start[&d.id.0];
                    let imgs = d
                        .basis
                        .iter()
                        .enumerate()
                        .map(|(k, m)| (start + k, t.op.apply_mono(m, nvars)))
                        .collect();
                    per_term.push(TermImages::Free(imgs));
                }
                DecKind::Sos => {
                    let blk = dec_block[&d.id.0];
                    let mut imgs = Vec::new();
                    for i in 0..d.basis.len() {
                        for j in i..d.basis.len() {
                            let prod = d.basis[i].mul(&d.basis[j]);
                            let mult = if i == j { T::one() } else { real::<T>(2.0) };
                            imgs.push((blk, i, j, mult, t.op.apply_mono(&prod, nvars)));
                        }
                    }
                    per_term.push(TermImages::SosPairs(imgs));
                }
            }
        }
        images.push(per_term);
    }

    // Own Gram bases per SOS constraint: span -> half-degree candidate ->
    // parity split -> diagonal-consistency trim.
    let mut constraint_blocks: Vec<Vec<usize>> = Vec::new();
    for (ci, c) in prog.constraints.iter().enumerate() {
        let mut span: BTreeSet<Monomial> = BTreeSet::new();
        for (m, _) in c.expr.constant.terms() {
            span.insert(m.clone());
        }
        for ti in &images[ci] {
            match ti {
                TermImages::Free(list) => {
                    for (_, img) in list {
                        for (m, _) in img.terms() {
                            span.insert(m.clone());
                        }
                    }
                }
                TermImages::SosPairs(list) => {
                    for (_, _, _, _, img) in list {
                        for (m, _) in img.terms() {
                            span.insert(m.clone());
                        }
                    }
                }
            }
        }
        if c.kind == ConstraintKind::Zero {
            constraint_blocks.push(Vec::new());
            continue;
        }
        let max_deg = span.iter().map(|m| m.degree()).max().unwrap_or(0) as usize;
        let half_auto = (max_deg + 1) / 2;
        if let Some(cap) = c.gram_half_deg {
            if half_auto > cap {
                return Err(CompileError::DegreeOverflow {
                    constraint: c.name.clone(),
                    got: max_deg,
                    cap: 2 * cap,
                });
            }
        }
        let half = c.gram_half_deg.unwrap_or(half_auto);
        let candidate = monomial_basis(nvars, 0, half);
        // Parity trim: an all-even span forces the Gram block-diagonal over
        // even and odd basis elements (cross pairs would produce odd terms).
        let all_even = span.iter().all(|m| m.is_even());
        let mut own: Vec<Vec<Monomial>> = if all_even {
            let (even, odd): (Vec<_>, Vec<_>) = candidate.into_iter().partition(|m| m.is_even());
            vec![even, odd]
        } else {
            vec![candidate]
        };
        // Diagonal-consistency trim: drop a basis element z when the row for
        // z^2 would force Q_zz = 0 (z^2 outside the span and reachable by no
        // other pair), iterated to a fixed point.
        loop {
            let mut pair_count: BTreeMap<Monomial, usize> = BTreeMap::new();
            for blk in &own {
                for i in 0..blk.len() {
                    for j in i..blk.len() {
                        *pair_count.entry(blk[i].mul(&blk[j])).or_insert(0) += 1;
                    }
                }
            }
            let mut changed = false;
            for blk in own.iter_mut() {
                blk.retain(|z| {
                    let sq = z.mul(z);
                    let keep = span.contains(&sq) || pair_count.get(&sq).copied().unwrap_or(0) > 1;
                    if !keep {
                        changed = true;
                    }
                    keep
                });
            }
            if !changed {
                break;
            }
        }
        own.retain(|b| !b.is_empty());
        let mut blocks_here = Vec::new();
        for b in own {
            blocks_here.push(bases.len());
            bases.push(b);
        }
        constraint_blocks.push(blocks_here);
    }

    // Rows: per constraint, one equation per monomial in the union of the
    // span and the own-Gram pair products.
    let new_row = || RowBuild::<T> {
        free: vec![T::zero(); nfree],
        gram: BTreeMap::new(),
        rhs: T::zero(),
    };
    let mut rows: Vec<RowBuild<T>> = Vec::new();
    for (ci, c) in prog.constraints.iter().enumerate() {
        let mut local: BTreeMap<Monomial, RowBuild<T>> = BTreeMap::new();
        for (m, &coeff) in c.expr.constant.terms() {
            local.entry(m.clone()).or_insert_with(new_row).rhs -= coeff;
        }
        for ti in &images[ci] {
            match ti {
                TermImages::Free(list) => {
                    for (var, img) in list {
                        for (m, &coeff) in img.terms() {
                            local.entry(m.clone()).or_insert_with(new_row).free[*var] += coeff;
                        }
                    }
                }
                TermImages::SosPairs(list) => {
                    for (blk, i, j, mult, img) in list {
                        for (m, &coeff) in img.terms() {
                            *local
                                .entry(m.clone())
                                .or_insert_with(new_row)
                                .gram
                                .entry((*blk, *i, *j))
                                .or_insert_with(T::zero) += *mult * coeff;
                        }
                    }
                }
            }
        }
        for &blk in &constraint_blocks[ci] {
            let basis = &bases[blk];
            for i in 0..basis.len() {
                for j in i..basis.len() {
                    let m = basis[i].mul(&basis[j]);
                    let mult = if i == j { T::one() } else { real::<T>(2.0) };
                    *local
                        .entry(m)
                        .or_insert_with(new_row)
                        .gram
                        .entry((blk, i, j))
                        .or_insert_with(T::zero) -= mult;
                }
            }
        }
        rows.extend(local.into_values());
    }

    // Gauss-Jordan elimination of the free variables (full pivoting).
    let mut scale = T::one();
    for r in &rows {
        for v in &r.free {
            scale = scale.max(v.abs());
        }
    }
    let tol_pivot = real::<T>(1e-9) * scale;
    let mut free_marks: Vec<Option<()>> = vec![None; nfree];
    let mut pivot_rows: Vec<(usize, usize)> = Vec::new(); // (row idx, var)
    let mut row_used = vec![false; rows.len()];
    loop {
        let mut best: Option<(usize, usize, T)> = None;
        for (ri, row) in rows.iter().enumerate() {
            if row_used[ri] {
                continue;
            }
            for (vi, coeff) in row.free.iter().enumerate() {
                if free_marks[vi].is_some() {
                    continue;
                }
                let mag = coeff.abs();
                if mag > tol_pivot && best.map(|(_, _, b)| mag > b).unwrap_or(true) {
                    best = Some((ri, vi, mag));
                }
            }
        }
        let (pr, pv, _) = match best {
            Some(b) => b,
            None => break,
        };
        let pivot = rows[pr].free[pv];
        let inv = T::one() / pivot;
        for v in rows[pr].free.iter_mut() {
            *v *= inv;
        }
        for v in rows[pr].gram.values_mut() {
            *v *= inv;
        }
        rows[pr].rhs *= inv;
        let prow_free = rows[pr].free.clone();
        let prow_gram = rows[pr].gram.clone();
        let prow_rhs = rows[pr].rhs;
        for (ri, row) in rows.iter_mut().enumerate() {
            if ri == pr {
                continue;
            }
            let c = row.free[pv];
            if c == T::zero() {
                continue;
            }
            for (a, b) in row.free.iter_mut().zip(&prow_free) {
                *a -= c * *b;
            }
            row.free[pv] = T::zero();
            for (k, v) in &prow_gram {
                *row.gram.entry(*k).or_insert_with(T::zero) -= c * *v;
            }
            row.rhs -= c * prow_rhs;
        }
        row_used[pr] = true;
        free_marks[pv] = Some(());
        pivot_rows.push((pr, pv));
    }
    // Pivot rows now define each eliminated variable in terms of Gram
    // entries only (other free columns were Jordan-eliminated).
    let drop_tol = real::<T>(1e-12) * scale.max(T::one());
    let mut free_sols: Vec<FreeSol<T>> = vec![FreeSol::Zero; nfree];
    for &(pr, pv) in &pivot_rows {
        let row = &rows[pr];
        let gram: Vec<(usize, usize, usize, T)> = row
            .gram
            .iter()
            .filter(|(_, v)| v.abs() > drop_tol)
            .map(|(&(b, i, j), &v)| (b, i, j, v))
            .collect();
        free_sols[pv] = FreeSol::Eliminated { rhs: row.rhs, gram };
    }

    // Emit the SDP.
    let blocks: Vec<Block> = bases.iter().map(|b| Block::Psd(b.len())).collect();
    let mut problem = SdpProblem::new(blocks.clone());
    let mut proven_infeasible = None;
    for (ri, row) in rows.iter().enumerate() {
        if row_used[ri] {
            continue;
        }
        let mut a = BlockSym::zeros(&blocks);
        let mut nonzero = false;
        for (&(blk, i, j), &kappa) in &row.gram {
            if kappa.abs() <= drop_tol {
                continue;
            }
            nonzero = true;
            let entry = if i == j { kappa } else { kappa * real::<T>(0.5) };
            match &mut a.parts[blk] {
                BlockPart::Dense(m) => m.add_to(i, j, entry),
                _ => unreachable!(),
            }
        }
        if !nonzero {
            if row.rhs.abs() > real::<T>(1e-9) * scale.max(T::one()) {
                proven_infeasible = Some(format!(
                    "inconsistent equality: 0 = {} after elimination",
                    row.rhs.to_f64().unwrap_or(f64::NAN)
                ));
            }
            continue;
        }
        problem.add_constraint(a, row.rhs);
    }

    // Objective on a free scalar decision.
    if let Some(obj) = prog.objective {
        let dec = match obj {
            Objective::Maximize(d) | Objective::Minimize(d) => d,
        };
        let d = &prog.decisions[dec.0];
        if d.kind != DecKind::Free || d.basis.len() != 1 || !d.basis[0].is_one() {
            return Err(CompileError::BadObjective);
        }
        let var = free_start[&d.id.0];
        match &free_sols[var] {
            FreeSol::Zero => return Err(CompileError::UnboundedObjective(d.name.clone())),
            FreeSol::Eliminated { gram, .. } => {
                // value = rhs - sum kappa Q; maximizing value minimizes
                // sum kappa Q.
                let sign = match obj {
                    Objective::Maximize(_) => T::one(),
                    Objective::Minimize(_) => -T::one(),
                };
                for &(blk, i, j, kappa) in gram {
                    let entry = if i == j { kappa } else { kappa * real::<T>(0.5) };
                    match &mut problem.objective.parts[blk] {
                        BlockPart::Dense(m) => m.add_to(i, j, entry * sign),
                        _ => unreachable!(),
                    }
                }
            }
        }
    }

    Ok(Compiled {
        problem,
        proven_infeasible,
        nvars,
        bases,
        dec_block,
        constraint_blocks,
        free_owner,
        free_sols,
        decisions: prog
            .decisions
            .iter()
            .map(|d| (d.id, d.kind, d.basis.clone()))
            .collect(),
        objective: prog.objective,
    })
}

/// Expands `Z^T Q Z` into a polynomial.
pub fn gram_to_poly<T: Scalar>(
    nvars: usize,
    basis: &[Monomial],
    q: &SymMatrix<T>,
) -> Polynomial<T> {
    assert_eq!(basis.len(), q.dim());
    let mut out = Polynomial::zero(nvars);
    for i in 0..basis.len() {
        for j in i..basis.len() {
            let mult = if i == j { T::one() } else { real::<T>(2.0) };
            out.add_term(basis[i].mul(&basis[j]), mult * q.get(i, j));
        }
    }
    out
}

impl<T: Scalar> Compiled<T> {
    fn free_values(&self, sol: &SdpSolution<T>) -> Vec<T> {
        self.free_sols
            .iter()
            .map(|fs| match fs {
                FreeSol::Zero => T::zero(),
                FreeSol::Eliminated { rhs, gram } => {
                    let mut v = *rhs;
                    for &(blk, i, j, kappa) in gram {
                        let q = match &sol.x.parts[blk] {
                            BlockPart::Dense(m) => m.get(i, j),
                            _ => unreachable!(),
                        };
                        v -= kappa * q;
                    }
                    v
                }
            })
            .collect()
    }

    /// Extracts a decision polynomial from a solved program.
    pub fn extract(&self, sol: &SdpSolution<T>, id: DecId) -> Polynomial<T> {
        let (_, kind, basis) = self
            .decisions
            .iter()
            .find(|(d, _, _)| *d == id)
            .expect("unknown decision id");
        match kind {
            DecKind::Free => {
                let values = self.free_values(sol);
                let mut p = Polynomial::zero(self.nvars);
                for (var, (owner, k)) in self.free_owner.iter().enumerate() {
                    if *owner == id.0 {
                        p.add_term(basis[*k].clone(), values[var]);
                    }
                }
                p
            }
            DecKind::Sos => {
                let blk = self.dec_block[&id.0];
                let q = match &sol.x.parts[blk] {
                    BlockPart::Dense(m) => m,
                    _ => unreachable!(),
                };
                gram_to_poly(self.nvars, &self.bases[blk], q)
            }
        }
    }

    /// Gram certificate(s) of constraint `ci` (one per parity block).
    pub fn constraint_grams(
        &self,
        sol: &SdpSolution<T>,
        ci: usize,
    ) -> Vec<(Vec<Monomial>, SymMatrix<T>)> {
        self.constraint_blocks[ci]
            .iter()
            .map(|&blk| {
                let q = match &sol.x.parts[blk] {
                    BlockPart::Dense(m) => m.clone(),
                    _ => unreachable!(),
                };
                (self.bases[blk].clone(), q)
            })
            .collect()
    }

    /// Gram certificate of an sos-constrained decision polynomial.
    pub fn decision_gram(
        &self,
        sol: &SdpSolution<T>,
        id: DecId,
    ) -> Option<(Vec<Monomial>, SymMatrix<T>)> {
        self.dec_block.get(&id.0).map(|&blk| {
            let q = match &sol.x.parts[blk] {
                BlockPart::Dense(m) => m.clone(),
                _ => unreachable!(),
            };
            (self.bases[blk].clone(), q)
        })
    }

    /// Program-level objective value (the extracted scalar).
    pub fn objective_value(&self, sol: &SdpSolution<T>) -> Option<T> {
        self.objective.map(|obj| {
            let dec = match obj {
                Objective::Maximize(d) | Objective::Minimize(d) => d,
            };
            self.extract(sol, dec).coeff(&Monomial::one(self.nvars))
        })
    }
}

/// Status of a solved SOS program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProgramStatus {
    /// Feasible (and optimal when an objective is present).
    Optimal,
    Infeasible,
    Unbounded,
    /// No certificate either way (iteration cap, numerics); callers must
    /// treat this conservatively.
    Unknown,
}

/// Solved program bundle: extracted polynomials and Gram certificates.
pub struct SosSolution<T: Scalar> {
    pub status: ProgramStatus,
    pub sdp_status: SdpStatus,
    pub iterations: usize,
    pub objective: Option<T>,
    polys: BTreeMap<usize, Polynomial<T>>,
    constraint_grams: Vec<Vec<(Vec<Monomial>, SymMatrix<T>)>>,
    decision_grams: BTreeMap<usize, (Vec<Monomial>, SymMatrix<T>)>,
}

impl<T: Scalar> SosSolution<T> {
    pub fn poly(&self, id: DecId) -> &Polynomial<T> {
        &self.polys[&id.0]
    }

    pub fn constraint_grams(&self, ci: usize) -> &[(Vec<Monomial>, SymMatrix<T>)] {
        &self.constraint_grams[ci]
    }

    pub fn decision_gram(&self, id: DecId) -> Option<&(Vec<Monomial>, SymMatrix<T>)> {
        self.decision_grams.get(&id.0)
    }
}

/// Compiles and solves a program, extracting everything on success.
pub fn solve_program<T: Scalar>(
    prog: &SosProgram<T>,
    backend: &dyn SdpBackend<T>,
    opts: &SolveOptions<T>,
) -> Result<SosSolution<T>, CompileError> {
    let compiled = prog.compile()?;
    if compiled.proven_infeasible.is_some() {
        return Ok(SosSolution {
            status: ProgramStatus::Infeasible,
            sdp_status: SdpStatus::PrimalInfeasible,
            iterations: 0,
            objective: None,
            polys: BTreeMap::new(),
            constraint_grams: vec![Vec::new(); prog.constraints.len()],
            decision_grams: BTreeMap::new(),
        });
    }
    let sol = backend.solve(&compiled.problem, opts);
    let status = match sol.status {
        SdpStatus::Optimal => ProgramStatus::Optimal,
        SdpStatus::PrimalInfeasible => ProgramStatus::Infeasible,
        SdpStatus::DualInfeasible => ProgramStatus::Unbounded,
        SdpStatus::MaxIterations | SdpStatus::NumericalFailure => ProgramStatus::Unknown,
    };
    let mut polys = BTreeMap::new();
    let mut decision_grams = BTreeMap::new();
    let mut constraint_grams = Vec::new();
    if status == ProgramStatus::Optimal {
        for (id, _, _) in &compiled.decisions {
            polys.insert(id.0, compiled.extract(&sol, *id));
            if let Some(g) = compiled.decision_gram(&sol, *id) {
                decision_grams.insert(id.0, g);
            }
        }
        for ci in 0..prog.constraints.len() {
            constraint_grams.push(compiled.constraint_grams(&sol, ci));
        }
    } else {
        constraint_grams = vec![Vec::new(); prog.constraints.len()];
    }
    Ok(SosSolution {
        status,
        sdp_status: sol.status,
        iterations: sol.iterations,
        objective: if status == ProgramStatus::Optimal {
            compiled.objective_value(&sol)
        } else {
            None
        },
        polys,
        constraint_grams,
        decision_grams,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::BuiltinIpm;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn opts() -> SolveOptions<f64> {
        SolveOptions::default()
    }

    fn x_poly(nvars: usize, i: usize) -> Polynomial<f64> {
        Polynomial::variable(nvars, i)
    }

    #[test]
    fn monomial_basis_counts_and_order() {
        let b = monomial_basis(2, 1, 1);
        assert_eq!(b, vec![Monomial::var(2, 0), Monomial::var(2, 1)]);
        let b = monomial_basis(2, 0, 2);
        assert_eq!(b.len(), 6);
        assert_eq!(b[0], Monomial::one(2));
        assert_eq!(b[3], Monomial::new(vec![2, 0]));
        assert_eq!(b[4], Monomial::new(vec![1, 1]));
        assert_eq!(b[5], Monomial::new(vec![0, 2]));
        assert_eq!(monomial_basis(3, 1, 2).len(), 9);
    }

    #[test]
    fn known_square_is_feasible_with_valid_gram() {
        // (x^2 + 1)^2 = x^4 + 2x^2 + 1
        let x = x_poly(1, 0);
        let p = {
            let sq = &(&x * &x) + &Polynomial::constant(1, 1.0);
            &sq * &sq
        };
        let mut prog = SosProgram::new(1);
        prog.sos_constraint("square", SosExpr::from_poly(p.clone()));
        let sol = solve_program(&prog, &BuiltinIpm, &opts()).unwrap();
        assert_eq!(sol.status, ProgramStatus::Optimal);
        // Gram identity round trip at 100 random points.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let z = [rng.gen_range(-2.0..2.0)];
            let mut total = 0.0;
            for (basis, q) in sol.constraint_grams(0) {
                let zvals: Vec<f64> = basis.iter().map(|m| m.eval(&z)).collect();
                for i in 0..zvals.len() {
                    for j in 0..zvals.len() {
                        total += zvals[i] * q.get(i, j) * zvals[j];
                    }
                }
            }
            assert!((total - p.evaluate(&z)).abs() < 1e-6);
        }
    }

    #[test]
    fn negative_square_is_infeasible() {
        let x = x_poly(1, 0);
        let p = (&(&x * &x)).scale(-1.0);
        let mut prog = SosProgram::new(1);
        prog.sos_constraint("neg", SosExpr::from_poly(p));
        let sol = solve_program(&prog, &BuiltinIpm, &opts()).unwrap();
        assert_eq!(sol.status, ProgramStatus::Infeasible);
    }

    #[test]
    fn scalar_maximization_hits_discriminant_bound() {
        // x^2 - 2 b x + 1 is SOS iff b^2 <= 1; maximize b -> 1.
        let mut prog = SosProgram::new(1);
        let b = prog.free_scalar("b");
        let x = x_poly(1, 0);
        let known = &(&x * &x) + &Polynomial::constant(1, 1.0);
        let expr = SosExpr::from_poly(known).plus_mul(x.scale(-2.0), b);
        prog.sos_constraint("disc", expr);
        prog.maximize(b);
        let sol = solve_program(&prog, &BuiltinIpm, &opts()).unwrap();
        assert_eq!(sol.status, ProgramStatus::Optimal);
        let bval = sol.objective.unwrap();
        assert!((bval - 1.0).abs() < 1e-6, "b = {}", bval);
        assert!((sol.poly(b).coeff(&Monomial::one(1)) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unused_decision_extracts_to_zero() {
        let mut prog = SosProgram::new(1);
        let unused = prog.free_poly("unused", monomial_basis(1, 0, 2));
        let x = x_poly(1, 0);
        prog.sos_constraint(
            "pos",
            SosExpr::from_poly(&(&x * &x) + &Polynomial::constant(1, 1.0)),
        );
        let sol = solve_program(&prog, &BuiltinIpm, &opts()).unwrap();
        assert_eq!(sol.status, ProgramStatus::Optimal);
        assert!(sol.poly(unused).is_zero());
    }

    #[test]
    fn bilinear_products_are_rejected() {
        let mut prog = SosProgram::<f64>::new(1);
        let a = prog.free_scalar("a");
        let b = prog.free_scalar("b");
        let ea = SosExpr::zero(1).plus_mul(Polynomial::constant(1, 1.0), a);
        let eb = SosExpr::zero(1).plus_mul(Polynomial::constant(1, 1.0), b);
        assert!(matches!(SosExpr::try_mul(&ea, &eb), Err(CompileError::Bilinear)));
        let known = SosExpr::from_poly(Polynomial::constant(1, 2.0));
        assert!(SosExpr::try_mul(&ea, &known).is_ok());
    }

    #[test]
    fn degree_overflow_reported_with_capped_basis() {
        let x = x_poly(1, 0);
        let p = x.pow(6);
        let mut prog = SosProgram::new(1);
        prog.sos_constraint_capped("capped", SosExpr::from_poly(p), 2);
        assert!(matches!(prog.compile(), Err(CompileError::DegreeOverflow { .. })));
    }

    #[test]
    fn lie_operator_matches_direct_expansion() {
        // Pin a free quadratic V by the zero constraint
        // -<grad V, f> - 2(x1^2 + x2^2) = 0 with f = (-x1, -x2);
        // the unique solution is V = x1^2 + x2^2.
        let nvars = 2;
        let f = vec![x_poly(2, 0).scale(-1.0), x_poly(2, 1).scale(-1.0)];
        let mut prog = SosProgram::new(nvars);
        let v = prog.free_poly("v", monomial_basis(nvars, 2, 2));
        let margin = Polynomial::sum_sq_vars(nvars).scale(-2.0);
        let expr = SosExpr::from_poly(margin).plus_lie(&f, -1.0, v);
        prog.zero_constraint("pin", expr);
        let sol = solve_program(&prog, &BuiltinIpm, &opts()).unwrap();
        assert_eq!(sol.status, ProgramStatus::Optimal);
        let vp = sol.poly(v);
        assert!((vp.coeff(&Monomial::new(vec![2, 0])) - 1.0).abs() < 1e-7);
        assert!((vp.coeff(&Monomial::new(vec![0, 2])) - 1.0).abs() < 1e-7);
        assert!(vp.coeff(&Monomial::new(vec![1, 1])).abs() < 1e-7);
    }

    #[test]
    fn extracted_sos_polys_are_nonnegative_at_samples() {
        let x = x_poly(1, 0);
        let mut prog = SosProgram::new(1);
        let m = prog.sos_poly("m", monomial_basis(1, 0, 1));
        // (x^2+2) - m is SOS with m SOS: feasible (e.g. m = x^2 + 1).
        let expr = SosExpr::from_poly(&(&x * &x) + &Polynomial::constant(1, 2.0))
            .plus_mul(Polynomial::constant(1, -1.0), m);
        prog.sos_constraint("slack", expr);
        let sol = solve_program(&prog, &BuiltinIpm, &opts()).unwrap();
        assert_eq!(sol.status, ProgramStatus::Optimal);
        let mp = sol.poly(m);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let z = [rng.gen_range(-3.0..3.0)];
            assert!(mp.evaluate(&z) >= -1e-6);
        }
        let (basis, q) = sol.decision_gram(m).unwrap();
        assert_eq!(basis.len(), q.dim());
        assert!(crate::linalg::min_eig(q) >= -1e-7);
    }

    #[test]
    fn coefficient_rows_reproduce_hand_built_gram() {
        // Apply the emitted equality rows to the hand-built Gram of
        // (x^2+1)^2: every row must hold exactly.
        let x = x_poly(1, 0);
        let target = {
            let sq = &(&x * &x) + &Polynomial::constant(1, 1.0);
            &sq * &sq
        };
        let mut prog = SosProgram::new(1);
        prog.sos_constraint("sq", SosExpr::from_poly(target.clone()));
        let compiled = prog.compile().unwrap();
        let mut x_val = BlockSym::zeros(&compiled.problem.blocks);
        for (bi, basis) in compiled.bases.iter().enumerate() {
            if let BlockPart::Dense(q) = &mut x_val.parts[bi] {
                // Q = g g^T with g the coefficients of (x^2 + 1) on this
                // basis slice.
                let g: Vec<f64> = basis
                    .iter()
                    .map(|m| if m.is_one() || m.degree() == 2 { 1.0 } else { 0.0 })
                    .collect();
                for i in 0..g.len() {
                    for j in 0..=i {
                        q.set(i, j, g[i] * g[j]);
                    }
                }
            }
        }
        let ax = compiled.problem.apply_a(&x_val);
        for (axi, bi) in ax.iter().zip(&compiled.problem.rhs) {
            assert!((axi - bi).abs() < 1e-12, "row mismatch: {} vs {}", axi, bi);
        }
    }

    #[test]
    fn pure_square_of_odd_monomial_is_feasible() {
        // x^2 has an all-even span; the parity split must keep the odd
        // block so the 1x1 Gram over {x} exists.
        let x = x_poly(1, 0);
        let mut prog = SosProgram::new(1);
        prog.sos_constraint("xsq", SosExpr::from_poly(&x * &x));
        let sol = solve_program(&prog, &BuiltinIpm, &opts()).unwrap();
        assert_eq!(sol.status, ProgramStatus::Optimal);
    }

    #[test]
    fn linear_monomial_is_proven_infeasible_at_compile() {
        // `x is SOS` reduces to an inconsistent equality after the trim.
        let x = x_poly(1, 0);
        let mut prog = SosProgram::new(1);
        prog.sos_constraint("lin", SosExpr::from_poly(x));
        let sol = solve_program(&prog, &BuiltinIpm, &opts()).unwrap();
        assert_eq!(sol.status, ProgramStatus::Infeasible);
    }
}
