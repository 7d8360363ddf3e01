//! Region-of-attraction estimation with positively invariant sublevel sets.
//!
//! The pipeline certifies sets `E(R, gamma) = {x : R(x) <= gamma}` through
//! sum-of-squares multiplier conditions, enlarges them by alternating a
//! gamma line search (Step 1) with an update of the set function `R`
//! (Step 2), keeps the iterates nested through explicit containment
//! certificates, and optionally upgrades a certificate with a rational
//! Lyapunov function `V = V_N / (gamma - R)`.

mod algorithm;
pub mod cert;
mod encode;

#[cfg(test)]
mod tests;

pub use algorithm::{
    algorithm3, algorithm3_seeded, apply_rational, piecewise_era, prove_containment,
    recover_rational_lf, recover_rational_lf_with_fallback, step1_conditions,
    step1_maximize_gamma, step2_update_r, Alg3Run, Probe, RationalOutcome, Step1Result,
    Step2Outcome,
};
pub use encode::{reexpand_conditions, reexpand_containment, remark7_conditions};

/// Exposed for diagnostics and tests: the margin-relaxed rational program.
pub fn encode_rational_margin<T: Scalar>(
    sys: &crate::parse::PolySystem<T>,
    r: &Polynomial<T>,
    gamma: T,
    fixed_p: Option<&Polynomial<T>>,
    fixed_vn: Option<&Polynomial<T>>,
    cfg: &RunConfig<T>,
) -> (crate::sos::SosProgram<T>, encode::RationalMarginIds) {
    encode::rational_margin_program(sys, r, gamma, fixed_p, fixed_vn, cfg)
}

/// Exposed for diagnostics and tests: the rational-recovery program at
/// fixed `p`.
pub fn encode_rational<T: Scalar>(
    sys: &crate::parse::PolySystem<T>,
    r: &Polynomial<T>,
    gamma: T,
    p: &Polynomial<T>,
    cfg: &RunConfig<T>,
) -> (crate::sos::SosProgram<T>, encode::RationalIds) {
    encode::rational_conditions(sys, r, gamma, p, cfg)
}

use thiserror::Error;

use crate::linalg::SymMatrix;
use crate::parse::RunConfig;
use crate::poly::{Monomial, Polynomial};
use crate::scalar::Scalar;
use crate::sos::CompileError;

/// The sublevel-set function: a single polynomial or a pointwise maximum of
/// several pieces.
#[derive(Debug, Clone)]
pub enum SetFn<T: Scalar> {
    Single(Polynomial<T>),
    Max(Vec<Polynomial<T>>),
}

impl<T: Scalar> SetFn<T> {
    pub fn nvars(&self) -> usize {
        match self {
            SetFn::Single(p) => p.nvars(),
            SetFn::Max(ps) => ps[0].nvars(),
        }
    }

    pub fn pieces(&self) -> &[Polynomial<T>] {
        match self {
            SetFn::Single(p) => std::slice::from_ref(p),
            SetFn::Max(ps) => ps,
        }
    }

    pub fn is_piecewise(&self) -> bool {
        matches!(self, SetFn::Max(ps) if ps.len() > 1)
    }

    /// Pointwise value (maximum over pieces).
    pub fn eval(&self, x: &[T]) -> T {
        self.pieces()
            .iter()
            .map(|p| p.evaluate(x))
            .fold(T::neg_infinity(), |a, v| a.max(v))
    }

    /// Indices of pieces active at `x` within `tol` of the maximum.
    pub fn active_pieces(&self, x: &[T], tol: T) -> Vec<usize> {
        let vals: Vec<T> = self.pieces().iter().map(|p| p.evaluate(x)).collect();
        let top = vals.iter().fold(T::neg_infinity(), |a, v| a.max(*v));
        vals.iter()
            .enumerate()
            .filter(|(_, v)| top - **v <= tol)
            .map(|(i, _)| i)
            .collect()
    }
}

/// A PSD Gram certificate over an explicit monomial basis.
#[derive(Debug, Clone)]
pub struct GramCert<T: Scalar> {
    pub basis: Vec<Monomial>,
    pub q: SymMatrix<T>,
}

impl<T: Scalar> GramCert<T> {
    /// Expands `Z^T Q Z`.
    pub fn to_poly(&self, nvars: usize) -> Polynomial<T> {
        crate::sos::gram_to_poly(nvars, &self.basis, &self.q)
    }
}

/// A polynomial together with its Gram certificate when it is
/// sos-constrained.
#[derive(Debug, Clone)]
pub struct CertPoly<T: Scalar> {
    pub poly: Polynomial<T>,
    pub gram: Option<GramCert<T>>,
}

impl<T: Scalar> CertPoly<T> {
    pub fn plain(poly: Polynomial<T>) -> Self {
        CertPoly { poly, gram: None }
    }
}

/// Gram certificate(s) of one named SOS condition (two blocks when the
/// parity trim split the basis).
#[derive(Debug, Clone)]
pub struct CondCert<T: Scalar> {
    pub name: String,
    pub grams: Vec<GramCert<T>>,
}

impl<T: Scalar> CondCert<T> {
    /// Sum of the Gram expansions.
    pub fn to_poly(&self, nvars: usize) -> Polynomial<T> {
        let mut out = Polynomial::zero(nvars);
        for g in &self.grams {
            out = &out + &g.to_poly(nvars);
        }
        out
    }
}

/// Containment certificate across one outer iteration:
/// `(gamma - r) - m3 (prev_gamma - prev_r)` is SOS.
#[derive(Debug, Clone)]
pub struct ContainmentLink<T: Scalar> {
    pub prev_r: Polynomial<T>,
    pub prev_gamma: T,
    pub r: Polynomial<T>,
    pub gamma: T,
    pub m3: CertPoly<T>,
    pub cond: CondCert<T>,
}

/// Multipliers attached to one piece of the set function (a single entry
/// for plain certificates). The `s_*` vectors hold the region-localization
/// multipliers against the other pieces, in piece order with the own piece
/// skipped.
#[derive(Debug, Clone)]
pub struct PieceMultipliers<T: Scalar> {
    pub p: Polynomial<T>,
    pub m0: CertPoly<T>,
    pub m1: CertPoly<T>,
    pub m2: Option<CertPoly<T>>,
    pub s_invariance: Vec<CertPoly<T>>,
    pub s_positivity: Vec<CertPoly<T>>,
    pub s_decrease: Vec<CertPoly<T>>,
    pub s_rational: Vec<CertPoly<T>>,
}

impl<T: Scalar> PieceMultipliers<T> {
    pub fn plain(p: Polynomial<T>, m0: CertPoly<T>, m1: CertPoly<T>) -> Self {
        PieceMultipliers {
            p,
            m0,
            m1,
            m2: None,
            s_invariance: Vec::new(),
            s_positivity: Vec::new(),
            s_decrease: Vec::new(),
            s_rational: Vec::new(),
        }
    }
}

/// A certified inner estimate of the region of attraction.
#[derive(Debug, Clone)]
pub struct EraCertificate<T: Scalar> {
    pub var_names: Vec<String>,
    pub set: SetFn<T>,
    pub gamma: T,
    pub v_n: Polynomial<T>,
    /// One entry per piece of `set`.
    pub mults: Vec<PieceMultipliers<T>>,
    /// Gram certificates of the defining SOS conditions.
    pub conditions: Vec<CondCert<T>>,
    /// Nesting certificates accumulated across outer iterations.
    pub m3_chain: Vec<ContainmentLink<T>>,
    pub eps_margin: T,
    pub iteration: usize,
    /// Accepted gamma values in chronological order.
    pub gamma_trace: Vec<T>,
    pub config: RunConfig<T>,
}

impl<T: Scalar> EraCertificate<T> {
    pub fn nvars(&self) -> usize {
        self.var_names.len()
    }

    pub fn condition(&self, name: &str) -> Option<&CondCert<T>> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Error)]
pub enum RoaError {
    #[error("origin is not certifiably exponentially stable (Lyapunov equation has no PD solution)")]
    NotHurwitz,
    #[error("no feasible gamma found after {0} halvings from 1")]
    NoFeasibleGamma(usize),
    #[error("conditions infeasible at gamma_lo = {gamma}: {status}")]
    InfeasibleAtGammaLo { gamma: f64, status: String },
    #[error("solver failure during {context}: {status}")]
    Solver { context: String, status: String },
    #[error(transparent)]
    Compile(#[from] CompileError),
}
