//! Standard-form semidefinite programming.
//!
//! Problems are block-diagonal: `min <C, X>` subject to `<A_i, X> = b_i` and
//! `X` in a product of PSD cones and nonnegative orthants. The built-in
//! solver ([`BuiltinIpm`]) is a homogeneous self-dual interior-point method
//! (see [`ipm`]); alternative backends can be plugged in through
//! [`SdpBackend`].

pub mod ipm;

use crate::linalg::{jacobi_eigen, min_eig, SymMatrix};
use crate::scalar::{real, Scalar};

/// Cone block descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    /// Dense PSD block of the given side length.
    Psd(usize),
    /// A batch of nonnegative scalars (a diagonal block).
    Nonneg(usize),
}

impl Block {
    pub fn cone_degree(&self) -> usize {
        match *self {
            Block::Psd(s) => s,
            Block::Nonneg(k) => k,
        }
    }
}

/// One block of a block-diagonal symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockPart<T: Scalar> {
    Dense(SymMatrix<T>),
    Diag(Vec<T>),
}

/// Block-diagonal symmetric matrix conforming to a block structure.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSym<T: Scalar> {
    pub parts: Vec<BlockPart<T>>,
}

impl<T: Scalar> BlockSym<T> {
    pub fn zeros(blocks: &[Block]) -> Self {
        BlockSym {
            parts: blocks
                .iter()
                .map(|b| match *b {
                    Block::Psd(s) => BlockPart::Dense(SymMatrix::zeros(s)),
                    Block::Nonneg(k) => BlockPart::Diag(vec![T::zero(); k]),
                })
                .collect(),
        }
    }

    pub fn identity(blocks: &[Block]) -> Self {
        BlockSym {
            parts: blocks
                .iter()
                .map(|b| match *b {
                    Block::Psd(s) => BlockPart::Dense(SymMatrix::identity(s)),
                    Block::Nonneg(k) => BlockPart::Diag(vec![T::one(); k]),
                })
                .collect(),
        }
    }

    pub fn conforms(&self, blocks: &[Block]) -> bool {
        self.parts.len() == blocks.len()
            && self.parts.iter().zip(blocks).all(|(p, b)| match (p, b) {
                (BlockPart::Dense(m), Block::Psd(s)) => m.dim() == *s,
                (BlockPart::Diag(d), Block::Nonneg(k)) => d.len() == *k,
                _ => false,
            })
    }

    /// Trace inner product `<A, B> = sum_ij A_ij B_ij`.
    pub fn inner(&self, other: &BlockSym<T>) -> T {
        let mut s = T::zero();
        for (a, b) in self.parts.iter().zip(&other.parts) {
            match (a, b) {
                (BlockPart::Dense(x), BlockPart::Dense(y)) => s += x.inner(y),
                (BlockPart::Diag(x), BlockPart::Diag(y)) => {
                    for (xi, yi) in x.iter().zip(y) {
                        s += *xi * *yi;
                    }
                }
                _ => panic!("block structure mismatch"),
            }
        }
        s
    }

    pub fn add_scaled_mut(&mut self, other: &BlockSym<T>, c: T) {
        for (a, b) in self.parts.iter_mut().zip(&other.parts) {
            match (a, b) {
                (BlockPart::Dense(x), BlockPart::Dense(y)) => x.add_scaled_mut(y, c),
                (BlockPart::Diag(x), BlockPart::Diag(y)) => {
                    for (xi, yi) in x.iter_mut().zip(y) {
                        *xi += *yi * c;
                    }
                }
                _ => panic!("block structure mismatch"),
            }
        }
    }

    pub fn scale_mut(&mut self, c: T) {
        for p in &mut self.parts {
            match p {
                BlockPart::Dense(x) => x.scale_mut(c),
                BlockPart::Diag(x) => {
                    for v in x {
                        *v *= c;
                    }
                }
            }
        }
    }

    pub fn scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        out.scale_mut(c);
        out
    }

    pub fn norm_inf(&self) -> T {
        let mut worst = T::zero();
        for p in &self.parts {
            match p {
                BlockPart::Dense(x) => worst = worst.max(x.max_abs()),
                BlockPart::Diag(x) => {
                    for v in x {
                        worst = worst.max(v.abs());
                    }
                }
            }
        }
        worst
    }

    pub fn is_zero(&self) -> bool {
        self.norm_inf() == T::zero()
    }

    /// Smallest eigenvalue over all blocks (diagonal entries for Nonneg).
    pub fn min_eig(&self) -> T {
        let mut worst = T::infinity();
        for p in &self.parts {
            match p {
                BlockPart::Dense(m) => {
                    if m.dim() > 0 {
                        worst = worst.min(min_eig(m));
                    }
                }
                BlockPart::Diag(d) => {
                    for v in d {
                        worst = worst.min(*v);
                    }
                }
            }
        }
        worst
    }
}

/// Standard-form SDP data.
#[derive(Debug, Clone)]
pub struct SdpProblem<T: Scalar> {
    pub blocks: Vec<Block>,
    pub objective: BlockSym<T>,
    pub constraints: Vec<BlockSym<T>>,
    pub rhs: Vec<T>,
}

impl<T: Scalar> SdpProblem<T> {
    pub fn new(blocks: Vec<Block>) -> Self {
        let objective = BlockSym::zeros(&blocks);
        SdpProblem { blocks, objective, constraints: Vec::new(), rhs: Vec::new() }
    }

    pub fn add_constraint(&mut self, a: BlockSym<T>, b: T) {
        assert!(a.conforms(&self.blocks), "constraint does not conform to block structure");
        self.constraints.push(a);
        self.rhs.push(b);
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Total cone degree (sum of block degrees), the nu of the barrier.
    pub fn cone_degree(&self) -> usize {
        self.blocks.iter().map(|b| b.cone_degree()).sum()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.objective.conforms(&self.blocks) {
            return Err("objective does not conform to block structure".into());
        }
        for (i, a) in self.constraints.iter().enumerate() {
            if !a.conforms(&self.blocks) {
                return Err(format!("constraint {} does not conform to block structure", i));
            }
        }
        if self.rhs.len() != self.constraints.len() {
            return Err("rhs length does not match constraint count".into());
        }
        if self.blocks.iter().any(|b| b.cone_degree() == 0) {
            return Err("empty block".into());
        }
        Ok(())
    }

    /// Debug dump in a sparse text format, one entry per line:
    ///
    /// ```text
    /// m <num constraints>
    /// blocks <k>: s<size> for PSD, n<count> for nonnegative scalars
    /// b <i> <value>                  right-hand sides, i = 1..m
    /// e <i> <block> <row> <col> <v>  upper-triangle entries; i = 0 is the
    ///                                objective, i = 1..m the constraints
    /// ```
    pub fn dump_sparse(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("m {}\n", self.num_constraints()));
        let desc: Vec<String> = self
            .blocks
            .iter()
            .map(|b| match *b {
                Block::Psd(s) => format!("s{}", s),
                Block::Nonneg(k) => format!("n{}", k),
            })
            .collect();
        out.push_str(&format!("blocks {}: {}\n", self.blocks.len(), desc.join(" ")));
        for (i, b) in self.rhs.iter().enumerate() {
            out.push_str(&format!("b {} {}\n", i + 1, b));
        }
        let emit = |idx: usize, m: &BlockSym<T>, out: &mut String| {
            for (bi, part) in m.parts.iter().enumerate() {
                match part {
                    BlockPart::Dense(sm) => {
                        for r in 0..sm.dim() {
                            for c in r..sm.dim() {
                                let v = sm.get(r, c);
                                if v != T::zero() {
                                    out.push_str(&format!("e {} {} {} {} {}\n", idx, bi, r, c, v));
                                }
                            }
                        }
                    }
                    BlockPart::Diag(d) => {
                        for (r, v) in d.iter().enumerate() {
                            if *v != T::zero() {
                                out.push_str(&format!("e {} {} {} {} {}\n", idx, bi, r, r, v));
                            }
                        }
                    }
                }
            }
        };
        emit(0, &self.objective, &mut out);
        for (i, a) in self.constraints.iter().enumerate() {
            emit(i + 1, a, &mut out);
        }
        out
    }

    /// `[<A_i, X>]_i`.
    pub fn apply_a(&self, x: &BlockSym<T>) -> Vec<T> {
        self.constraints.iter().map(|a| a.inner(x)).collect()
    }

    /// `sum_i y_i A_i`.
    pub fn apply_at(&self, y: &[T]) -> BlockSym<T> {
        assert_eq!(y.len(), self.constraints.len());
        let mut out = BlockSym::zeros(&self.blocks);
        for (a, &yi) in self.constraints.iter().zip(y) {
            if yi != T::zero() {
                out.add_scaled_mut(a, yi);
            }
        }
        out
    }
}

/// Solver outcome classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
    NumericalFailure,
}

/// Per-iteration diagnostics (scaled candidate point).
#[derive(Debug, Clone)]
pub struct IterStats<T: Scalar> {
    pub pobj: T,
    pub dobj: T,
    pub mu: T,
    pub primal_res: T,
    pub dual_res: T,
}

/// Solution bundle returned by a backend.
///
/// On `PrimalInfeasible`, `y`/`s` hold the normalized improving ray
/// (`b^T y = 1`, `A^T y + s ~ 0`, `s >= 0`). On `DualInfeasible`, `x` holds
/// the normalized primal ray (`<C, x> = -1`, `A(x) ~ 0`, `x >= 0`).
#[derive(Debug, Clone)]
pub struct SdpSolution<T: Scalar> {
    pub status: SdpStatus,
    pub x: BlockSym<T>,
    pub y: Vec<T>,
    pub s: BlockSym<T>,
    pub objective: T,
    pub primal_res: T,
    pub dual_res: T,
    pub gap: T,
    pub iterations: usize,
    pub trace: Vec<IterStats<T>>,
}

/// Solver tolerances and iteration limits.
#[derive(Debug, Clone)]
pub struct SolveOptions<T: Scalar> {
    pub tol_feas: T,
    pub tol_gap: T,
    pub max_iters: usize,
    /// Fraction of the step to the cone boundary (default 0.98).
    pub step_frac: T,
    pub verbose: bool,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        SolveOptions {
            tol_feas: real(1e-8),
            tol_gap: real(1e-8),
            max_iters: 100,
            step_frac: real(0.98),
            verbose: false,
        }
    }
}

/// Pluggable solver contract over the [`SdpProblem`] shape.
pub trait SdpBackend<T: Scalar> {
    fn name(&self) -> &'static str;
    fn solve(&self, prob: &SdpProblem<T>, opts: &SolveOptions<T>) -> SdpSolution<T>;
}

/// The built-in homogeneous self-dual interior-point solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinIpm;

impl<T: Scalar> SdpBackend<T> for BuiltinIpm {
    fn name(&self) -> &'static str {
        "builtin"
    }

    fn solve(&self, prob: &SdpProblem<T>, opts: &SolveOptions<T>) -> SdpSolution<T> {
        ipm::solve(prob, opts)
    }
}

/// Selects a backend by name from the `ATTRAKT_SOLVER` environment variable.
pub fn backend_from_env<T: Scalar>() -> Result<Box<dyn SdpBackend<T>>, String> {
    match std::env::var("ATTRAKT_SOLVER").as_deref() {
        Err(_) | Ok("") | Ok("builtin") => Ok(Box::new(BuiltinIpm)),
        Ok(other) => Err(format!(
            "unknown SDP backend `{}` (available: builtin)",
            other
        )),
    }
}

/// Independent residual report for a claimed-optimal solution.
#[derive(Debug, Clone)]
pub struct SolutionCheck<T: Scalar> {
    pub primal_res: T,
    pub dual_res: T,
    pub gap: T,
    /// Minimum eigenvalue per block of X, via the Jacobi eigensolver.
    pub min_eigs: Vec<T>,
}

/// Recomputes primal/dual residuals and per-block minimum eigenvalues from
/// scratch (independent of the solver's internal bookkeeping).
pub fn verify_solution<T: Scalar>(prob: &SdpProblem<T>, sol: &SdpSolution<T>) -> SolutionCheck<T> {
    let ax = prob.apply_a(&sol.x);
    let mut primal_res = T::zero();
    for (axi, bi) in ax.iter().zip(&prob.rhs) {
        primal_res = primal_res.max((*axi - *bi).abs());
    }
    let mut dual = prob.objective.clone();
    dual.add_scaled_mut(&prob.apply_at(&sol.y), -T::one());
    dual.add_scaled_mut(&sol.s, -T::one());
    let dual_res = dual.norm_inf();
    let pobj = prob.objective.inner(&sol.x);
    let dobj: T = prob
        .rhs
        .iter()
        .zip(&sol.y)
        .fold(T::zero(), |acc, (b, y)| acc + *b * *y);
    let gap = (pobj - dobj).abs();
    let min_eigs = sol
        .x
        .parts
        .iter()
        .map(|p| match p {
            BlockPart::Dense(m) => {
                let (evals, _) = jacobi_eigen(m, real::<T>(1e-12), 50);
                evals.into_iter().fold(T::infinity(), |a, v| a.min(v))
            }
            BlockPart::Diag(d) => d.iter().fold(T::infinity(), |a, v| a.min(*v)),
        })
        .collect();
    SolutionCheck { primal_res, dual_res, gap, min_eigs }
}

/// Helper for building dense PSD constraint parts from full matrices.
pub fn sym_from_rows<T: Scalar>(rows: &[&[f64]]) -> SymMatrix<T> {
    let n = rows.len();
    SymMatrix::from_fn(n, |i, j| real::<T>(rows[i][j]))
}

#[cfg(test)]
mod tests;
