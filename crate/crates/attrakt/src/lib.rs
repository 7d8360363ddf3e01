//! Certified inner estimates of the region of attraction (ERA) of equilibria
//! of polynomial dynamical systems.
//!
//! The toolkit searches for positively invariant sublevel sets `E(R, gamma) =
//! {x : R(x) <= gamma}` that are not required to be Lyapunov level sets. The
//! search is phrased as sum-of-squares feasibility programs, compiled to
//! semidefinite programs and solved with a built-in homogeneous self-dual
//! interior-point method. Accepted sets come with algebraic certificates
//! (multipliers and Gram matrices) plus a rational Lyapunov function
//! `V = V_N / (gamma - R)` when one exists, and every certificate can be
//! re-checked numerically by the [`verify`] module.
//!
//! The numeric core is generic over the scalar type (see [`scalar::Scalar`]);
//! the aliases below fix `f64`, which is what the solver and the CLI use.

pub mod linalg;
pub mod parse;
pub mod poly;
pub mod roa;
pub mod scalar;
pub mod sdp;
pub mod sos;
pub mod verify;

pub use scalar::Scalar;

/// Block-diagonal standard-form SDP over `f64`.
pub type SdpProblem = sdp::SdpProblem<f64>;
/// Solution returned by an SDP backend over `f64`.
pub type SdpSolution = sdp::SdpSolution<f64>;
/// Declarative SOS program over `f64`.
pub type SosProgram = sos::SosProgram<f64>;
/// ERA certificate over `f64`.
pub type EraCertificate = roa::EraCertificate<f64>;
/// Numerical verification report over `f64`.
pub type VerificationReport = verify::VerificationReport<f64>;

/// Sparse multivariate polynomial with `f64` coefficients.
pub type Polynomial = poly::Polynomial<f64>;
/// Exponent-vector monomial (scalar-free).
pub type Monomial = poly::Monomial;
/// Polynomial vector field with named variables, `f64` coefficients.
pub type PolySystem = parse::PolySystem<f64>;
/// Run configuration with `f64` tolerances.
pub type RunConfig = parse::RunConfig<f64>;

