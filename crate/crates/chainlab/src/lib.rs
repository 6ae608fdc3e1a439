//! A laboratory for periodic anharmonic lattice chains.
//!
//! The crate implements two nearest-neighbor chains on the zero-mean manifold
//! (sum of momenta and of relative displacements both zero): a quartic chain
//! and the exponential (integrable) chain. On top of the dynamics it provides
//!
//! * closed-form conserved quantities of the exponential chain, built as
//!   traces of powers of a periodic Jacobi matrix and, equivalently, as local
//!   densities enumerated from weighted signed lattice paths ([`lax`]),
//! * spectral tools: the discrete Hartley transform, harmonic normal modes,
//!   circulant quadratic forms and their triangular decompositions
//!   ([`spectral`]),
//! * symplectic integrators for both flows ([`integrate`]),
//! * exact and Markov-chain samplers for the constrained Gibbs measures and a
//!   tilted product-measure approximation with quadrature oracles ([`gibbs`]),
//! * a Monte Carlo harness measuring variance scaling laws of the conserved
//!   quantities along both flows ([`experiment`]).

pub mod chain;
pub mod experiment;
pub mod gibbs;
pub mod integrate;
pub mod lax;
pub mod quad;
pub mod special;
pub mod spectral;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Parameter or precondition violation detected at construction time.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    /// A state left the zero-mean manifold beyond tolerance.
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    /// A floating-point quantity overflowed or became NaN.
    #[error("non-finite value in {0}")]
    NonFinite(String),
    /// Root bracketing failed while solving for the tilt parameter.
    #[error("no sign change bracketing the tilt root in [{0}, {1}]")]
    NoBracket(f64, f64),
    /// Adaptive quadrature could not reach the requested error estimate.
    #[error("quadrature did not converge: error estimate {0:.3e}")]
    QuadratureNonConvergent(f64),
    /// Rejection sampler exceeded the consecutive-rejection limit.
    #[error("rejection sampler stalled after {0} consecutive rejections")]
    RejectionStall(usize),
    /// The requested tilted density has no finite normalizer.
    #[error("non-normalizable density: {0}")]
    NonNormalizable(String),
    /// A triangular decomposition hit a non-positive diagonal entry.
    #[error("singular decomposition system: {0}")]
    SingularSystem(String),
    /// Two independent evaluation routes disagreed beyond tolerance.
    #[error("route mismatch: {0}")]
    AssertionMismatch(String),
    /// Power-law fit input had fewer than two distinct abscissae.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
