//! H-type groups: construction and validation of the algebraic structures,
//! Carnot-Caratheodory geometry and geodesics, hypoelliptic heat kernels and
//! their gradients, sharp envelope scans, terminating polynomial semigroups,
//! and Monte Carlo diffusion oracles.

pub mod algebra;
pub mod bessel;
pub mod estimates;
pub mod geometry;
pub mod heatkernel;
pub mod mat;
pub mod polyop;
pub mod quad;
pub mod real;
pub mod simulate;

pub use algebra::{GroupPoint, HTypeStructure, VerificationReport};
pub use real::Real;

/// Default double-precision concrete types.
pub type HTypeStructure64 = algebra::HTypeStructure<f64>;
pub type GroupPoint64 = algebra::GroupPoint<f64>;
pub type Poly64 = polyop::Polynomial<f64>;
/// Exact-rational polynomials for identities checked without roundoff.
pub type PolyExact = polyop::Polynomial<num_rational::BigRational>;

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
