//! Numerical laboratory for parabolic germs tangent to the identity.
//!
//! The crate studies germs `f(z) = z + a1 z^2 + ...` fixing 0, through four
//! connected instruments:
//!
//! * [`germ`] — germ arithmetic: closed-form and truncated-series evaluation,
//!   composition, inversion, conjugation, iteration, formal classification,
//!   and the attracting/repelling petals the sectorial theory lives on.
//! * [`orbitgeom`] — geometry of orbit neighborhoods: directed (complex-moment)
//!   areas of ε-neighborhoods of orbits, their tail/nucleus split, a quadrature
//!   oracle, functional-equation checks, and recovery of orbit data from the
//!   area function alone.
//! * [`cohom`] — cohomological (generalized Abel) equations `H∘f - H = g`:
//!   formal solutions, sectorial representatives on the petals, cocycles of
//!   their mismatches, a Borel–Laplace cross-check for the model germ, and
//!   global constructors realizing prescribed solutions.
//! * [`principal`] / [`moduli`] — principal parts of the directed-area
//!   expansion, and moment/Ecalle–Voronin conjugacy invariants built from the
//!   cocycles.
//!
//! Submodules [`hp`], [`series`], [`numerics`] provide the arbitrary-precision
//! complex scalar, truncated power series algebra, and shared numeric kernels
//! (least squares, quadrature, Richardson ladders). [`verify`] bundles the
//! acceptance checks the `germlab verify` subcommand and the `acceptance`
//! integration test both run.

pub mod cohom;
pub mod germ;
pub mod hp;
pub mod moduli;
pub mod numerics;
pub mod orbitgeom;
pub mod principal;
pub mod series;
pub mod verify;

use thiserror::Error;

/// Crate-wide error type. Variants mirror the failure modes of the public
/// operations; [`Error::exit_code`] maps them onto the CLI exit convention
/// (2 = precondition violated, 3 = numerical failure, 4 = resource budget).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain: {0}")]
    Domain(String),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("range: {0}")]
    Range(String),
    #[error("iterate escaped petal: {0}")]
    Escape(String),
    #[error("orbit gaps never monotone: {0}")]
    NonMonotone(String),
    #[error("not parabolic: {0}")]
    NotParabolic(String),
    #[error("obstruction: {0}")]
    Obstruction(String),
    #[error("ray: {0}")]
    Ray(String),
    #[error("branch: {0}")]
    Branch(String),
    #[error("truncation: {0}")]
    Truncation(String),
    #[error("precision: {0}")]
    Precision(String),
    #[error("convergence: {0}")]
    Convergence(String),
    #[error("quadrature: {0}")]
    Quadrature(String),
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("fit: {0}")]
    Fit(String),
    #[error("not invertible: {0}")]
    NotInvertible(String),
    #[error("inversion: {0}")]
    Inversion(String),
    #[error("detection: {0}")]
    Detection(String),
    #[error("resource budget exceeded: {0}")]
    Resource(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code for this error: inputs that violate documented
    /// preconditions exit 2, numerical failures (convergence, precision,
    /// conditioning) exit 3, exhausted budgets exit 4.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            Domain(_) | Precondition(_) | Range(_) | Escape(_) | NonMonotone(_)
            | NotParabolic(_) | Obstruction(_) | Ray(_) | Branch(_) | Io(_) => 2,
            Truncation(_) | Precision(_) | Convergence(_) | Quadrature(_)
            | IllConditioned(_) | Fit(_) | NotInvertible(_) | Inversion(_) | Detection(_) => 3,
            Resource(_) => 4,
        }
    }
}
