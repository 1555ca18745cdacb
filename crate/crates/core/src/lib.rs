//! Truncated matrix model of the Moyal plane with its heat semigroup,
//! double operator integrals, operator convexity checks, mild-solution
//! solvers and Fujita blow-up experiments, plus a commutative spectral
//! solver used as the θ = 0 reference.

pub mod algebra;
pub mod classical;
pub mod config;
pub mod convexity;
pub mod doi;
pub mod error;
pub mod evolve;
pub mod heat;
pub mod linalg;
pub mod lp;
pub mod par;
pub mod quadrature;
pub mod random;

pub use config::{HeatRoute, ModelConfig};
pub use error::{Error, Result};
pub use linalg::{Operator, C64};
