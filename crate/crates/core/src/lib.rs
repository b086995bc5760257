//! Signed distance recovery for implicitly represented interfaces.
//!
//! Given a level set function `phi` whose zero set is an interface `Γ`, this
//! crate trains a small augmented network that outputs both a signed distance
//! estimate `u` and a unit vector field `V` approximating `∇u`, and it ships the
//! numerical baselines and oracles needed to judge the result:
//!
//! - [`field`]: the catalog of analytic level set functions, exact and
//!   point-cloud distance oracles, normalization, collocation grids and
//!   interface sampling.
//! - [`diff`]: a scalar reverse-mode tape with nestable dual numbers, used for
//!   general gradients and as the independent route for gradient checks.
//! - [`net`]: network parameters, the sign/unit-norm constrained heads and the
//!   batched forward/backward engine used in training.
//! - [`loss`]: gradient matching, shortest path and singularity regularizing
//!   terms, plus the eikonal residual baseline.
//! - [`train`]: Adam, plateau learning-rate decay and the full-batch loop.
//! - [`fmm`]: first and second order fast marching on uniform grids.
//! - [`metrics`]: domain and interface error norms.

pub mod diff;
pub mod error;
pub mod field;
pub mod fmm;
pub mod loss;
pub mod metrics;
pub mod net;
pub mod train;

pub use error::{Error, Result};

/// Version of this library.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
