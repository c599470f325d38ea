//! Exact verification toolkit for the learning-augmented secretary problem.
//!
//! The crate generates the geometric-ladder hardness family, solves for the
//! best 1-consistent stopping policy by exact backward induction, and checks
//! the resulting optimum against closed-form bounds and `1/e`.

pub mod baselines;
pub mod bounds;
pub mod cli;
pub mod construction;
pub mod engine;
pub mod error;
pub mod exact;
pub mod instance;

pub use error::{Error, Result};
pub use exact::ExactNumber;
