//! Numerical laboratory for quantum Metropolis-Hastings on small enumerated
//! state spaces.

pub mod annealing;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod markov;
pub mod perturbation;
pub mod qmci;
pub mod qsim;

pub use error::{CoreError, Result};
pub use markov::*;
