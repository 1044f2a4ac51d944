//! Mean estimation of the likelihood sum, the approximate acceptance
//! rotation built on it, and annealing driven by the resulting walk.

pub mod mean;
pub mod oracle;
pub mod qsa;
pub mod walk;

pub use mean::{bounded_mean_ae, qmci_charge, qmci_mean, round_at_bit, rounding_bit, state_noise, AeOutcome, QmciMode, QmciResult, FAITHFUL_MAX_TERMS};
pub use oracle::LikelihoodOracle;
pub use qsa::{internal_accuracy, path_constants, qsa_exact, qsa_with_qmci, walk_delta, GateMode, InternalAccuracy, PathConstants, QsaQmciConfig, QsaQmciOutcome};
pub use walk::{approx_acceptance_table, approx_walk_operator, entry_delta, walk_difference, AcceptanceApprox, ApproxWalk};
