//! Finite-state Metropolis-Hastings: spaces, targets, proposals, chains and
//! the classical error bounds.

pub mod chain;
pub mod mixing;
pub mod proposal;
pub mod sampler;
pub mod space;
pub mod random;
pub mod target;

pub use chain::{
    acceptance_ratio, acceptance_table, build_transition_matrix, spectral_gap, transition_from_acceptance,
    tv_distance, ChainModel,
};
pub use mixing::{mixing_bound, mixing_bound_check, mixing_profile, mixing_time, mixing_time_bound, MixingPoint};
pub use random::{random_instance, random_ring_model, Instance};
pub use proposal::{Move, ProposalKernel};
pub use sampler::{
    classical_sample_count, mcmc_expectation, recommended_burn_in, rudolf_bound, run_mh, start_discrepancy, ChainSample,
    Expectation,
};
pub use space::StateSpace;
pub use target::TargetModel;
