//! Tail-mass estimation, credible-interval search and the synthetic
//! gravitational-wave likelihood.

pub mod cdf;
pub mod classical;
pub mod credible;
pub mod gw;
pub mod scaling;

pub use cdf::{ae_levels, ae_reps, cdf_exact, cdf_qmci, tail_exact, CdfEstimate, PreparedState, Side};
pub use classical::{classical_credible, percentile_interval, ClassicalInterval};
pub use credible::{
    credible_bound_search, credible_interval, per_call_failure, search_iterations, search_order, CredibleInterval,
    CredibleQuery, CredibleSearch, QmciTail, SearchCall, TailEstimator,
};
pub use gw::{damped_sinusoid, damped_sinusoid_dft, direct_dft, psd, synth_gw_instance, GwInstance, GwParams};
pub use scaling::{pipeline_config, run_method, scaling_study, Method, MethodSlope, ScalingConfig, ScalingRecord, ScalingReport};
