//! Dense register simulator for the generalized MH walk operator.

pub mod layout;
pub mod operators;

pub use layout::{encode_distribution, RegisterLayout, StateVector};
pub use operators::{
    build_b, build_f, build_r, build_s, build_v, build_walk_operator, lemma_checks, verify_phase_gap, walk_subspace,
    AcceptanceSource, LemmaReport, PhaseGapReport, SparseOp, UnitaryMatrix, WalkOperator,
};
