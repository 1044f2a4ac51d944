//! Quantum simulated annealing along an adaptively chosen inverse-temperature path.

pub mod amplify;
pub mod gates;
pub mod nae;
pub mod schedule;

pub use amplify::{pi3_amplify, pi3_depth, pi3_gate_uses, pi3_overlap_bound, AmplifyOutput};
pub use gates::{
    approx_phase_gate, exact_phase_gate, omega_minus, omega_pi3, qpe_ancillas, qpe_gate_cost, qpe_window_mass,
    ExactPhaseGate, PhaseGate, QpePhaseGate,
};
pub use nae::{nae_overlap, NaeConfig, NaeOutcome};
pub use schedule::{
    max_stages, qsa_generate, qsa_schedule, stage_overlap, AnnealOutput, AnnealingSchedule, ExactGates, GateFamily,
    LedgerEntry, LedgerKind, QpeGates, ScheduleConfig,
};
