use std::cell::RefCell;
use std::collections::HashMap;

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use super::amplify::{pi3_amplify, pi3_depth, pi3_gate_uses};
use super::gates::{approx_phase_gate, exact_phase_gate, omega_minus, omega_pi3, qpe_ancillas, qpe_gate_cost, PhaseGate};
use super::nae::{nae_overlap, NaeConfig};
use crate::error::{CoreError, Result};
use crate::linalg::C64;
use crate::markov::{ProposalKernel, StateSpace, TargetModel};
use crate::qsim::{build_walk_operator, encode_distribution, AcceptanceSource, RegisterLayout};

/// Guaranteed overlap between consecutive schedule points, `9 / (10 e^2)`.
pub fn stage_overlap() -> f64 {
    0.9 * (-2.0f64).exp()
}

/// `l_max = ceil(sqrt(Lbar ln Lbar))`, and 1 when `Lbar <= 1`.
pub fn max_stages(l_bar: f64) -> usize {
    if l_bar <= 1.0 {
        1
    } else {
        (l_bar * l_bar.ln()).sqrt().ceil().max(1.0) as usize
    }
}

/// A concrete realization of the reflections `R^omega_{P_beta}` along the path.
pub trait GateFamily {
    fn target(&self) -> &TargetModel;
    fn dim(&self) -> usize;
    /// `|P_beta>` in the family's register space.
    fn ideal_state(&self, beta: f64) -> Result<DVector<C64>>;
    fn phase_gate(&self, beta: f64, omega: C64, delta: f64) -> Result<Box<dyn PhaseGate>>;
    /// Reflection used by the overlap estimator.
    fn reflection(&self, beta: f64, delta: f64) -> Result<Box<dyn PhaseGate>>;
    /// `R_S` distribution on measuring `state`.
    fn marginal(&self, state: &DVector<C64>) -> Vec<f64>;
}

fn sqrt_state(p: &[f64]) -> DVector<C64> {
    DVector::from_iterator(p.len(), p.iter().map(|v| C64::new(v.sqrt(), 0.0)))
}

/// Gates as exact reflections about `|P_beta>` in `C^Omega`, charged at the
/// QPE construction's walk cost for gap bound `gap_min`.
#[derive(Debug, Clone)]
pub struct ExactGates {
    target: TargetModel,
    gap_min: f64,
}

impl ExactGates {
    pub fn new(target: TargetModel, gap_min: f64) -> Result<Self> {
        if !(gap_min > 0.0 && gap_min <= 1.0) {
            return Err(CoreError::ZeroGap { modulus: 1.0 - gap_min });
        }
        Ok(Self { target, gap_min })
    }

    fn cost(&self, delta: f64) -> Result<u128> {
        Ok(qpe_gate_cost(qpe_ancillas(self.gap_min, delta)?))
    }
}

impl GateFamily for ExactGates {
    fn target(&self) -> &TargetModel {
        &self.target
    }

    fn dim(&self) -> usize {
        self.target.len()
    }

    fn ideal_state(&self, beta: f64) -> Result<DVector<C64>> {
        Ok(sqrt_state(&self.target.at_beta(beta).distribution()))
    }

    fn phase_gate(&self, beta: f64, omega: C64, delta: f64) -> Result<Box<dyn PhaseGate>> {
        let g = exact_phase_gate(&self.ideal_state(beta)?, omega)?.with_cost(self.cost(delta)?);
        Ok(Box::new(g))
    }

    fn reflection(&self, beta: f64, delta: f64) -> Result<Box<dyn PhaseGate>> {
        self.phase_gate(beta, omega_minus(), delta)
    }

    fn marginal(&self, state: &DVector<C64>) -> Vec<f64> {
        state.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Gates realized by phase estimation on the walk operator of `C_beta`.
pub struct QpeGates {
    target: TargetModel,
    kernel: ProposalKernel,
    layout: RegisterLayout,
    gap_min: f64,
    max_ancillas: u32,
    walks: RefCell<HashMap<u64, crate::linalg::CMatrix>>,
}

impl QpeGates {
    pub fn new(target: TargetModel, space: &StateSpace, kernel: ProposalKernel, gap_min: f64, max_ancillas: u32) -> Result<Self> {
        if !(gap_min > 0.0 && gap_min <= 1.0) {
            return Err(CoreError::ZeroGap { modulus: 1.0 - gap_min });
        }
        let layout = RegisterLayout::new(space, &kernel)?;
        Ok(Self { target, kernel, layout, gap_min, max_ancillas, walks: RefCell::new(HashMap::new()) })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    fn walk(&self, beta: f64) -> Result<crate::linalg::CMatrix> {
        if let Some(u) = self.walks.borrow().get(&beta.to_bits()) {
            return Ok(u.clone());
        }
        let model = self.target.at_beta(beta);
        let w = build_walk_operator(&self.layout, &self.kernel, AcceptanceSource::Exact(&model))?;
        self.walks.borrow_mut().insert(beta.to_bits(), w.u.clone());
        Ok(w.u)
    }
}

impl GateFamily for QpeGates {
    fn target(&self) -> &TargetModel {
        &self.target
    }

    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn ideal_state(&self, beta: f64) -> Result<DVector<C64>> {
        Ok(encode_distribution(&self.target.at_beta(beta).distribution(), &self.layout)?.amps)
    }

    fn phase_gate(&self, beta: f64, omega: C64, delta: f64) -> Result<Box<dyn PhaseGate>> {
        let u = self.walk(beta)?;
        Ok(Box::new(approx_phase_gate(&u, omega, delta, self.gap_min, self.max_ancillas)?))
    }

    /// The estimator needs a unitary `G`, so its reflections are exact; they
    /// are charged what the QPE construction would cost.
    fn reflection(&self, beta: f64, delta: f64) -> Result<Box<dyn PhaseGate>> {
        let t = qpe_ancillas(self.gap_min, delta)?;
        if t > self.max_ancillas {
            return Err(CoreError::InsufficientAncillas { needed: t, limit: self.max_ancillas });
        }
        Ok(Box::new(exact_phase_gate(&self.ideal_state(beta)?, omega_minus())?.with_cost(qpe_gate_cost(t))))
    }

    fn marginal(&self, state: &DVector<C64>) -> Vec<f64> {
        let mut p = vec![0.0; self.layout.n_states()];
        for (i, a) in state.iter().enumerate() {
            p[self.layout.decompose(i).0] += a.norm_sqr();
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LedgerKind {
    Estimate,
    Amplify,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub stage: usize,
    pub kind: LedgerKind,
    pub beta_from: f64,
    pub beta_to: f64,
    pub walk_calls: u128,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig {
    /// Final state accuracy.
    pub eps: f64,
    pub eta: f64,
    /// Binary search precision in units of `1 / L_max`.
    pub grid_factor: f64,
    pub krylov_cap: usize,
    pub max_rounds: usize,
}

impl ScheduleConfig {
    pub fn new(eps: f64, eta: f64) -> Self {
        Self { eps, eta, grid_factor: 1.0, krylov_cap: 256, max_rounds: 100 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnealingSchedule {
    pub betas: Vec<f64>,
    /// Estimated `|<P_{beta_i}|P_{beta_{i+1}}>|^2` at each accepted step.
    pub estimated_overlaps: Vec<f64>,
    pub exact_overlaps: Vec<f64>,
    pub flag: bool,
    pub l_max: usize,
    pub ledger: Vec<LedgerEntry>,
}

impl AnnealingSchedule {
    pub fn stages(&self) -> usize {
        self.betas.len().saturating_sub(1)
    }

    pub fn walk_calls(&self) -> u128 {
        self.ledger.iter().fold(0u128, |a, e| a.saturating_add(e.walk_calls))
    }

    pub fn min_exact_overlap(&self) -> f64 {
        self.exact_overlaps.iter().copied().fold(1.0, f64::min)
    }
}

fn overlap(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
    a.dotc(b).norm_sqr()
}

/// Adaptive schedule: from `beta_i` pick the largest `beta'` whose estimated
/// overlap with `P_{beta_i}` reaches `e^{-2}`, then move the prepared state
/// there by pi/3 amplification.
pub fn qsa_schedule<R: Rng + ?Sized>(family: &dyn GateFamily, cfg: &ScheduleConfig, rng: &mut R) -> Result<AnnealingSchedule> {
    if !(cfg.eps > 0.0 && cfg.eps < 1.0) || !(cfg.eta > 0.0 && cfg.eta < 1.0) {
        return Err(CoreError::Invalid("schedule accuracy and failure must lie in (0,1)".into()));
    }
    let target = family.target();
    let l_bar = target.prior_mean_likelihood();
    let l_max_val = target.max_likelihood();
    let l_max = max_stages(l_bar);
    let mut sched = AnnealingSchedule {
        betas: vec![0.0],
        estimated_overlaps: vec![],
        exact_overlaps: vec![],
        flag: true,
        l_max,
        ledger: vec![],
    };
    if l_max_val <= 0.0 {
        sched.betas.push(1.0);
        sched.estimated_overlaps.push(1.0);
        sched.exact_overlaps.push(1.0);
        return Ok(sched);
    }
    let threshold = (-2.0f64).exp();
    let nae_cfg = NaeConfig {
        krylov_cap: cfg.krylov_cap,
        max_rounds: cfg.max_rounds,
        ..NaeConfig::new(0.1 * threshold, cfg.eta / (l_max as f64 * l_max_val.max(1.0)))
    };
    let nae_delta = nae_cfg.accuracy / (4.0 * nae_cfg.levels() as f64);
    let precision = cfg.grid_factor / l_max_val;
    let stage_acc = cfg.eps / l_max as f64;
    let mut state = family.ideal_state(0.0)?;

    for stage in 0..l_max {
        let beta = *sched.betas.last().unwrap();
        let here = family.reflection(beta, nae_delta)?;
        let mut probe = |b: f64, sched: &mut AnnealingSchedule| -> Result<Option<f64>> {
            let there = family.reflection(b, nae_delta)?;
            let out = nae_overlap(&state, here.as_ref(), there.as_ref(), &nae_cfg, rng)?;
            sched.ledger.push(LedgerEntry { stage, kind: LedgerKind::Estimate, beta_from: beta, beta_to: b, walk_calls: out.walk_calls });
            Ok(out.flag.then_some(out.estimate))
        };
        let Some(est_one) = probe(1.0, &mut sched)? else {
            sched.flag = false;
            return Ok(sched);
        };
        let (next, est) = if est_one >= threshold {
            (1.0, est_one)
        } else {
            let (mut lo, mut hi, mut lo_est) = (beta, 1.0, f64::NAN);
            while hi - lo > precision {
                let mid = 0.5 * (lo + hi);
                let Some(e) = probe(mid, &mut sched)? else {
                    sched.flag = false;
                    return Ok(sched);
                };
                if e >= threshold {
                    lo = mid;
                    lo_est = e;
                } else {
                    hi = mid;
                }
            }
            if lo <= beta {
                sched.flag = false;
                return Ok(sched);
            }
            (lo, lo_est)
        };
        let exact = overlap(&family.ideal_state(beta)?, &family.ideal_state(next)?);
        sched.betas.push(next);
        sched.estimated_overlaps.push(est);
        sched.exact_overlaps.push(exact);
        if next >= 1.0 {
            return Ok(sched);
        }
        let step = amplify_stage(family, &state, beta, next, stage_acc)?;
        sched.ledger.push(LedgerEntry { stage, kind: LedgerKind::Amplify, beta_from: beta, beta_to: next, walk_calls: step.1 });
        state = step.0;
    }
    sched.flag = false;
    Ok(sched)
}

/// One pi/3 stage at accuracy `acc`: depth for overlap `9/(10e^2)`, gate accuracy `acc / (2 uses)`.
fn amplify_stage(family: &dyn GateFamily, state: &DVector<C64>, from: f64, to: f64, acc: f64) -> Result<(DVector<C64>, u128, u32)> {
    let depth = pi3_depth(stage_overlap(), acc / 2.0)?;
    let uses = pi3_gate_uses(depth).max(1);
    let delta = (acc / (2.0 * uses as f64)).min(0.5);
    let r_s = family.phase_gate(from, omega_pi3(), delta)?;
    let r_t = family.phase_gate(to, omega_pi3(), delta)?;
    let out = pi3_amplify(state, r_s.as_ref(), r_t.as_ref(), depth);
    Ok((out.state, out.walk_calls, depth))
}

#[derive(Debug, Clone)]
pub struct AnnealOutput {
    pub state: DVector<C64>,
    /// `sqrt(2 - 2 |<P_1|state>|)`.
    pub distance: f64,
    pub depths: Vec<u32>,
    pub walk_calls: u128,
}

/// Prepare `|P_1>` along a schedule with total accuracy `eps`.
pub fn qsa_generate(family: &dyn GateFamily, schedule: &AnnealingSchedule, eps: f64) -> Result<AnnealOutput> {
    if schedule.betas.len() < 2 || *schedule.betas.last().unwrap() < 1.0 {
        return Err(CoreError::Invalid("schedule does not reach beta = 1".into()));
    }
    let stages = schedule.stages();
    let acc = eps / stages as f64;
    let mut state = family.ideal_state(0.0)?;
    let mut depths = Vec::with_capacity(stages);
    let mut walk_calls = 0u128;
    for w in schedule.betas.windows(2) {
        if w[1] == w[0] {
            depths.push(0);
            continue;
        }
        let (s, calls, depth) = amplify_stage(family, &state, w[0], w[1], acc)?;
        state = s;
        walk_calls = walk_calls.saturating_add(calls);
        depths.push(depth);
    }
    let ideal = family.ideal_state(1.0)?;
    let norm = state.norm();
    let distance = (2.0 - 2.0 * ideal.dotc(&state).norm() / norm.max(1e-300)).max(0.0).sqrt();
    Ok(AnnealOutput { state, distance, depths, walk_calls })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stage_counts() {
        assert_eq!(max_stages(0.0), 1);
        assert_eq!(max_stages(1.0), 1);
        assert_eq!(max_stages(10.0), 5);
    }

    #[test]
    fn flat_likelihood_is_trivial() {
        let t = TargetModel::with_uniform_prior(vec![0.0; 4]).unwrap();
        let fam = ExactGates::new(t, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = qsa_schedule(&fam, &ScheduleConfig::new(0.1, 0.1), &mut rng).unwrap();
        assert!(s.flag);
        assert_eq!(s.betas, vec![0.0, 1.0]);
        assert_eq!(s.walk_calls(), 0);
    }

    #[test]
    fn two_state_schedule_matches_scan() {
        let t = TargetModel::with_uniform_prior(vec![0.0, 12.0]).unwrap();
        let fam = ExactGates::new(t.clone(), 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = qsa_schedule(&fam, &ScheduleConfig::new(0.1, 0.1), &mut rng).unwrap();
        assert!(s.flag);
        assert!(s.stages() <= s.l_max);
        let h = 1.0 / 12.0;
        let tol = 0.1 * (-2.0f64).exp();
        for (w, &ov) in s.betas.windows(2).zip(&s.exact_overlaps) {
            assert!(ov >= stage_overlap());
            let here = fam.ideal_state(w[0]).unwrap();
            let mut b = w[1] + h;
            while b < 1.0 {
                let o = overlap(&here, &fam.ideal_state(b).unwrap());
                assert!(o <= (-2.0f64).exp() + tol, "beta {b} overlap {o} past step {}", w[1]);
                b += 0.01;
            }
        }
        let out = qsa_generate(&fam, &s, 0.05).unwrap();
        assert!(out.distance <= 0.05);
    }

    #[test]
    fn sharp_target_needs_several_stages() {
        let mut l = vec![8.0; 32];
        l[5] = 0.0;
        let t = TargetModel::with_uniform_prior(l).unwrap();
        let fam = ExactGates::new(t, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = qsa_schedule(&fam, &ScheduleConfig::new(0.1, 0.1), &mut rng).unwrap();
        assert!(s.flag);
        assert!(s.stages() >= 2 && s.stages() <= s.l_max, "{} stages, l_max {}", s.stages(), s.l_max);
        assert!(s.exact_overlaps.iter().all(|&o| o >= stage_overlap()));
        let out = qsa_generate(&fam, &s, 0.05).unwrap();
        assert!(out.distance <= 0.05);
    }
}
