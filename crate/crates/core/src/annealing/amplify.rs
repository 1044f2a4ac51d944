use nalgebra::DVector;

use super::gates::PhaseGate;
use crate::error::{CoreError, Result};
use crate::linalg::C64;

/// Lower bound `1 - (1 - p)^{3^m}` on the final overlap after `m` levels.
pub fn pi3_overlap_bound(p: f64, m: u32) -> f64 {
    1.0 - (1.0 - p).powf(3f64.powi(m as i32))
}

/// Recursion depth reaching phase-invariant distance `acc` from overlap `p`.
pub fn pi3_depth(p: f64, acc: f64) -> Result<u32> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(CoreError::Invalid(format!("initial overlap {p} outside (0,1]")));
    }
    if !(acc > 0.0) {
        return Err(CoreError::Invalid(format!("accuracy {acc} must be positive")));
    }
    let goal = acc * acc / 2.0;
    let mut m = 0;
    while (1.0 - p).powf(3f64.powi(m as i32)) > goal {
        m += 1;
        if m > 40 {
            return Err(CoreError::Numerical("amplification depth diverged".into()));
        }
    }
    Ok(m)
}

/// Gate uses of `U_m`: `u_0 = 0`, `u_{m+1} = 3 u_m + 2`.
pub fn pi3_gate_uses(m: u32) -> u64 {
    3u64.pow(m) - 1
}

#[derive(Debug, Clone)]
pub struct AmplifyOutput {
    pub state: DVector<C64>,
    pub depth: u32,
    pub gate_uses: u64,
    pub walk_calls: u128,
}

/// `U_{m+1} = U_m R_s U_m^dagger R_t U_m` applied to `start`, with
/// `R_s` the pi/3 gate about the start state and `R_t` about the target.
pub fn pi3_amplify(start: &DVector<C64>, r_s: &dyn PhaseGate, r_t: &dyn PhaseGate, depth: u32) -> AmplifyOutput {
    let mut walk = 0u128;
    let state = level(start.clone(), r_s, r_t, depth, false, &mut walk);
    AmplifyOutput { state, depth, gate_uses: pi3_gate_uses(depth), walk_calls: walk }
}

fn level(v: DVector<C64>, r_s: &dyn PhaseGate, r_t: &dyn PhaseGate, m: u32, adj: bool, walk: &mut u128) -> DVector<C64> {
    if m == 0 {
        return v;
    }
    let v = level(v, r_s, r_t, m - 1, adj, walk);
    let (first, second) = if adj { (r_s, r_t) } else { (r_t, r_s) };
    let v = use_gate(first, &v, adj, walk);
    let v = level(v, r_s, r_t, m - 1, !adj, walk);
    let v = use_gate(second, &v, adj, walk);
    level(v, r_s, r_t, m - 1, adj, walk)
}

fn use_gate(g: &dyn PhaseGate, v: &DVector<C64>, adj: bool, walk: &mut u128) -> DVector<C64> {
    *walk = walk.saturating_add(g.walk_cost());
    if adj {
        g.apply_adjoint(v)
    } else {
        g.apply(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annealing::gates::{exact_phase_gate, omega_pi3};
    use approx::assert_abs_diff_eq;

    fn pair(p: f64) -> (DVector<C64>, DVector<C64>) {
        let s = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        let t = DVector::from_vec(vec![C64::new(p.sqrt(), 0.0), C64::new((1.0 - p).sqrt(), 0.0), C64::new(0.0, 0.0)]);
        (s, t)
    }

    #[test]
    fn half_overlap_cases() {
        let (s, t) = pair(0.5);
        let rs = exact_phase_gate(&s, omega_pi3()).unwrap();
        let rt = exact_phase_gate(&t, omega_pi3()).unwrap();
        let one = pi3_amplify(&s, &rs, &rt, 1);
        assert_abs_diff_eq!(t.dotc(&one.state).norm_sqr(), 0.875, epsilon = 1e-12);
        let two = pi3_amplify(&s, &rs, &rt, 2);
        assert_abs_diff_eq!(t.dotc(&two.state).norm_sqr(), 1.0 - 2f64.powi(-9), epsilon = 1e-12);
        assert_eq!(two.gate_uses, 8);
    }

    #[test]
    fn depth_and_uses() {
        assert_eq!(pi3_gate_uses(0), 0);
        assert_eq!(pi3_gate_uses(3), 26);
        assert_eq!(pi3_depth(1.0, 0.1).unwrap(), 0);
        let m = pi3_depth(0.2, 0.01).unwrap();
        assert!(pi3_overlap_bound(0.2, m) >= 1.0 - 0.5e-4);
        assert!(pi3_overlap_bound(0.2, m - 1) < 1.0 - 0.5e-4);
    }
}
