use nalgebra::DVector;

use crate::error::{CoreError, Result};
use crate::linalg::{normal_eigen, wrap_phase, CMatrix, C64, ONE};

/// `e^{i pi/3}`.
pub fn omega_pi3() -> C64 {
    C64::from_polar(1.0, std::f64::consts::FRAC_PI_3)
}

pub fn omega_minus() -> C64 {
    C64::new(-1.0, 0.0)
}

/// A (possibly approximate) realization of `R^omega_|P> = omega L_par + L_perp`.
///
/// Approximate realizations act on the system register in the branch where
/// their private ancillas return to zero, so `apply` may shrink the norm;
/// the lost weight is exactly the leaked branch.
pub trait PhaseGate {
    fn apply(&self, v: &DVector<C64>) -> DVector<C64>;
    fn apply_adjoint(&self, v: &DVector<C64>) -> DVector<C64>;
    fn omega(&self) -> C64;
    /// Walk-operator applications charged per use.
    fn walk_cost(&self) -> u128;
}

/// `omega |t><t| + (I - |t><t|)` from a known target vector.
#[derive(Debug, Clone)]
pub struct ExactPhaseGate {
    target: DVector<C64>,
    omega: C64,
    cost: u128,
}

pub fn exact_phase_gate(target: &DVector<C64>, omega: C64) -> Result<ExactPhaseGate> {
    let n = target.norm();
    if !(n > 0.0) {
        return Err(CoreError::Invalid("phase gate target must be nonzero".into()));
    }
    if (omega.norm() - 1.0).abs() > 1e-12 {
        return Err(CoreError::Invalid(format!("phase factor {omega} is not unimodular")));
    }
    Ok(ExactPhaseGate { target: target.unscale(n), omega, cost: 0 })
}

impl ExactPhaseGate {
    /// Charges `cost` walk applications per use, as the QPE construction would.
    pub fn with_cost(mut self, cost: u128) -> Self {
        self.cost = cost;
        self
    }

    pub fn target(&self) -> &DVector<C64> {
        &self.target
    }

    fn act(&self, v: &DVector<C64>, omega: C64) -> DVector<C64> {
        let c = self.target.dotc(v);
        v + &self.target * (c * (omega - ONE))
    }
}

impl PhaseGate for ExactPhaseGate {
    fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        self.act(v, self.omega)
    }

    fn apply_adjoint(&self, v: &DVector<C64>) -> DVector<C64> {
        self.act(v, self.omega.conj())
    }

    fn omega(&self) -> C64 {
        self.omega
    }

    fn walk_cost(&self) -> u128 {
        self.cost
    }
}

/// Ancilla count `t = ceil(log2(8 pi / arccos(1 - Delta))) + ceil(log2(2 + 1/(2 delta')))`
/// with `delta' = delta^2 / 8`.
pub fn qpe_ancillas(gap: f64, delta: f64) -> Result<u32> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CoreError::Invalid(format!("gate accuracy {delta} outside (0,1)")));
    }
    if !(gap > 0.0 && gap <= 1.0) {
        return Err(CoreError::ZeroGap { modulus: 1.0 - gap });
    }
    let phi = (1.0 - gap).acos();
    let dp = delta * delta / 8.0;
    let precision = (8.0 * std::f64::consts::PI / phi).log2().ceil().max(1.0) as u32;
    let padding = (2.0 + 1.0 / (2.0 * dp)).log2().ceil() as u32;
    Ok(precision + padding)
}

/// Walk applications in one gate use: controlled `U^k` for every `k < 2^t`, and the uncompute.
pub fn qpe_gate_cost(t: u32) -> u128 {
    2 * ((1u128 << t) - 1)
}

/// Probability that a `k`-level phase register reads an outcome `m` with
/// `|wrap(2 pi m / k)| < threshold` when the eigenphase is `theta`.
pub fn qpe_window_mass(theta: f64, k: usize, threshold: f64) -> f64 {
    let kf = k as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let fejer = |m: usize| {
        let d = wrap_phase(theta - two_pi * m as f64 / kf);
        if d.abs() < 1e-14 {
            1.0
        } else {
            ((kf * d / 2.0).sin() / (kf * (d / 2.0).sin())).powi(2)
        }
    };
    let marked = |m: usize| wrap_phase(two_pi * m as f64 / kf).abs() < threshold;
    let mut total = 0.0;
    let mut m = 0;
    while m < k && marked(m) {
        total += fejer(m);
        m += 1;
    }
    let mut m = k - 1;
    while m > 0 && marked(m) && m as f64 > kf / 2.0 {
        total += fejer(m);
        m -= 1;
    }
    total.min(1.0)
}

/// QPE on `U`, phase kick on outcomes with `|phase| < arccos(1 - Delta)/2`, uncompute.
///
/// In the eigenbasis `U = Z diag(e^{i theta_j}) Z^dagger` the all-zero
/// ancilla branch multiplies component `j` by
/// `mu_j = 1 + (omega - 1) sum_{m marked} F_K(theta_j - 2 pi m / K)`,
/// `F_K` the QPE outcome distribution, which this type applies exactly.
#[derive(Debug, Clone)]
pub struct QpePhaseGate {
    z: CMatrix,
    mu: Vec<C64>,
    omega: C64,
    ancillas: u32,
    delta: f64,
}

pub fn approx_phase_gate(u: &CMatrix, omega: C64, delta: f64, gap: f64, max_ancillas: u32) -> Result<QpePhaseGate> {
    let t = qpe_ancillas(gap, delta)?;
    if t > max_ancillas {
        return Err(CoreError::InsufficientAncillas { needed: t, limit: max_ancillas });
    }
    let eig = normal_eigen(u)?;
    let k = 1usize << t;
    let threshold = (1.0 - gap).acos() / 2.0;
    let mu = eig.values.iter().map(|z| ONE + (omega - ONE) * qpe_window_mass(z.arg(), k, threshold)).collect();
    Ok(QpePhaseGate { z: eig.vectors, mu, omega, ancillas: t, delta })
}

impl QpePhaseGate {
    pub fn ancillas(&self) -> u32 {
        self.ancillas
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn act(&self, v: &DVector<C64>, conj: bool) -> DVector<C64> {
        let mut c = self.z.adjoint() * v;
        for (ci, m) in c.iter_mut().zip(&self.mu) {
            *ci *= if conj { m.conj() } else { *m };
        }
        &self.z * c
    }

    /// Exact `| G(Xi (x) 0) - (R Xi) (x) 0 |` given the ideal gate `R`.
    pub fn residual(&self, xi: &DVector<C64>, ideal: &dyn PhaseGate) -> f64 {
        let out = self.apply(xi);
        let target = ideal.apply(xi);
        let leaked = (xi.norm_squared() - out.norm_squared()).max(0.0);
        ((out - target).norm_squared() + leaked).sqrt()
    }
}

impl PhaseGate for QpePhaseGate {
    fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        self.act(v, false)
    }

    fn apply_adjoint(&self, v: &DVector<C64>) -> DVector<C64> {
        self.act(v, true)
    }

    fn omega(&self) -> C64 {
        self.omega
    }

    fn walk_cost(&self) -> u128 {
        qpe_gate_cost(self.ancillas)
    }
}

/// Reference QPE gate that carries the phase register explicitly.
///
/// The ancilla state of eigencomponent `j` is transformed by
/// `H D_j^dagger QFT C QFT^dagger D_j H` with Walsh-Hadamard and FFT steps;
/// used in tests as an independent route to the closed-form `mu_j`.
pub fn qpe_register_amplitude(theta: f64, omega: C64, t: u32, threshold: f64) -> DVector<C64> {
    use rustfft::FftPlanner;
    let k = 1usize << t;
    let scale = 1.0 / (k as f64).sqrt();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = vec![C64::new(0.0, 0.0); k];
    a[0] = ONE;
    crate::linalg::fwht(&mut a);
    for (j, v) in a.iter_mut().enumerate() {
        *v *= scale * C64::from_polar(1.0, theta * j as f64);
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(k).process(&mut a);
    for (m, v) in a.iter_mut().enumerate() {
        *v *= scale;
        if wrap_phase(two_pi * m as f64 / k as f64).abs() < threshold {
            *v *= omega;
        }
    }
    planner.plan_fft_inverse(k).process(&mut a);
    for (j, v) in a.iter_mut().enumerate() {
        *v *= scale * C64::from_polar(1.0, -theta * j as f64);
    }
    crate::linalg::fwht(&mut a);
    DVector::from_iterator(k, a.into_iter().map(|v| v * scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(v: &[f64]) -> DVector<C64> {
        DVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0))).normalize()
    }

    #[test]
    fn exact_gate_cases() {
        let t = unit(&[1.0, 2.0, 2.0]);
        let x = unit(&[0.3, -1.0, 0.5]);
        let id = exact_phase_gate(&t, ONE).unwrap();
        assert_abs_diff_eq!((id.apply(&x) - &x).norm(), 0.0, epsilon = 1e-15);
        let refl = exact_phase_gate(&t, omega_minus()).unwrap();
        assert_abs_diff_eq!((refl.apply(&refl.apply(&x)) - &x).norm(), 0.0, epsilon = 1e-14);
        let g = exact_phase_gate(&t, omega_pi3()).unwrap();
        assert_abs_diff_eq!((g.apply(&t) - &t * omega_pi3()).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((g.apply_adjoint(&g.apply(&x)) - &x).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn register_route_matches_closed_form() {
        let t = 5;
        let k = 1usize << t;
        let threshold = 0.4;
        for &theta in &[0.0, 0.13, 1.1, -2.5, std::f64::consts::PI] {
            let reg = qpe_register_amplitude(theta, omega_pi3(), t, threshold);
            let dist = crate::linalg::qpe_distribution(theta, k);
            let p: f64 = (0..k)
                .filter(|&m| wrap_phase(2.0 * std::f64::consts::PI * m as f64 / k as f64).abs() < threshold)
                .map(|m| dist[m])
                .sum();
            assert_abs_diff_eq!(p, qpe_window_mass(theta, k, threshold), epsilon = 1e-12);
            let mu = ONE + (omega_pi3() - ONE) * p;
            assert_abs_diff_eq!((reg[0] - mu).norm(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(reg.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ancillas_grow_with_accuracy() {
        let a = qpe_ancillas(0.3, 0.1).unwrap();
        let b = qpe_ancillas(0.3, 0.05).unwrap();
        let c = qpe_ancillas(0.3, 0.025).unwrap();
        assert!(a < b && b < c && c - b <= 3 && b - a <= 3);
        assert!(qpe_ancillas(0.3, 0.0).is_err());
    }

    #[test]
    fn qpe_gate_residual_within_accuracy() {
        use crate::markov::{build_transition_matrix, ProposalKernel, StateSpace, TargetModel};
        use crate::qsim::{build_walk_operator, encode_distribution, AcceptanceSource, RegisterLayout};
        let space = StateSpace::ring(4).unwrap();
        let kernel = ProposalKernel::nearest_neighbor(&space, 0.3).unwrap();
        let model = TargetModel::with_uniform_prior(vec![0.0, 0.7, 1.5, 0.4]).unwrap();
        let chain = build_transition_matrix(&model, &kernel).unwrap();
        let layout = RegisterLayout::new(&space, &kernel).unwrap();
        let walk = build_walk_operator(&layout, &kernel, AcceptanceSource::Exact(&model)).unwrap();
        let p = encode_distribution(&model.distribution(), &layout).unwrap().amps;
        let mut probes = vec![p.clone()];
        for x in 0..4 {
            let mut e = DVector::from_element(layout.dim(), C64::new(0.0, 0.0));
            e[layout.reference(x)] = ONE;
            probes.push(e);
        }
        for &delta in &[0.1, 0.05, 0.025] {
            let g = approx_phase_gate(&walk.u, omega_pi3(), delta, chain.gap, 24).unwrap();
            let ideal = exact_phase_gate(&p, omega_pi3()).unwrap();
            for xi in &probes {
                let r = g.residual(xi, &ideal);
                assert!(r <= delta, "delta {delta} residual {r}");
            }
        }
        assert!(matches!(
            approx_phase_gate(&walk.u, omega_pi3(), 0.01, chain.gap, 8),
            Err(CoreError::InsufficientAncillas { .. })
        ));
    }
}
