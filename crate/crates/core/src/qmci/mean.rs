use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::oracle::LikelihoodOracle;
use crate::annealing::nae::{folded_pmf, median_pmf};
use crate::error::{CoreError, Result};
use crate::linalg::{normal_eigen, CMatrix, C64};

/// Largest states count handled by the state-vector mean estimator.
pub const FAITHFUL_MAX_TERMS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QmciMode {
    Faithful,
    Emulated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QmciResult {
    pub estimate: f64,
    pub eps: f64,
    pub delta: f64,
    pub queries: u64,
    pub mode: QmciMode,
    /// The sampled branch is within `eps` of the mean.
    pub success: bool,
    /// Probability weight of the accurate branches (1 in emulated mode).
    pub success_probability: f64,
    /// `eps >= 4 sigma`: no amplitude estimation was run.
    pub clamped: bool,
}

impl QmciResult {
    /// Residual amplitude `2 sqrt(1 - p)` left after uncomputation.
    pub fn residual(&self) -> f64 {
        2.0 * (1.0 - self.success_probability).max(0.0).sqrt()
    }
}

/// `floor_a(x) = sum_{i >= a} 2^i x_i`, in two's complement for negative `x`.
pub fn round_at_bit(x: f64, a: i32) -> f64 {
    let unit = 2f64.powi(a);
    (x / unit).floor() * unit
}

/// `b = floor(log2 eps)`.
pub fn rounding_bit(eps: f64) -> i32 {
    eps.log2().floor() as i32
}

/// `ceil(6.9 r (1 + log2^{3/2} r)) * ceil(12 ln(1/delta))` with `r = sigma / eps`;
/// zero when `eps >= 4 sigma`.
pub fn qmci_charge(sigma: f64, eps: f64, delta: f64) -> u64 {
    if eps >= 4.0 * sigma {
        return 0;
    }
    let r = sigma / eps;
    let lg = r.log2().max(0.0);
    let a = (6.9 * r * (1.0 + lg.powf(1.5))).ceil();
    let b = (12.0 * (1.0 / delta).ln()).ceil().max(1.0);
    (a * b) as u64
}

fn check(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CoreError::Invalid(format!("QMCI accuracy {eps} must be positive")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CoreError::Invalid(format!("QMCI residual budget {delta} outside (0,1)")));
    }
    Ok(())
}

/// Per-state noise in `[-1, 1]`, fixed by `(seed, x)`.
pub fn state_noise(seed: u64, x: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(x as u64);
    rng.random_range(-1.0..=1.0)
}

/// Estimate of `L_sum(x)` without touching the query counter.
pub(crate) fn estimate(oracle: &LikelihoodOracle, x: usize, eps: f64, delta: f64, mode: QmciMode, seed: u64) -> Result<QmciResult> {
    check(eps, delta)?;
    if x >= oracle.n_states() {
        return Err(CoreError::Invalid(format!("state {x} outside the oracle")));
    }
    if mode == QmciMode::Faithful && oracle.terms_per_state() > FAITHFUL_MAX_TERMS {
        return Err(CoreError::FaithfulTooLarge { m: oracle.terms_per_state(), max: FAITHFUL_MAX_TERMS });
    }
    let mu = oracle.l_sum(x);
    let b = rounding_bit(eps);
    let half = 2f64.powi(b - 1);
    let queries = qmci_charge(oracle.sigma(), eps, delta);
    let base = QmciResult {
        estimate: 0.0,
        eps,
        delta,
        queries,
        mode,
        success: true,
        success_probability: 1.0,
        clamped: false,
    };
    if eps >= 4.0 * oracle.sigma() {
        return Ok(QmciResult { estimate: round_at_bit(mu, b), clamped: true, ..base });
    }
    match mode {
        QmciMode::Emulated => {
            let y = mu + half * state_noise(seed, x);
            Ok(QmciResult { estimate: round_at_bit(y, b) + half, ..base })
        }
        QmciMode::Faithful => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(x as u64);
            let ae = bounded_mean_ae(oracle.terms(x), half, delta / 4.0, &mut rng)?;
            let success = (ae.value - mu).abs() <= half;
            Ok(QmciResult {
                estimate: round_at_bit(ae.value, b) + half,
                success,
                success_probability: ae.success_probability,
                ..base
            })
        }
    }
}

/// Mean of the terms of state `x` to accuracy `eps`; charges the counter.
pub fn qmci_mean(oracle: &LikelihoodOracle, x: usize, eps: f64, delta: f64, mode: QmciMode, seed: u64) -> Result<QmciResult> {
    let r = estimate(oracle, x, eps, delta, mode, seed)?;
    oracle.charge(r.queries);
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeOutcome {
    pub value: f64,
    pub levels: usize,
    pub reps: usize,
    pub success_probability: f64,
}

/// Median-of-reps amplitude estimation of the mean of `values` on the
/// `2M`-dimensional register `|i>|flag>`, after mapping the values to `[0,1]`.
pub fn bounded_mean_ae<R: Rng + ?Sized>(values: &[f64], accuracy: f64, failure: f64, rng: &mut R) -> Result<AeOutcome> {
    check(accuracy, failure)?;
    let m = values.len();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    let mean = values.iter().sum::<f64>() / m as f64;
    if width <= 0.0 {
        return Ok(AeOutcome { value: mean, levels: 1, reps: 1, success_probability: 1.0 });
    }
    let pi = std::f64::consts::PI;
    let mut levels = 2usize;
    while width * (pi / levels as f64 + (pi / levels as f64).powi(2)) > accuracy {
        levels *= 2;
    }
    let reps = {
        let k = ((1.0 / failure).ln() / 0.19).ceil().max(1.0) as usize;
        k | 1
    };

    let dim = 2 * m;
    let scale = 1.0 / (m as f64).sqrt();
    let mut psi = DVector::from_element(dim, C64::new(0.0, 0.0));
    for (i, v) in values.iter().enumerate() {
        let f = ((v - lo) / width).clamp(0.0, 1.0);
        psi[2 * i] = C64::new(scale * (1.0 - f).sqrt(), 0.0);
        psi[2 * i + 1] = C64::new(scale * f.sqrt(), 0.0);
    }
    // Q = (2|psi><psi| - I)(I - 2 Pi_1)
    let mut flip = CMatrix::identity(dim, dim);
    for i in 0..m {
        flip[(2 * i + 1, 2 * i + 1)] = C64::new(-1.0, 0.0);
    }
    let refl = &psi * psi.adjoint() * C64::new(2.0, 0.0) - CMatrix::identity(dim, dim);
    let q = refl * flip;
    let eig = normal_eigen(&q)?;
    let coeff = eig.vectors.adjoint() * &psi;

    let half = levels / 2;
    let value_of = |r: usize| lo + width * (pi * r as f64 / levels as f64).sin().powi(2);
    let good: Vec<bool> = (0..=half).map(|r| (value_of(r) - mean).abs() <= accuracy).collect();
    let mut mix = vec![0.0; half + 1];
    for (c, z) in coeff.iter().zip(&eig.values) {
        let w = c.norm_sqr();
        if w < 1e-300 {
            continue;
        }
        for (acc, p) in mix.iter_mut().zip(median_pmf(&folded_pmf(z.arg(), levels), reps)) {
            *acc += w * p;
        }
    }
    let total: f64 = mix.iter().sum();
    let success_probability = mix.iter().zip(&good).filter(|(_, &g)| g).map(|(p, _)| p).sum::<f64>() / total;
    let mut u = rng.random::<f64>() * total;
    let mut pick = half;
    for (r, p) in mix.iter().enumerate() {
        if u < *p {
            pick = r;
            break;
        }
        u -= p;
    }
    Ok(AeOutcome { value: value_of(pick), levels, reps, success_probability: success_probability.min(1.0) })
}
