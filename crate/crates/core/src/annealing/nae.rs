use nalgebra::DVector;
use rand::Rng;

use super::gates::PhaseGate;
use crate::error::{CoreError, Result};
use crate::linalg::{normal_eigen, CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaeConfig {
    pub accuracy: f64,
    pub failure: f64,
    pub krylov_cap: usize,
    pub max_rounds: usize,
}

impl NaeConfig {
    pub fn new(accuracy: f64, failure: f64) -> Self {
        Self { accuracy, failure, krylov_cap: 256, max_rounds: 100 }
    }

    /// Phase register levels: the smallest power of two with `2 pi / K <= accuracy`.
    pub fn levels(&self) -> usize {
        let need = (2.0 * std::f64::consts::PI / self.accuracy).ceil() as usize;
        need.next_power_of_two().max(2)
    }

    /// Odd repetition count for the median.
    pub fn reps(&self) -> usize {
        let k = ((1.0 / self.failure).ln() / 0.19).ceil().max(1.0) as usize;
        if k % 2 == 0 {
            k + 1
        } else {
            k
        }
    }
}

#[derive(Debug, Clone)]
pub struct NaeOutcome {
    pub estimate: f64,
    pub flag: bool,
    pub levels: usize,
    pub reps: usize,
    /// Failed restoration attempts before the state returned.
    pub rounds: usize,
    pub walk_calls: u128,
    /// `|<psi|psi_restored>|^2`.
    pub fidelity: f64,
    pub restored: Option<DVector<C64>>,
}

impl NaeOutcome {
    fn failed(levels: usize, reps: usize, walk_calls: u128) -> Self {
        Self { estimate: 0.0, flag: false, levels, reps, rounds: 0, walk_calls, fidelity: 0.0, restored: None }
    }
}

/// Estimate `|<phi|phi'>|^2` from `psi ~ |phi>` with the reflections
/// `r_phi = I - 2|phi><phi|` and `r_phi2 = I - 2|phi'><phi'|`, leaving the
/// input state (approximately) in place.
///
/// Phase estimation runs on `G = R_phi R_phi'`; the median over `reps`
/// folded readings `r` gives `cos^2(pi r / K)`. Afterwards the input is
/// recovered by alternating measurements of the pre-estimation ancilla
/// subspace and the observed-median subspace.
pub fn nae_overlap<R: Rng + ?Sized>(
    psi: &DVector<C64>,
    r_phi: &dyn PhaseGate,
    r_phi2: &dyn PhaseGate,
    cfg: &NaeConfig,
    rng: &mut R,
) -> Result<NaeOutcome> {
    if !(cfg.accuracy > 0.0 && cfg.accuracy < 1.0) || !(cfg.failure > 0.0 && cfg.failure < 1.0) {
        return Err(CoreError::Invalid("estimation accuracy and failure must lie in (0,1)".into()));
    }
    let levels = cfg.levels();
    let reps = cfg.reps();
    let per_round = (r_phi.walk_cost() + r_phi2.walk_cost()).saturating_mul((levels as u128 - 1) * reps as u128 * 2);
    let g = |v: &DVector<C64>| r_phi.apply(&r_phi2.apply(v));

    let Some((basis, closed)) = krylov(psi, &g, cfg.krylov_cap) else {
        return Ok(NaeOutcome::failed(levels, reps, per_round));
    };
    if !closed {
        return Ok(NaeOutcome::failed(levels, reps, per_round));
    }
    let mut gq = CMatrix::zeros(basis.nrows(), basis.ncols());
    for j in 0..basis.ncols() {
        gq.set_column(j, &g(&basis.column(j).into_owned()));
    }
    let h = basis.adjoint() * gq;
    let eig = normal_eigen(&h)?;
    let coeff = eig.vectors.adjoint() * (basis.adjoint() * psi);
    let weights: Vec<f64> = coeff.iter().map(|c| c.norm_sqr()).collect();

    let half = levels / 2;
    let medians: Vec<Vec<f64>> = eig
        .values
        .iter()
        .map(|z| median_pmf(&folded_pmf(z.arg(), levels), reps))
        .collect();
    let mut mix = vec![0.0; half + 1];
    for (w, m) in weights.iter().zip(&medians) {
        for (acc, p) in mix.iter_mut().zip(m) {
            *acc += w * p;
        }
    }
    let v = sample(&mix, rng);
    let estimate = (std::f64::consts::PI * v as f64 / levels as f64).cos().powi(2);

    let p: Vec<f64> = medians.iter().map(|m| m[v].clamp(0.0, 1.0)).collect();
    let mut alpha: Vec<C64> = coeff.iter().zip(&p).map(|(c, &pj)| c * pj).collect();
    let mut gamma: Vec<C64> = coeff.iter().zip(&p).map(|(c, &pj)| c * (pj * (1.0 - pj)).sqrt()).collect();
    let mut rounds = 0;
    loop {
        let pa: f64 = alpha.iter().map(|a| a.norm_sqr()).sum();
        let pg: f64 = gamma.iter().map(|a| a.norm_sqr()).sum();
        if rng.random::<f64>() * (pa + pg) < pa {
            break;
        }
        rounds += 1;
        if rounds > cfg.max_rounds || pg <= 0.0 {
            return Ok(NaeOutcome { rounds, ..NaeOutcome::failed(levels, reps, per_round.saturating_mul(1 + rounds as u128)) });
        }
        let q_in: f64 = gamma.iter().zip(&p).map(|(g, &pj)| g.norm_sqr() * (1.0 - pj)).sum();
        let stay = rng.random::<f64>() * pg < q_in;
        for ((a, g), &pj) in alpha.iter_mut().zip(gamma.iter_mut()).zip(&p) {
            let gj = *g;
            if stay {
                *a = gj * ((1.0 - pj) * pj).sqrt();
                *g = gj * (1.0 - pj);
            } else {
                *a = -gj * (pj * (1.0 - pj)).sqrt();
                *g = gj * pj;
            }
        }
    }
    let na: f64 = alpha.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let overlap: C64 = coeff.iter().zip(&alpha).map(|(c, a)| c.conj() * a).sum();
    let fidelity = overlap.norm_sqr() / (na * na);
    let alpha = DVector::from_iterator(alpha.len(), alpha.into_iter().map(|a| a / na));
    let restored = &basis * (&eig.vectors * alpha);
    Ok(NaeOutcome {
        estimate,
        flag: true,
        levels,
        reps,
        rounds,
        walk_calls: per_round.saturating_mul(1 + rounds as u128),
        fidelity,
        restored: Some(restored),
    })
}

fn krylov(psi: &DVector<C64>, g: &dyn Fn(&DVector<C64>) -> DVector<C64>, cap: usize) -> Option<(CMatrix, bool)> {
    let n0 = psi.norm();
    if !(n0 > 0.0) {
        return None;
    }
    let mut cols = vec![psi / C64::new(n0, 0.0)];
    loop {
        let mut w = g(cols.last().unwrap());
        let scale = w.norm().max(1e-300);
        for _ in 0..2 {
            for q in &cols {
                let c = q.dotc(&w);
                w -= q * c;
            }
        }
        let r = w.norm();
        if r < 1e-10 * scale {
            break;
        }
        if cols.len() >= cap {
            let m = CMatrix::from_columns(&cols);
            return Some((m, false));
        }
        cols.push(w / C64::new(r, 0.0));
    }
    Some((CMatrix::from_columns(&cols), true))
}

/// Distribution of `r = min(m, K - m)` for eigenphase `theta`.
pub fn folded_pmf(theta: f64, levels: usize) -> Vec<f64> {
    let dist = crate::linalg::qpe_distribution(theta, levels);
    let half = levels / 2;
    let mut out = vec![0.0; half + 1];
    for (m, p) in dist.into_iter().enumerate() {
        out[m.min(levels - m)] += p;
    }
    out
}

/// Exact distribution of the median of `reps` (odd) iid draws from `pmf`.
pub fn median_pmf(pmf: &[f64], reps: usize) -> Vec<f64> {
    let need = reps / 2 + 1;
    let mut out = Vec::with_capacity(pmf.len());
    let mut cdf = 0.0;
    let mut prev = 0.0;
    for p in pmf {
        cdf = (cdf + p).min(1.0);
        let g = binomial_tail(cdf, reps, need);
        out.push((g - prev).max(0.0));
        prev = g;
    }
    out
}

/// `P(Bin(n, q) >= k)`.
fn binomial_tail(q: f64, n: usize, k: usize) -> f64 {
    if q >= 1.0 {
        return 1.0;
    }
    if q <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let (lq, lr) = (q.ln(), (1.0 - q).ln());
    let mut log_c = 0.0;
    let mut total = 0.0;
    for i in 0..=n {
        if i > 0 {
            log_c += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        if i >= k {
            total += (log_c + i as f64 * lq + (n - i) as f64 * lr).exp();
        }
    }
    total.min(1.0)
}

fn sample<R: Rng + ?Sized>(pmf: &[f64], rng: &mut R) -> usize {
    let total: f64 = pmf.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, p) in pmf.iter().enumerate() {
        if u < *p {
            return i;
        }
        u -= p;
    }
    pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}
