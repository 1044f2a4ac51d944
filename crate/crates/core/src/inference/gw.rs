use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::C64;
use crate::markov::{ProposalKernel, StateSpace, TargetModel};
use crate::qmci::LikelihoodOracle;

/// Toy ringdown family `h(t; f, a) = e^a h_f(t)`, where `h_f` is the damped
/// sinusoid `e^{-t/tau} sin(2 pi f t)` scaled to unit noise-weighted norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GwParams {
    /// Samples in the series; the observation time is fixed, so `dt = duration / m`.
    pub m: usize,
    pub duration: f64,
    pub freqs: Vec<f64>,
    pub log_amps: Vec<f64>,
    /// Injected frequency; the injected amplitude is `rho`.
    pub truth_freq: f64,
    pub rho: f64,
    pub tau: f64,
    /// Knee of `S_n(f) = 1 + (f_knee / f)^2`.
    pub psd_knee: f64,
    pub noise: bool,
    pub seed: u64,
}

impl GwParams {
    /// A 6 x 3 grid around the injection at `rho = 3`.
    pub fn standard(m: usize, seed: u64) -> Self {
        let rho: f64 = 3.0;
        Self {
            m,
            duration: 1.0,
            freqs: (0..6).map(|k| 39.25 + 0.3 * k as f64).collect(),
            log_amps: (0..3).map(|k| rho.ln() - 0.3 + 0.3 * k as f64).collect(),
            truth_freq: 40.0,
            rho,
            tau: 0.25,
            psd_knee: 20.0,
            noise: true,
            seed,
        }
    }
}

impl Default for GwParams {
    fn default() -> Self {
        Self::standard(256, 7)
    }
}

/// One-sided noise PSD.
pub fn psd(f: f64, knee: f64) -> f64 {
    1.0 + (knee / f).powi(2)
}

/// `y_k = dt sum_n x_n e^{-2 pi i k n / M}` by direct summation.
pub fn direct_dft(x: &[f64], dt: f64) -> Vec<C64> {
    let m = x.len();
    let step = -2.0 * std::f64::consts::PI / m as f64;
    (0..m)
        .map(|k| {
            // exact phase reduction keeps the argument small for large k n
            let mut acc = C64::new(0.0, 0.0);
            for (n, v) in x.iter().enumerate() {
                let r = (k * n) % m;
                acc += C64::from_polar(*v, step * r as f64);
            }
            acc * dt
        })
        .collect()
}

/// Sampled `e^{-t/tau} sin(2 pi f t)` at `t_n = n dt`.
pub fn damped_sinusoid(f: f64, tau: f64, dt: f64, m: usize) -> Vec<f64> {
    (0..m).map(|n| {
        let t = n as f64 * dt;
        (-t / tau).exp() * (2.0 * std::f64::consts::PI * f * t).sin()
    }).collect()
}

/// Closed-form DFT of [`damped_sinusoid`] at bin `k`: a difference of two
/// finite geometric series.
pub fn damped_sinusoid_dft(f: f64, tau: f64, dt: f64, m: usize, k: usize) -> C64 {
    let r = (-dt / tau).exp();
    let w = -2.0 * std::f64::consts::PI * ((k % m) as f64) / m as f64;
    let wf = 2.0 * std::f64::consts::PI * f * dt;
    let rm = r.powi(m as i32);
    let series = |phase: f64| {
        let z = C64::from_polar(r, phase + w);
        let zm = C64::from_polar(rm, (phase * m as f64).rem_euclid(2.0 * std::f64::consts::PI));
        (C64::new(1.0, 0.0) - zm) / (C64::new(1.0, 0.0) - z)
    };
    (series(wf) - series(-wf)) / C64::new(0.0, 2.0) * dt
}

#[derive(Debug, Clone)]
pub struct GwInstance {
    pub params: GwParams,
    pub dt: f64,
    pub space: StateSpace,
    /// `S_n(f_k)` for `k = 0..=M/2` (the `k = 0` entry is unused).
    pub psd: Vec<f64>,
    /// `s~(f_k)` for `k = 0..=M/2`.
    pub data: Vec<C64>,
    /// `h~(f_k; x)` for `k = 0..=M/2`, per state.
    pub templates: Vec<Vec<C64>>,
    /// `(h|h)` per state, folded into `l0`.
    pub hh: Vec<f64>,
    pub oracle: LikelihoodOracle,
    pub model: TargetModel,
    /// Largest `|h~| / sqrt(S_n dt)` over states and positive bins.
    pub gamma: f64,
    pub truth: usize,
}

impl GwInstance {
    pub fn m(&self) -> usize {
        self.params.m
    }

    /// `(a|b) = (4/M) sum_{k=1}^{M/2-1} a~* b~ / (S_n dt)`, real part.
    pub fn inner(&self, a: &[C64], b: &[C64]) -> f64 {
        let m = self.params.m;
        let mut acc = 0.0;
        for k in 1..m / 2 {
            acc += (a[k].conj() * b[k]).re / (self.psd[k] * self.dt);
        }
        4.0 * acc / m as f64
    }

    /// `L(x) = -2 Re(h|s) + (h|h) + C`, evaluated from the spectra.
    pub fn likelihood_direct(&self, x: usize) -> f64 {
        let h = &self.templates[x];
        -2.0 * self.inner(h, &self.data) + self.inner(h, h) + self.oracle.constant()
    }

    /// Largest per-state standard deviation of the terms.
    pub fn measured_sigma(&self) -> f64 {
        (0..self.oracle.n_states()).map(|x| self.oracle.sample_variance(x)).fold(0.0, f64::max).sqrt()
    }

    /// `sqrt(8) gamma sqrt((s|s))`, an upper bound on every per-state term deviation.
    pub fn sigma_bound(&self) -> f64 {
        8f64.sqrt() * self.gamma * self.inner(&self.data, &self.data).sqrt()
    }

    pub fn proposal(&self) -> Result<ProposalKernel> {
        ProposalKernel::nearest_neighbor(&self.space, 0.5)
    }

    /// Data file rows `k, Re s~, Im s~, S_n` for `k = 1..M/2-1`.
    pub fn data_csv(&self) -> String {
        let mut out = String::from("k,re,im,psd\n");
        for k in 1..self.params.m / 2 {
            out.push_str(&format!("{k},{:e},{:e},{:e}\n", self.data[k].re, self.data[k].im, self.psd[k]));
        }
        out
    }
}

/// Noise bin `k`, seeded by `(seed, k)` so that a fixed observation time gives
/// the same realization in every bin shared between sample counts.
fn noise_bin(seed: u64, k: usize, scale: f64) -> C64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    let a: f64 = StandardNormal.sample(&mut rng);
    let b: f64 = StandardNormal.sample(&mut rng);
    C64::new(a, b) * scale
}

/// Builds data `s = rho h_{f*} + n` and the oracle with terms
/// `l(k, x) = -4 Re(h~* s~ / (S_n dt))`, each positive bin `k` carried twice
/// (at `k` and its mirror `M - k`) so that the mode average is `-2 Re(h|s)`.
pub fn synth_gw_instance(p: &GwParams) -> Result<GwInstance> {
    let m = p.m;
    if m < 8 || m % 2 != 0 {
        return Err(CoreError::Invalid(format!("time-series length {m} must be even and at least 8")));
    }
    if !(p.rho >= 0.0 && p.tau > 0.0 && p.duration > 0.0 && p.psd_knee >= 0.0) {
        return Err(CoreError::Invalid("rho, tau, duration and knee must be nonnegative and tau, duration positive".into()));
    }
    if p.freqs.iter().chain(std::iter::once(&p.truth_freq)).any(|&f| !(f > 0.0)) {
        return Err(CoreError::Invalid("frequencies must be positive".into()));
    }
    let dt = p.duration / m as f64;
    let half = m / 2;
    let space = StateSpace::grid(vec![p.freqs.clone(), p.log_amps.clone()])?;
    let mut psd_k = vec![1.0; half + 1];
    for (k, s) in psd_k.iter_mut().enumerate().skip(1) {
        *s = psd(k as f64 / p.duration, p.psd_knee);
    }
    let norm = |spec: &[C64]| -> f64 {
        let mut acc = 0.0;
        for k in 1..half {
            acc += spec[k].norm_sqr() / (psd_k[k] * dt);
        }
        (4.0 * acc / m as f64).sqrt()
    };
    let unit = |f: f64| -> Vec<C64> {
        let raw: Vec<C64> = (0..=half).map(|k| damped_sinusoid_dft(f, p.tau, dt, m, k)).collect();
        let n = norm(&raw);
        raw.into_iter().map(|v| v / n).collect()
    };

    // injected series transformed directly
    let truth_raw: Vec<C64> = (0..=half).map(|k| damped_sinusoid_dft(p.truth_freq, p.tau, dt, m, k)).collect();
    let scale = p.rho / norm(&truth_raw);
    let series: Vec<f64> = damped_sinusoid(p.truth_freq, p.tau, dt, m).into_iter().map(|v| v * scale).collect();
    let mut data: Vec<C64> = direct_dft(&series, dt).into_iter().take(half + 1).collect();
    if p.noise {
        for (k, d) in data.iter_mut().enumerate().take(half).skip(1) {
            *d += noise_bin(p.seed, k, (p.duration * psd_k[k] / 4.0).sqrt());
        }
    }

    let unit_by_freq: Vec<Vec<C64>> = p.freqs.iter().map(|&f| unit(f)).collect();
    let n_states = space.len();
    let mut templates = Vec::with_capacity(n_states);
    let mut gamma = 0.0f64;
    for x in 0..n_states {
        let c = space.coords(x);
        let amp = p.log_amps[c[1]].exp();
        let h: Vec<C64> = unit_by_freq[c[0]].iter().map(|v| v * amp).collect();
        for k in 1..half {
            gamma = gamma.max(h[k].norm() / (psd_k[k] * dt).sqrt());
        }
        templates.push(h);
    }
    let mut terms = Vec::with_capacity(n_states);
    let mut hh = Vec::with_capacity(n_states);
    for h in &templates {
        let mut row = vec![0.0; m];
        for k in 1..half {
            let v = -4.0 * (h[k].conj() * data[k]).re / (psd_k[k] * dt);
            row[k] = v;
            row[m - k] = v;
        }
        terms.push(row);
        hh.push(norm(h).powi(2));
    }
    let oracle = LikelihoodOracle::normalized(terms, hh.clone(), None)?;
    let model = TargetModel::with_uniform_prior(oracle.likelihoods().into_iter().map(|v| v.max(0.0)).collect())?;
    let truth_freq = p.freqs.iter().enumerate().min_by(|a, b| (a.1 - p.truth_freq).abs().total_cmp(&(b.1 - p.truth_freq).abs())).map(|v| v.0).unwrap_or(0);
    let truth_amp = p.log_amps.iter().enumerate().min_by(|a, b| (a.1 - p.rho.ln()).abs().total_cmp(&(b.1 - p.rho.ln()).abs())).map(|v| v.0).unwrap_or(0);
    let truth = space.index_of(&[truth_freq, truth_amp]);
    Ok(GwInstance { params: p.clone(), dt, space, psd: psd_k, data, templates, hh, oracle, model, gamma, truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::FftPlanner;

    #[test]
    fn closed_form_matches_direct_and_fft() {
        let (m, dt) = (64, 1.0 / 64.0);
        let x = damped_sinusoid(7.3, 0.2, dt, m);
        let direct = direct_dft(&x, dt);
        let mut buf: Vec<C64> = x.iter().map(|&v| C64::new(v * dt, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        for k in 0..m {
            let c = damped_sinusoid_dft(7.3, 0.2, dt, m, k);
            assert!((c - direct[k]).norm() < 1e-12, "bin {k}");
            assert!((buf[k] - direct[k]).norm() < 1e-12, "bin {k}");
        }
    }

    #[test]
    fn decomposition_is_exact() {
        let g = synth_gw_instance(&GwParams::standard(256, 4)).unwrap();
        for x in 0..g.space.len() {
            let direct = g.likelihood_direct(x);
            assert!((g.oracle.likelihood(x) - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
            assert!((g.oracle.l_sum(x) + 2.0 * g.inner(&g.templates[x], &g.data)).abs() < 1e-9);
        }
        assert!(g.measured_sigma() <= g.sigma_bound());
    }

    #[test]
    fn noiseless_minimum_at_truth() {
        let mut p = GwParams::standard(256, 0);
        p.noise = false;
        p.freqs = vec![39.6, 40.0, 40.4];
        p.log_amps = vec![p.rho.ln() - 0.1, p.rho.ln(), p.rho.ln() + 0.1];
        let g = synth_gw_instance(&p).unwrap();
        let l = g.oracle.likelihoods();
        let best = (0..l.len()).min_by(|&a, &b| l[a].total_cmp(&l[b])).unwrap();
        assert_eq!(best, g.truth);
        assert_eq!(g.space.point(best), vec![40.0, p.rho.ln()]);
    }

    #[test]
    fn sigma_grows_like_sqrt_m() {
        let a = synth_gw_instance(&GwParams::standard(256, 1)).unwrap().measured_sigma();
        let b = synth_gw_instance(&GwParams::standard(512, 1)).unwrap().measured_sigma();
        let r = b / a;
        assert!((r / 2f64.sqrt() - 1.0).abs() <= 0.15, "ratio {r}");
    }
}
