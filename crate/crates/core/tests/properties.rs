use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use qmh_core::annealing::{exact_phase_gate, omega_pi3, pi3_amplify, pi3_overlap_bound};
use qmh_core::inference::{
    credible_bound_search, damped_sinusoid, damped_sinusoid_dft, percentile_interval, synth_gw_instance, tail_exact,
    CredibleQuery, GwParams, Side, TailEstimator,
};
use qmh_core::linalg::C64;
use qmh_core::markov::{build_transition_matrix, mixing_profile, random_instance, StateSpace};
use qmh_core::perturbation::{perturb_likelihood, perturbation_suite};
use qmh_core::qmci::round_at_bit;
use qmh_core::Result;

fn normalize(w: &[f64]) -> Vec<f64> {
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}

fn line(n: usize) -> StateSpace {
    StateSpace::line((0..n).map(|i| i as f64 * 0.5).collect()).unwrap()
}

/// Exact tails plus seeded noise bounded by the per-call accuracy.
struct Noisy<'a> {
    p: &'a [f64],
    space: &'a StateSpace,
    rng: ChaCha8Rng,
    charge: u128,
}

impl TailEstimator for Noisy<'_> {
    fn tail(&mut self, side: Side, a: f64, eps: f64, _delta: f64) -> Result<(f64, u128)> {
        let exact = tail_exact(self.p, self.space, 0, side, a)?;
        Ok(((exact + eps * self.rng.random_range(-1.0..=1.0)).clamp(0.0, 1.0), self.charge))
    }
}

fn posterior(n: usize, center: f64, width: f64) -> Vec<f64> {
    normalize(&(0..n).map(|i| (-(i as f64 - center).powi(2) / (2.0 * width * width)).exp()).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn search_output_is_accurate(
        n in 8usize..48,
        center in 0.2f64..0.8,
        width_frac in 0.15f64..0.4,
        alpha in 0.2f64..0.8,
        eps_frac in 0.2f64..0.9,
        side_up in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let p = posterior(n, center * n as f64, width_frac * n as f64);
        let s = line(n);
        let eps = eps_frac * alpha / 2.0;
        let side = if side_up { Side::Upper } else { Side::Lower };
        // every jump of the tail is below the acceptance window
        prop_assume!(p.iter().cloned().fold(0.0, f64::max) <= 2.0 * eps / 3.0);
        let q = CredibleQuery::new(0, alpha, eps, 0.1, side).unwrap();
        let mut est = Noisy { p: &p, space: &s, rng: ChaCha8Rng::seed_from_u64(seed), charge: 3 };
        let out = credible_bound_search(&q, &s, &mut est).unwrap();
        let first = if side_up { s.axis(0)[0] } else { s.axis(0)[n - 1] };
        let first_tail = tail_exact(&p, &s, 0, side, first).unwrap();
        match out.bound {
            Some(b) => {
                let t = tail_exact(&p, &s, 0, side, b).unwrap();
                prop_assert!((t - alpha / 2.0).abs() <= eps + 1e-12, "tail {} at {}", t, b);
            }
            None => prop_assert!(first_tail < alpha / 2.0 - eps / 3.0),
        }
        prop_assert!(out.iterations <= out.n_max);
        prop_assert_eq!(out.queries, out.calls.iter().map(|c| c.queries).sum::<u128>());
        prop_assert_eq!(out.queries, 3 * out.calls.len() as u128);
    }

    #[test]
    fn tails_are_monotone_and_complementary(
        w in prop::collection::vec(0.01f64..1.0, 2..30),
        a in -1.0f64..20.0,
        b in -1.0f64..20.0,
    ) {
        let p = normalize(&w);
        let s = line(p.len());
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(tail_exact(&p, &s, 0, Side::Upper, hi).unwrap() <= tail_exact(&p, &s, 0, Side::Upper, lo).unwrap() + 1e-15);
        prop_assert!(tail_exact(&p, &s, 0, Side::Lower, lo).unwrap() <= tail_exact(&p, &s, 0, Side::Lower, hi).unwrap() + 1e-15);
        let at: f64 = s.axis(0).iter().zip(&p).filter(|(x, _)| **x == lo).map(|(_, v)| v).sum();
        let total = tail_exact(&p, &s, 0, Side::Upper, lo).unwrap() + tail_exact(&p, &s, 0, Side::Lower, lo).unwrap() + at;
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn percentile_bounds_are_ordered_samples(
        v in prop::collection::vec(-5.0f64..5.0, 1..200),
        alpha in 0.01f64..1.0,
    ) {
        let r = percentile_interval(&v, alpha).unwrap();
        prop_assert!(r.lower <= r.upper);
        prop_assert!(v.contains(&r.lower) && v.contains(&r.upper));
        let above = v.iter().filter(|&&x| x > r.upper).count() as f64;
        let below = v.iter().filter(|&&x| x < r.lower).count() as f64;
        prop_assert!(above <= alpha / 2.0 * v.len() as f64 + 1e-9);
        prop_assert!(below <= alpha / 2.0 * v.len() as f64 + 1e-9);
    }

    #[test]
    fn rounding_truncates_to_the_grid(x in -50.0f64..50.0, a in -8i32..4) {
        let r = round_at_bit(x, a);
        let unit = 2f64.powi(a);
        prop_assert!(r <= x && x - r < unit);
        prop_assert_eq!((r / unit).fract(), 0.0);
    }

    #[test]
    fn amplification_meets_its_bound(p in 0.05f64..0.99, m in 0u32..4, phase in 0.0f64..6.28) {
        let mut a = nalgebra::DVector::from_element(3, C64::new(0.0, 0.0));
        let mut b = a.clone();
        a[0] = C64::new(1.0, 0.0);
        b[0] = C64::new(p.sqrt(), 0.0);
        b[2] = C64::from_polar((1.0 - p).sqrt(), phase);
        let rs = exact_phase_gate(&a, omega_pi3()).unwrap();
        let rt = exact_phase_gate(&b, omega_pi3()).unwrap();
        let out = pi3_amplify(&a, &rs, &rt, m);
        prop_assert!(b.dotc(&out.state).norm_sqr() >= pi3_overlap_bound(p, m) - 1e-9);
        prop_assert!((out.state.norm() - 1.0).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chains_are_reversible_and_mix(seed in any::<u64>()) {
        let inst = random_instance(seed, 2, 12, 3.0);
        let chain = build_transition_matrix(&inst.model, &inst.kernel).unwrap();
        prop_assert!(chain.detailed_balance_residual <= 1e-12);
        prop_assert!(chain.stationarity_residual() <= 1e-12);
        for i in 0..chain.len() {
            prop_assert!((chain.w.row(i).sum() - 1.0).abs() <= 1e-12);
        }
        prop_assert!(mixing_profile(&chain, 60).iter().all(|pt| pt.holds()));
    }

    #[test]
    fn perturbation_bounds_hold(seed in any::<u64>(), eps in 0.001f64..0.25) {
        let inst = random_instance(seed, 2, 10, 2.0);
        let pert = perturb_likelihood(inst.model.neg_log_lik(), eps, seed ^ 0x5a);
        let r = perturbation_suite(&inst.model, &inst.kernel, &pert).unwrap();
        prop_assert!(r.pass(), "{:?}", r);
    }

    #[test]
    fn gw_decomposition_is_exact(half in 8usize..48, seed in any::<u64>()) {
        let inst = synth_gw_instance(&GwParams::standard(2 * half, seed)).unwrap();
        for x in 0..inst.space.len() {
            let direct = inst.likelihood_direct(x);
            prop_assert!((inst.oracle.likelihood(x) - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
        }
        prop_assert!(inst.measured_sigma() <= inst.sigma_bound() * (1.0 + 1e-9));
    }

    #[test]
    fn closed_form_dft_matches_fft(m in 8usize..200, f in 1.0f64..60.0, tau in 0.05f64..2.0) {
        let dt = 1.0 / m as f64;
        let x = damped_sinusoid(f, tau, dt, m);
        let mut buf: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        for (k, v) in buf.iter().enumerate() {
            let want = v * dt;
            let got = damped_sinusoid_dft(f, tau, dt, m, k);
            prop_assert!((got - want).norm() <= 1e-10 * (1.0 + want.norm()), "k {} got {} want {}", k, got, want);
        }
    }
}
