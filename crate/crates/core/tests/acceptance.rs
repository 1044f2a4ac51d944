//! Acceptance suite: one PASS/FAIL line per criterion.

use std::f64::consts::{E, FRAC_PI_3};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qmh_core::annealing::{exact_phase_gate, omega_pi3, pi3_amplify, pi3_overlap_bound};
use qmh_core::inference::{
    cdf_exact, credible_bound_search, scaling_study, search_iterations, synth_gw_instance, CredibleQuery, GwParams, Method,
    PreparedState, QmciTail, ScalingConfig, Side,
};
use qmh_core::markov::{
    build_transition_matrix, mixing_profile, random_instance, tv_distance, Instance, ProposalKernel, StateSpace, TargetModel,
};
use qmh_core::perturbation::{perturb_likelihood, perturbation_suite};
use qmh_core::qmci::{qmci_mean, qsa_with_qmci, round_at_bit, LikelihoodOracle, QmciMode, QsaQmciConfig};
use qmh_core::qsim::{build_walk_operator, lemma_checks, verify_phase_gap, AcceptanceSource, RegisterLayout};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn walk_instances() -> Vec<Instance> {
    let mut v: Vec<Instance> = (0..20).map(|s| random_instance(1000 + s, 2, 16, 2.0)).collect();
    let space = StateSpace::ring(2).unwrap();
    let kernel = ProposalKernel::nearest_neighbor(&space, 0.75).unwrap();
    let model = TargetModel::with_uniform_prior(vec![0.0, 0.0]).unwrap();
    v.push(Instance { space, kernel, model });
    v
}

fn phase_gap() -> Outcome {
    let inst = walk_instances();
    let mut fails = 0;
    let mut worst_margin = f64::INFINITY;
    let mut worst_overlap: f64 = 1.0;
    for i in &inst[..20] {
        let chain = build_transition_matrix(&i.model, &i.kernel).unwrap();
        let layout = RegisterLayout::new(&i.space, &i.kernel).unwrap();
        let walk = build_walk_operator(&layout, &i.kernel, AcceptanceSource::Exact(&i.model)).unwrap();
        let r = verify_phase_gap(&walk, &chain).unwrap();
        let ok = r.unit_multiplicity == 1 && r.unit_overlap >= 1.0 - 1e-9 && r.min_nonzero_phase >= r.bound - 1e-8;
        fails += usize::from(!ok);
        worst_margin = worst_margin.min(r.min_nonzero_phase - r.bound);
        worst_overlap = worst_overlap.min(r.unit_overlap);
    }
    let two = &inst[20];
    let chain = build_transition_matrix(&two.model, &two.kernel).unwrap();
    let layout = RegisterLayout::new(&two.space, &two.kernel).unwrap();
    let walk = build_walk_operator(&layout, &two.kernel, AcceptanceSource::Exact(&two.model)).unwrap();
    let r = verify_phase_gap(&walk, &chain).unwrap();
    let two_err = (r.min_nonzero_phase - FRAC_PI_3).abs();
    let gap_err = (chain.gap - 0.5).abs();
    outcome(
        fails == 0 && r.pass && two_err <= 1e-8 && gap_err <= 1e-12,
        format!("failures {fails}/20, min phase margin {worst_margin:.3e}, min unit overlap {worst_overlap:.12}, 2-state |theta - pi/3| {two_err:.2e}"),
    )
}

fn block_identity() -> Outcome {
    let mut worst_block: f64 = 0.0;
    let mut worst_sf: f64 = 0.0;
    for i in walk_instances() {
        let chain = build_transition_matrix(&i.model, &i.kernel).unwrap();
        let layout = RegisterLayout::new(&i.space, &i.kernel).unwrap();
        let walk = build_walk_operator(&layout, &i.kernel, AcceptanceSource::Exact(&i.model)).unwrap();
        let r = lemma_checks(&walk, &chain).unwrap();
        worst_block = worst_block.max(r.block_defect);
        worst_sf = worst_sf.max(r.sf_defect);
    }
    outcome(worst_block <= 1e-10 && worst_sf <= 1e-12, format!("max block defect {worst_block:.2e}, max (SF)^2 defect {worst_sf:.2e}"))
}

fn pair_with_overlap(p: f64, n: usize) -> (DVector<Complex64>, DVector<Complex64>) {
    let mut a = DVector::from_element(n, Complex64::new(0.0, 0.0));
    let mut b = a.clone();
    a[0] = Complex64::new(1.0, 0.0);
    b[0] = Complex64::new(p.sqrt(), 0.0);
    b[1] = Complex64::new((1.0 - p).sqrt() * 0.6, 0.0);
    b[2] = Complex64::new(0.0, (1.0 - p).sqrt() * 0.8);
    (a, b)
}

fn amplification() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut half_one = 0.0;
    for &p in &[0.2, 0.5, 0.9] {
        let (phi1, phi2) = pair_with_overlap(p, 4);
        let rs = exact_phase_gate(&phi1, omega_pi3()).unwrap();
        let rt = exact_phase_gate(&phi2, omega_pi3()).unwrap();
        for m in 0..=3 {
            let out = pi3_amplify(&phi1, &rs, &rt, m);
            let got = phi2.dotc(&out.state).norm_sqr();
            worst = worst.min(got - pi3_overlap_bound(p, m));
            if p == 0.5 && m == 1 {
                half_one = got;
            }
        }
    }
    outcome(
        worst >= -1e-9 && (half_one - 0.875).abs() <= 1e-9,
        format!("min overlap - bound {worst:.3e}, p=0.5 m=1 overlap {half_one:.12}"),
    )
}

fn perturbation() -> Outcome {
    let mut violations = 0;
    let mut checks = 0;
    for s in 0..100u64 {
        let inst = random_instance(5000 + s, 2, 12, 2.0);
        for (j, &eps) in [0.01, 0.05, 0.1, 0.2].iter().enumerate() {
            let pert = perturb_likelihood(inst.model.neg_log_lik(), eps, 17 * s + j as u64);
            let r = perturbation_suite(&inst.model, &inst.kernel, &pert).unwrap();
            checks += 1;
            violations += usize::from(!(r.acceptance.pass && r.acceptance.max_diff <= 8.0 * pert.eps + 1e-15));
            violations += usize::from(!r.gap.pass);
            violations += usize::from(!r.tv.pass);
        }
    }
    outcome(violations == 0, format!("{checks} perturbed instances, {violations} violations"))
}

fn mixing() -> Outcome {
    let mut worst_ratio: f64 = 0.0;
    let mut fails = 0;
    for i in walk_instances() {
        let chain = build_transition_matrix(&i.model, &i.kernel).unwrap();
        for p in mixing_profile(&chain, 100) {
            fails += usize::from(!p.holds());
            if p.bound > 1e-6 {
                worst_ratio = worst_ratio.max(p.exact / p.bound);
            }
        }
    }
    outcome(fails == 0, format!("{fails} violations over n <= 100, max d(n)/bound where bound > 1e-6: {worst_ratio:.4}"))
}

fn qmci() -> Outcome {
    let terms: Vec<Vec<f64>> = (0..4).map(|x| (0..8).map(|i| ((i * 3 + x * 5) % 8) as f64 * 0.25 + 0.1 * x as f64).collect()).collect();
    let o = LikelihoodOracle::new(terms, vec![0.0; 4], 0.0, None).unwrap();
    let eps = 0.25 * o.sigma();
    let mut success = 0;
    let mut worst_branch: f64 = 0.0;
    for seed in 0..200u64 {
        let r = qmci_mean(&o, (seed % 4) as usize, eps, 0.1, QmciMode::Faithful, seed).unwrap();
        if r.success {
            success += 1;
            worst_branch = worst_branch.max((r.estimate - o.l_sum((seed % 4) as usize)).abs());
        }
    }
    let mut worst_emu: f64 = 0.0;
    for x in 0..4 {
        let r = qmci_mean(&o, x, eps, 0.1, QmciMode::Emulated, 3).unwrap();
        worst_emu = worst_emu.max((r.estimate - o.l_sum(x)).abs());
    }
    let rounding = round_at_bit(1.375, -1) == 1.0 && round_at_bit(1.375, -2) == 1.25;
    let freq = success as f64 / 200.0;
    outcome(
        freq >= 0.9 && worst_branch <= eps && worst_emu <= eps && rounding,
        format!("eps {eps:.4}, success frequency {freq:.3}, max success error {worst_branch:.4}, max emulated error {worst_emu:.4}, rounding {rounding}"),
    )
}

fn end_to_end() -> Outcome {
    let n = 8;
    let terms: Vec<Vec<f64>> =
        (0..n).map(|x| (0..6).map(|i| 2.0 * x as f64 + 0.3 * (((i * 5 + x * 3) % 5) as f64 - 2.0)).collect()).collect();
    let o = LikelihoodOracle::normalized(terms, vec![0.0; n], None).unwrap();
    let model = TargetModel::with_uniform_prior(o.likelihoods()).unwrap();
    let space = StateSpace::ring(n).unwrap();
    let t = ProposalKernel::nearest_neighbor(&space, 0.3).unwrap();
    let out = qsa_with_qmci(&o, &model, &space, &t, &QsaQmciConfig::new(0.2, 0.1, 11)).unwrap();
    let floor = 0.9 * E.powi(-2);
    let min_overlap = out.schedule.min_exact_overlap();
    let sampled_tv = out.sampled.as_ref().map_or(f64::INFINITY, |s| tv_distance(s, &out.p));
    outcome(
        out.success() && out.tv <= 0.2 && out.schedule.stages() <= out.schedule.l_max && min_overlap >= floor,
        format!(
            "TV(P~, P) {:.4}, prepared TV {sampled_tv:.4}, stages {} <= l_max {}, min overlap {min_overlap:.4} (floor {floor:.4})",
            out.tv,
            out.schedule.stages(),
            out.schedule.l_max
        ),
    )
}

fn credible() -> Outcome {
    let n = 16;
    let xs: Vec<f64> = (0..n).map(|i| i as f64 * 0.5).collect();
    let s = StateSpace::line(xs.clone()).unwrap();
    let l: Vec<f64> = xs.iter().map(|x| (x - 3.6).powi(2) / (2.0 * 1.1f64.powi(2))).collect();
    let terms: Vec<Vec<f64>> =
        l.iter().enumerate().map(|(x, &v)| (0..8).map(|i| v + 0.4 * (((i * 5 + x * 3) % 7) as f64 - 3.0)).collect()).collect();
    let o = LikelihoodOracle::normalized(terms, vec![0.0; n], None).unwrap();
    let model = TargetModel::with_uniform_prior(o.likelihoods()).unwrap();
    let p = model.distribution();
    let t = ProposalKernel::nearest_neighbor(&s, 0.5).unwrap();
    let q = CredibleQuery::new(0, 0.5, 0.05, 0.1, Side::Upper).unwrap();
    let mut good = 0;
    let mut max_iter = 0;
    for seed in 0..100u64 {
        let out = qsa_with_qmci(&o, &model, &s, &t, &QsaQmciConfig::new(0.05 / 27.0, 0.05, seed)).unwrap();
        let Ok(prep) = PreparedState::from_anneal(&out) else { continue };
        let mut est = QmciTail { prep: &prep, space: &s, axis: 0, rng: ChaCha8Rng::seed_from_u64(seed) };
        let r = credible_bound_search(&q, &s, &mut est).unwrap();
        max_iter = max_iter.max(r.iterations);
        if let Some(b) = r.bound {
            if (cdf_exact(&p, &s, 0, b).unwrap() - 0.25).abs() <= 0.05 {
                good += 1;
            }
        }
    }
    let budget = search_iterations(n);
    outcome(good >= 90 && max_iter <= budget, format!("{good}/100 within 0.05, max iterations {max_iter} <= {budget}"))
}

fn scaling() -> Outcome {
    let report = scaling_study(&ScalingConfig::default()).unwrap();
    let slope = |m| report.slope(m).unwrap_or(f64::NAN);
    let (p, e, c) = (slope(Method::Proposed), slope(Method::ExactQsa), slope(Method::ClassicalMh));
    let all_ok = report.records.iter().all(|r| r.success);
    outcome(
        (p - 0.5).abs() <= 0.15 && (e - 1.0).abs() <= 0.15 && (c - 1.0).abs() <= 0.15 && all_ok,
        format!("slopes proposed {p:.3}, exact-qsa {e:.3}, classical-mh {c:.3}; all runs succeeded {all_ok}"),
    )
}

fn gw() -> Outcome {
    let ms = [256usize, 512, 1024, 2048, 4096];
    let mut worst_decomp: f64 = 0.0;
    let mut sigmas = Vec::new();
    for &m in &ms {
        let inst = synth_gw_instance(&GwParams::standard(m, 7)).unwrap();
        for x in 0..inst.space.len() {
            worst_decomp = worst_decomp.max((inst.oracle.likelihood(x) - inst.likelihood_direct(x)).abs());
        }
        sigmas.push(inst.measured_sigma());
    }
    let worst_ratio = ms
        .iter()
        .zip(&sigmas)
        .map(|(&m, s)| (s / sigmas[0] / (m as f64 / ms[0] as f64).sqrt() - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(
        worst_decomp <= 1e-9 && worst_ratio <= 0.15,
        format!("max |L - (L_sum + l0 + C)| {worst_decomp:.2e}, max sqrt(M) deviation {:.2}%", 100.0 * worst_ratio),
    )
}

type Check = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() -> ExitCode {
    let checks: [Check; 10] = [
        ("phase-gap", phase_gap, Some(Duration::from_secs(60))),
        ("block-identity", block_identity, None),
        ("pi3-amplification", amplification, None),
        ("perturbation-bounds", perturbation, Some(Duration::from_secs(120))),
        ("mixing-bound", mixing, None),
        ("qmci-mean", qmci, None),
        ("qsa-qmci-end-to-end", end_to_end, None),
        ("credible-bound", credible, None),
        ("query-scaling", scaling, Some(Duration::from_secs(600))),
        ("gw-decomposition", gw, None),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in checks.iter().enumerate() {
        let start = Instant::now();
        let r = run();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = r.pass && in_time;
        failed += usize::from(!pass);
        println!("{} {:>2} {name}: {} [{:.2}s]", if pass { "PASS" } else { "FAIL" }, i + 1, r.detail, elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
