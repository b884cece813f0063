//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them as they finish).
//!
//! The reference-scale batches (criteria 3, 4 and 9) take a few minutes on
//! one core; everything else is seconds.

use std::time::Instant;

use ndarray::Array1;
use num_complex::Complex64;
use once_cell::sync::Lazy;

use qst::experiments::{
    empirical_cdf, run_divergence, run_trials, DivergenceConfig, ExperimentConfig,
    ExperimentResult, InitMode,
};
use qst::likelihood::{
    covariance_inverse, minimize, nll_exact, nll_gauss, params_to_state, state_to_params,
    CountData, LikelihoodParams, MinimizeOptions, MlObjective, PermutationContext,
    RegularizedProbs,
};
use qst::linalg::adjoint;
use qst::measurements::{
    probabilities, single_qubit_eigs, stacked_matrix, Axis, MeasurementSetup, SetupKind,
};
use qst::phasecut::{build_problem, solve, PhaseCutOptions};
use qst::recursive::reconstruct_recursive;
use qst::rng::{derive_seed, purpose_rng, seeded, Purpose};
use qst::sampling::{sample_probabilities, simulate_shots};
use qst::states::{error_mu, random_state, StateVector, MU_MAX};

fn report(criterion: &str, pass: bool, detail: String) {
    println!(
        "[acceptance] criterion {criterion}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// Criteria 3 and 9 share one pair of reference-scale batch runs.
static REFERENCE_SCALE_RUNS: Lazy<(ExperimentResult, ExperimentResult)> = Lazy::new(|| {
    let make = |setup: SetupKind| {
        let mut cfg = ExperimentConfig::new(7, setup, 5000, 200, 0x51AB);
        cfg.ml_objectives = vec![MlObjective::Mixed];
        cfg.init_modes = vec![InitMode::Estimate];
        cfg
    };
    let small = run_trials(&make(SetupKind::Small)).expect("small batch");
    let tall = run_trials(&make(SetupKind::Tall)).expect("tall batch");
    (small, tall)
});

#[test]
fn criterion_1_noiseless_recursive_exactness() {
    let start = Instant::now();
    let mut rng = seeded(1001);
    let mut worst = 0.0f64;
    for n_qb in 1..=5 {
        let setup = MeasurementSetup::tall(n_qb).unwrap();
        for _ in 0..100 {
            let v = random_state(n_qb, &mut rng);
            let p = probabilities(&setup, &v).unwrap();
            let (v_hat, _) = reconstruct_recursive(&p, n_qb).unwrap();
            let mu = error_mu(&v, &v_hat).unwrap().mu;
            worst = worst.max(mu);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "1 (noiseless recursive exactness)",
        worst < 1e-6 && elapsed < 60.0,
        format!("max mu {worst:.2e} over 500 states, {elapsed:.1} s"),
    );
}

#[test]
fn criterion_2_noiseless_phasecut_plus_mixed_ml() {
    let start = Instant::now();
    let mut rng = seeded(1002);
    let mut worst = 0.0f64;
    for n_qb in [1usize, 2] {
        let setup = MeasurementSetup::small(n_qb).unwrap();
        let a = stacked_matrix(&setup);
        for _ in 0..25 {
            let v = random_state(n_qb, &mut rng);
            let p = probabilities(&setup, &v).unwrap();
            let problem = build_problem(&a, &p).unwrap();
            let opts = PhaseCutOptions {
                sweeps: 1000,
                nu: 0.01,
            };
            let init = solve(&problem, &opts, &mut rng).v_hat;
            let data = CountData::from_probabilities(&p, 1e6);
            let est = minimize(&init, &data, &a, &MinimizeOptions::new(MlObjective::Mixed))
                .unwrap();
            let mu = error_mu(&v, &est.v_hat).unwrap().mu;
            worst = worst.max(mu);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "2 (noiseless PhaseCut + mixed ML)",
        worst < 1e-6 && elapsed < 300.0,
        format!("max mu {worst:.2e} over 50 states, {elapsed:.1} s"),
    );
}

#[test]
fn criterion_3_reference_medians_at_desk_scale() {
    let (small, tall) = &*REFERENCE_SCALE_RUNS;
    let median_small = small.median_mu("mixed-estimate").unwrap();
    let median_tall = tall.median_mu("mixed-estimate").unwrap();
    let ok_small = (median_small - 0.22).abs() <= 0.03;
    let ok_tall = (median_tall - 0.19).abs() <= 0.03;
    report(
        "3 (reference medians, n_qb=7, N_c=5000, 200 trials)",
        ok_small && ok_tall,
        format!("median mu small {median_small:.4} (target 0.22±0.03), tall {median_tall:.4} (target 0.19±0.03)"),
    );
}

#[test]
fn criterion_4_inverse_sqrt_shot_scaling() {
    let mut ratios = Vec::new();
    for setup in [SetupKind::Small, SetupKind::Tall] {
        let mut medians = Vec::new();
        for shots in [5000u64, 500_000] {
            let mut cfg = ExperimentConfig::new(4, setup, shots, 200, 0x5CA1E);
            cfg.ml_objectives = vec![MlObjective::Mixed];
            cfg.init_modes = vec![InitMode::Estimate];
            let result = run_trials(&cfg).unwrap();
            medians.push(result.median_mu("mixed-estimate").unwrap());
        }
        ratios.push((setup, medians[0] / medians[1]));
    }
    let pass = ratios.iter().all(|&(_, r)| (7.0..=14.0).contains(&r));
    report(
        "4 (error scales like 1/sqrt(N))",
        pass,
        format!(
            "median ratios at 100x shots: small {:.2}, tall {:.2} (allowed 7..14)",
            ratios[0].1, ratios[1].1
        ),
    );
}

#[test]
fn criterion_5_initialization_robustness_ordering() {
    let cfg = DivergenceConfig::new(5, SetupKind::Small, 5000, 200, 0xD1FF);
    let result = run_divergence(&cfg).unwrap();
    let gauss = result.curve(MlObjective::Gauss).unwrap();
    let mixed = result.curve(MlObjective::Mixed).unwrap();
    let exact = result.curve(MlObjective::Exact).unwrap();
    let mut worst_gap_gm = f64::NEG_INFINITY;
    let mut worst_gap_me = f64::NEG_INFINITY;
    for (i, &mu) in gauss.grid.iter().enumerate() {
        if mu > 0.75 {
            break;
        }
        worst_gap_gm = worst_gap_gm.max(gauss.delta[i] - mixed.delta[i]);
        worst_gap_me = worst_gap_me.max(mixed.delta[i] - (exact.delta[i] + 0.05));
    }
    let pass = worst_gap_gm <= 0.0 && worst_gap_me <= 0.0;
    report(
        "5 (divergence-rate ordering gauss <= mixed <= exact+0.05 on [0, 0.75])",
        pass,
        format!("worst gauss-mixed gap {worst_gap_gm:.3}, worst mixed-(exact+0.05) gap {worst_gap_me:.3}"),
    );
}

#[test]
fn criterion_6_gradient_correctness() {
    let mut worst = 0.0f64;
    let mut rng = seeded(1006);
    for n_qb in 1..=4usize {
        for setup in [
            MeasurementSetup::small(n_qb).unwrap(),
            MeasurementSetup::tall(n_qb).unwrap(),
        ] {
            let a = stacked_matrix(&setup);
            let v = random_state(n_qb, &mut rng);
            let rec = simulate_shots(&setup, &v, 200 * setup.n_types() as u64, &mut rng)
                .unwrap();
            let data = CountData::from_record(&rec);
            let reg = RegularizedProbs::new(&data, setup.dim(), 5.0).unwrap();
            let ctx = PermutationContext::identity();
            for point in 0..20 {
                let k = setup.dim() - 1;
                let params = LikelihoodParams {
                    x_prime: Array1::from_shape_fn(k, |_| {
                        2.0 * (rand::Rng::random::<f64>(&mut rng) - 0.5)
                    }),
                    y_prime: Array1::from_shape_fn(k, |_| {
                        2.0 * (rand::Rng::random::<f64>(&mut rng) - 0.5)
                    }),
                };
                for exact in [true, false] {
                    let f = |p: &LikelihoodParams| {
                        if exact {
                            nll_exact(p, &data, &a, &ctx).unwrap()
                        } else {
                            nll_gauss(p, &data, &a, &ctx, &reg).unwrap()
                        }
                    };
                    let (_, grad) = f(&params);
                    let h = 1e-6;
                    let mut fd = Vec::with_capacity(2 * k);
                    for i in 0..2 * k {
                        let perturb = |delta: f64| {
                            let mut xp = params.x_prime.clone();
                            let mut yp = params.y_prime.clone();
                            if i < k {
                                xp[i] += delta;
                            } else {
                                yp[i - k] += delta;
                            }
                            f(&LikelihoodParams {
                                x_prime: xp,
                                y_prime: yp,
                            })
                            .0
                        };
                        fd.push((perturb(h) - perturb(-h)) / (2.0 * h));
                    }
                    let diff: f64 = grad
                        .iter()
                        .zip(fd.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    let scale: f64 = fd.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
                    worst = worst.max(diff / scale);
                    let _ = point;
                }
            }
        }
    }
    report(
        "6 (analytic gradients vs central differences)",
        worst < 1e-5,
        format!("worst relative error {worst:.2e}"),
    );
}

#[test]
fn criterion_7_covariance_algebra() {
    let mut rng = seeded(1007);
    let mut worst_inv = 0.0f64;
    let mut worst_quad = 0.0f64;
    for _ in 0..100 {
        let d = 2 + (rand::Rng::random::<u32>(&mut rng) % 15) as usize;
        let mut p: Vec<f64> = (0..d)
            .map(|_| rand::Rng::random::<f64>(&mut rng) + 0.02)
            .collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);

        // Inverse identity.
        let inv = covariance_inverse(&p).unwrap();
        let mut sigma = ndarray::Array2::<f64>::zeros((d - 1, d - 1));
        for i in 0..d - 1 {
            for j in 0..d - 1 {
                sigma[(i, j)] = if i == j { p[i] - p[i] * p[j] } else { -p[i] * p[j] };
            }
        }
        let prod = sigma.dot(&inv);
        for i in 0..d - 1 {
            for j in 0..d - 1 {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst_inv = worst_inv.max((prod[(i, j)] - expect).abs());
            }
        }

        // Quadratic-form equivalence for a zero-sum error vector.
        let mut eps: Vec<f64> = (0..d)
            .map(|_| rand::Rng::random::<f64>(&mut rng) - 0.5)
            .collect();
        let mean = eps.iter().sum::<f64>() / d as f64;
        eps.iter_mut().for_each(|x| *x -= mean);
        let n = 333.0;
        let full: f64 = (0..d).map(|k| n * eps[k] * eps[k] / p[k]).sum();
        let reduced = Array1::from_vec(eps[..d - 1].to_vec());
        let quad = n * reduced.dot(&inv.dot(&reduced));
        worst_quad = worst_quad.max((full - quad).abs());
    }
    report(
        "7 (covariance inverse identity and quadratic-form equivalence)",
        worst_inv < 1e-10 && worst_quad < 1e-10,
        format!("worst |Σ̃Σ̃⁻¹−I| {worst_inv:.2e}, worst form gap {worst_quad:.2e}"),
    );
}

#[test]
fn criterion_8_structural_invariants() {
    let mut rng = seeded(1008);
    let mut checks: Vec<(String, bool)> = Vec::new();

    // Unitary measurement blocks for both families and a custom setup.
    let mut unitary_ok = true;
    for n_qb in 1..=5 {
        for setup in [
            MeasurementSetup::small(n_qb).unwrap(),
            MeasurementSetup::tall(n_qb).unwrap(),
        ] {
            let a = stacked_matrix(&setup);
            for k in 0..setup.n_types() {
                let b = a.block(k).to_owned();
                let prod = b.dot(&adjoint(&b));
                for i in 0..setup.dim() {
                    for j in 0..setup.dim() {
                        let expect = if i == j { 1.0 } else { 0.0 };
                        if (prod[(i, j)] - Complex64::new(expect, 0.0)).norm() >= 1e-12 {
                            unitary_ok = false;
                        }
                    }
                }
            }
        }
    }
    checks.push(("unitary blocks".into(), unitary_ok));

    // Probability blocks are normalized distributions.
    let mut norm_ok = true;
    for n_qb in 1..=6 {
        let setup = MeasurementSetup::tall(n_qb).unwrap();
        for _ in 0..10 {
            let v = random_state(n_qb, &mut rng);
            let p = probabilities(&setup, &v).unwrap();
            if p.iter().any(|&x| x < 0.0) {
                norm_ok = false;
            }
            let d = setup.dim();
            for k in 0..setup.n_types() {
                let s: f64 = p.iter().skip(k * d).take(d).sum();
                if (s - 1.0).abs() >= 1e-12 {
                    norm_ok = false;
                }
            }
        }
    }
    checks.push(("probability block sums".into(), norm_ok));

    // Error-metric properties.
    let mut metric_ok = true;
    for _ in 0..50 {
        let v = random_state(3, &mut rng);
        let w = random_state(3, &mut rng);
        let err = error_mu(&v, &w).unwrap();
        if (err.fidelity - (1.0 - err.mu * err.mu / 2.0)).abs() >= 1e-12 {
            metric_ok = false;
        }
        if !(0.0..=MU_MAX + 1e-12).contains(&err.mu) {
            metric_ok = false;
        }
        for k in 0..16 {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
            let phase_err = error_mu(&v, &w.with_global_phase(phi)).unwrap().mu;
            if (phase_err - err.mu).abs() >= 1e-12 {
                metric_ok = false;
            }
        }
    }
    let e0 = StateVector::basis_state(2, 0).unwrap();
    let e3 = StateVector::basis_state(2, 3).unwrap();
    if (error_mu(&e0, &e3).unwrap().mu - MU_MAX).abs() >= 1e-12 {
        metric_ok = false;
    }
    checks.push(("mu metric properties".into(), metric_ok));

    // PhaseCut objective monotonicity on noisy data (also asserted
    // inside the solver on every run).
    let mut mono_ok = true;
    for n_qb in [2usize, 3] {
        let setup = MeasurementSetup::small(n_qb).unwrap();
        let a = stacked_matrix(&setup);
        let v = random_state(n_qb, &mut rng);
        let rec = simulate_shots(&setup, &v, 2000, &mut rng).unwrap();
        let p_hat = sample_probabilities(&rec);
        let problem = build_problem(&a, &p_hat).unwrap();
        let r = solve(
            &problem,
            &PhaseCutOptions {
                sweeps: 40,
                nu: 0.01,
            },
            &mut rng,
        );
        let tol = 1e-9 * r.objective_trace[0].abs().max(1.0);
        for w in r.objective_trace.windows(2) {
            if w[1] > w[0] + tol {
                mono_ok = false;
            }
        }
        if r.u_hat.iter().any(|z| (z.norm() - 1.0).abs() >= 1e-9) {
            mono_ok = false;
        }
    }
    checks.push(("phasecut objective monotone".into(), mono_ok));

    // Single-qubit eigenvector matrices pinned to their definitions.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let ey = single_qubit_eigs(Axis::Y);
    let pin_ok = (ey[(1, 0)] - Complex64::new(0.0, s)).norm() < 1e-15
        && (ey[(1, 1)] - Complex64::new(0.0, -s)).norm() < 1e-15;
    checks.push(("eigenvector matrix pins".into(), pin_ok));

    let all = checks.iter().all(|(_, ok)| *ok);
    let detail = checks
        .iter()
        .map(|(name, ok)| format!("{name}: {}", if *ok { "ok" } else { "VIOLATED" }))
        .collect::<Vec<_>>()
        .join(", ");
    report("8 (structural invariants suite)", all, detail);
}

#[test]
fn criterion_9_no_outliers_in_reference_runs() {
    let (small, tall) = &*REFERENCE_SCALE_RUNS;
    let worst_small = small
        .mus_for_stage("mixed-estimate")
        .into_iter()
        .fold(0.0f64, f64::max);
    let worst_tall = tall
        .mus_for_stage("mixed-estimate")
        .into_iter()
        .fold(0.0f64, f64::max);
    let outliers = small
        .mus_for_stage("mixed-estimate")
        .iter()
        .chain(tall.mus_for_stage("mixed-estimate").iter())
        .filter(|&&mu| mu > 0.75)
        .count();
    report(
        "9 (no outliers above 0.75 in the reference-scale runs)",
        outliers == 0,
        format!("worst mu small {worst_small:.3}, tall {worst_tall:.3}, outliers {outliers}"),
    );
}

/// Not a numbered criterion, but the batch runner's own contracts:
/// reference dominance and reproducibility of the row data.
#[test]
fn experiment_contracts_hold() {
    let mut cfg = ExperimentConfig::new(3, SetupKind::Tall, 5000, 40, 0xBEEF);
    cfg.ml_objectives = vec![MlObjective::Mixed];
    cfg.init_modes = vec![InitMode::Estimate, InitMode::Truth, InitMode::Random];
    let run = run_trials(&cfg).unwrap();

    // v_ref (truth-initialized optimum) dominates v_ml in >= 95% of trials.
    let ml = run.mus_for_stage("mixed-estimate");
    let reference = run.mus_for_stage("mixed-truth");
    let dominated = ml
        .iter()
        .zip(reference.iter())
        .filter(|(m, r)| **r <= **m + 0.01)
        .count();
    let frac = dominated as f64 / ml.len() as f64;
    assert!(frac >= 0.95, "reference dominance {frac}");

    // CDF shape.
    let cdf = empirical_cdf(&ml);
    assert!(cdf.first().unwrap().1 > 0.0);
    assert!((cdf.last().unwrap().1 - 1.0).abs() < 1e-12);

    // Bitwise reproducibility of everything except wall time.
    let again = run_trials(&cfg).unwrap();
    for (a, b) in run.rows.iter().zip(again.rows.iter()) {
        assert_eq!(a.trial, b.trial);
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.stage, b.stage);
        assert_eq!(a.mu.to_bits(), b.mu.to_bits());
        assert_eq!(a.converged, b.converged);
        assert_eq!(a.failure_flag, b.failure_flag);
    }

    // Per-trial seeds in the rows are the documented derivation.
    assert_eq!(run.rows[0].seed, derive_seed(0xBEEF, 0));

    // Deterministic sub-streams reproduce a trial standalone.
    let trial_seed = derive_seed(0xBEEF, 7);
    let v1 = random_state(3, &mut purpose_rng(trial_seed, Purpose::StateGen));
    let v2 = random_state(3, &mut purpose_rng(trial_seed, Purpose::StateGen));
    assert_eq!(v1.amplitudes(), v2.amplitudes());

    println!("[acceptance] experiment contracts: PASS (reference dominance {frac:.2})");
}

/// Noiseless reconstruct-from-parameters sanity: the parameterization
/// reaches any state (round trip through a permuted basis).
#[test]
fn parameterization_reaches_arbitrary_states() {
    let mut rng = seeded(4242);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let v = random_state(4, &mut rng);
        let ctx = PermutationContext::from_state(&v);
        let p = state_to_params(&ctx.apply_to_state(&v));
        let back = ctx.apply_to_state(&params_to_state(&p));
        worst = worst.max(error_mu(&v, &back).unwrap().mu);
    }
    assert!(worst < 1e-9, "worst round-trip mu {worst}");
    println!("[acceptance] parameterization round trip: PASS (worst mu {worst:.2e})");
}
