//! Batched reconstruction experiments: per-trial error records, empirical
//! CDFs, medians, and divergence-rate curves over initialization error.
//!
//! Trials are embarrassingly parallel; every trial derives its own RNG
//! streams from the master seed, so results are independent of execution
//! order and thread count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{minimize, CountData, MinimizeOptions, MlObjective};
use crate::measurements::{stacked_matrix, MeasurementSetup, SetupKind, StackedMatrix};
use crate::phasecut::{build_problem, solve, PhaseCutOptions};
use crate::recursive::reconstruct_recursive;
use crate::rng::{derive_seed, purpose_rng, Purpose};
use crate::sampling::{sample_probabilities, simulate_shots};
use crate::states::{error_mu, random_state, state_at_error, StateVector, MU_MAX};

/// Initial estimator feeding the likelihood refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMethod {
    PhaseCut,
    Recursive,
}

impl std::fmt::Display for InitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitMethod::PhaseCut => write!(f, "phasecut"),
            InitMethod::Recursive => write!(f, "recursive"),
        }
    }
}

/// Where each likelihood run starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// The initial estimator's output (the practically available start).
    Estimate,
    /// The true state (reference optimum, unavailable in practice).
    Truth,
    /// A fresh random state.
    Random,
}

impl std::fmt::Display for InitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitMode::Estimate => write!(f, "estimate"),
            InitMode::Truth => write!(f, "truth"),
            InitMode::Random => write!(f, "random"),
        }
    }
}

fn default_ml_objectives() -> Vec<MlObjective> {
    vec![MlObjective::Mixed]
}

fn default_init_modes() -> Vec<InitMode> {
    vec![InitMode::Estimate]
}

fn default_phasecut_updates() -> usize {
    5000
}

fn default_phasecut_nu() -> f64 {
    0.01
}

fn default_ml_max_iters() -> usize {
    10_000
}

fn default_mixed_gauss_iters() -> usize {
    crate::likelihood::DEFAULT_MIXED_GAUSS_ITERS
}

fn default_reg_count() -> f64 {
    crate::likelihood::DEFAULT_REG_COUNT
}

/// One batch experiment: `trials` random states measured with `total_shots`
/// split over the setup's types, reconstructed and refined.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_qb: usize,
    pub setup: SetupKind,
    pub total_shots: u64,
    pub trials: usize,
    pub master_seed: u64,
    /// Defaults to PhaseCut for the small setup and the recursive
    /// estimator for the tall one.
    #[serde(default)]
    pub init_method: Option<InitMethod>,
    #[serde(default = "default_ml_objectives")]
    pub ml_objectives: Vec<MlObjective>,
    #[serde(default = "default_init_modes")]
    pub init_modes: Vec<InitMode>,
    /// Coordinate-update budget for PhaseCut (rounded up to whole sweeps).
    #[serde(default = "default_phasecut_updates")]
    pub phasecut_updates: usize,
    #[serde(default = "default_phasecut_nu")]
    pub phasecut_nu: f64,
    #[serde(default = "default_ml_max_iters")]
    pub ml_max_iters: usize,
    #[serde(default = "default_mixed_gauss_iters")]
    pub mixed_gauss_iters: usize,
    #[serde(default = "default_reg_count")]
    pub reg_count: f64,
}

impl ExperimentConfig {
    pub fn new(
        n_qb: usize,
        setup: SetupKind,
        total_shots: u64,
        trials: usize,
        master_seed: u64,
    ) -> Self {
        Self {
            n_qb,
            setup,
            total_shots,
            trials,
            master_seed,
            init_method: None,
            ml_objectives: default_ml_objectives(),
            init_modes: default_init_modes(),
            phasecut_updates: default_phasecut_updates(),
            phasecut_nu: default_phasecut_nu(),
            ml_max_iters: default_ml_max_iters(),
            mixed_gauss_iters: default_mixed_gauss_iters(),
            reg_count: default_reg_count(),
        }
    }

    pub fn resolved_init_method(&self) -> InitMethod {
        self.init_method.unwrap_or(match self.setup {
            SetupKind::Tall => InitMethod::Recursive,
            _ => InitMethod::PhaseCut,
        })
    }

    fn build_setup(&self) -> Result<MeasurementSetup> {
        match self.setup {
            SetupKind::Small => MeasurementSetup::small(self.n_qb),
            SetupKind::Tall => MeasurementSetup::tall(self.n_qb),
            SetupKind::Custom => Err(Error::InvalidConfig(
                "experiments need a small or tall setup".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<MeasurementSetup> {
        let setup = self.build_setup()?;
        if self.resolved_init_method() == InitMethod::Recursive
            && setup.kind() != SetupKind::Tall
        {
            return Err(Error::InvalidConfig(
                "the recursive estimator needs the tall setup".into(),
            ));
        }
        if self.total_shots < setup.n_types() as u64 {
            return Err(Error::InvalidConfig(format!(
                "{} total shots cannot cover {} measurement types",
                self.total_shots,
                setup.n_types()
            )));
        }
        Ok(setup)
    }

    fn minimize_options(&self, objective: MlObjective) -> MinimizeOptions {
        let mut opts = MinimizeOptions::new(objective);
        opts.max_iters = self.ml_max_iters;
        opts.mixed_gauss_iters = self.mixed_gauss_iters;
        opts.reg_count = self.reg_count;
        opts
    }
}

/// One CSV row: a reconstruction stage of one trial.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub stage: String,
    pub mu: f64,
    pub seconds: f64,
    pub converged: bool,
    pub failure_flag: bool,
}

/// All rows of a batch experiment plus the stage order.
#[derive(Clone, Debug, Default)]
pub struct ExperimentResult {
    pub rows: Vec<TrialRow>,
    pub stages: Vec<String>,
}

impl ExperimentResult {
    pub fn mus_for_stage(&self, stage: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.stage == stage)
            .map(|r| r.mu)
            .collect()
    }

    pub fn seconds_for_stage(&self, stage: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.stage == stage)
            .map(|r| r.seconds)
            .collect()
    }

    pub fn median_mu(&self, stage: &str) -> Option<f64> {
        median(&self.mus_for_stage(stage))
    }
}

/// Sample median (mean of the central pair for even counts).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

/// Right-continuous empirical CDF: for sorted samples `x_(1) ≤ … ≤ x_(n)`
/// the pairs `(x_(i), i/n)`.
pub fn empirical_cdf(errors: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect()
}

/// Kernel-smoothed divergence rate
/// `δ(μ) = ½(1 + Σ bᵢ e^{−((μ−μᵢ)/α)²} / Σ e^{−((μ−μᵢ)/α)²})`.
pub fn divergence_rate(
    mu_grid: &[f64],
    mu_inits: &[f64],
    b: &[i8],
    alpha: f64,
) -> Result<Vec<f64>> {
    if mu_inits.is_empty() || mu_inits.len() != b.len() {
        return Err(Error::InvalidArgument(
            "divergence_rate needs matching nonempty samples".into(),
        ));
    }
    if alpha <= 0.0 {
        return Err(Error::InvalidArgument("alpha must be positive".into()));
    }
    Ok(mu_grid
        .iter()
        .map(|&mu| {
            let mut num = 0.0;
            let mut den = 0.0;
            for (&mi, &bi) in mu_inits.iter().zip(b.iter()) {
                let t = (mu - mi) / alpha;
                let w = (-t * t).exp();
                num += bi as f64 * w;
                den += w;
            }
            if den > 0.0 {
                0.5 * (1.0 + num / den)
            } else {
                // No kernel mass reaches this grid point.
                0.5
            }
        })
        .collect())
}

/// Whether two likelihood optima count as the same minimum: their mutual
/// error must be below one percent of the reference-to-truth error
/// (strict inequality).
pub fn same_minimum(v_a: &StateVector, v_b: &StateVector, v_truth_error: f64) -> Result<bool> {
    Ok(error_mu(v_a, v_b)?.mu < 0.01 * v_truth_error)
}

struct TrialContext<'a> {
    cfg: &'a ExperimentConfig,
    setup: &'a MeasurementSetup,
    a: &'a StackedMatrix,
}

fn run_single_trial(ctx: &TrialContext<'_>, trial: usize) -> Result<Vec<TrialRow>> {
    let cfg = ctx.cfg;
    let trial_seed = derive_seed(cfg.master_seed, trial as u64);
    let truth = random_state(cfg.n_qb, &mut purpose_rng(trial_seed, Purpose::StateGen));
    let rec = simulate_shots(
        ctx.setup,
        &truth,
        cfg.total_shots,
        &mut purpose_rng(trial_seed, Purpose::Shots),
    )?;
    let p_hat = sample_probabilities(&rec);
    let data = CountData::from_record(&rec);

    let mut rows = Vec::new();

    let start = Instant::now();
    let (initial, init_converged, init_failure) = match cfg.resolved_init_method() {
        InitMethod::PhaseCut => {
            let problem = build_problem(ctx.a, &p_hat)?;
            let opts = PhaseCutOptions {
                nu: cfg.phasecut_nu,
                ..PhaseCutOptions::from_update_budget(cfg.phasecut_updates, problem.n_prob())
            };
            let r = solve(&problem, &opts, &mut purpose_rng(trial_seed, Purpose::Solver));
            (r.v_hat, true, false)
        }
        InitMethod::Recursive => {
            let (v_hat, diag) = reconstruct_recursive(&p_hat, cfg.n_qb)?;
            (v_hat, true, diag.in_failure_set())
        }
    };
    rows.push(TrialRow {
        trial,
        seed: trial_seed,
        stage: "init".into(),
        mu: error_mu(&truth, &initial)?.mu,
        seconds: start.elapsed().as_secs_f64(),
        converged: init_converged,
        failure_flag: init_failure,
    });

    // One random initialization per trial, shared across objectives so
    // their rows are comparable.
    let random_init = if cfg.init_modes.contains(&InitMode::Random) {
        Some(random_state(
            cfg.n_qb,
            &mut purpose_rng(trial_seed, Purpose::Init),
        ))
    } else {
        None
    };

    for &objective in &cfg.ml_objectives {
        for &mode in &cfg.init_modes {
            let init_state = match mode {
                InitMode::Estimate => initial.clone(),
                InitMode::Truth => truth.clone(),
                InitMode::Random => random_init.clone().expect("generated above"),
            };
            let start = Instant::now();
            let est = minimize(&init_state, &data, ctx.a, &cfg.minimize_options(objective))?;
            rows.push(TrialRow {
                trial,
                seed: trial_seed,
                stage: format!("{objective}-{mode}"),
                mu: error_mu(&truth, &est.v_hat)?.mu,
                seconds: start.elapsed().as_secs_f64(),
                converged: est.converged,
                failure_flag: init_failure && mode == InitMode::Estimate,
            });
        }
    }
    Ok(rows)
}

/// Runs the batch experiment. Deterministic for a fixed master seed (up
/// to wall-clock timings); trials execute in parallel.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let setup = cfg.validate()?;
    let a = stacked_matrix(&setup);
    let ctx = TrialContext {
        cfg,
        setup: &setup,
        a: &a,
    };

    let per_trial: Result<Vec<Vec<TrialRow>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_single_trial(&ctx, t))
        .collect();
    let rows: Vec<TrialRow> = per_trial?.into_iter().flatten().collect();

    let mut stages = vec!["init".to_string()];
    for &objective in &cfg.ml_objectives {
        for &mode in &cfg.init_modes {
            stages.push(format!("{objective}-{mode}"));
        }
    }
    Ok(ExperimentResult { rows, stages })
}

/// Divergence-rate experiment: how far off may the likelihood start
/// before it stops converging to the reference minimum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DivergenceConfig {
    pub n_qb: usize,
    pub setup: SetupKind,
    pub total_shots: u64,
    /// Number of (state, initialization) pairs; errors sweep 0..√2.
    pub inits: usize,
    pub master_seed: u64,
    #[serde(default = "default_divergence_objectives")]
    pub objectives: Vec<MlObjective>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_ml_max_iters")]
    pub ml_max_iters: usize,
    #[serde(default = "default_mixed_gauss_iters")]
    pub mixed_gauss_iters: usize,
    #[serde(default = "default_reg_count")]
    pub reg_count: f64,
}

fn default_divergence_objectives() -> Vec<MlObjective> {
    vec![MlObjective::Exact, MlObjective::Gauss, MlObjective::Mixed]
}

fn default_alpha() -> f64 {
    0.1
}

fn default_grid_points() -> usize {
    100
}

impl DivergenceConfig {
    pub fn new(
        n_qb: usize,
        setup: SetupKind,
        total_shots: u64,
        inits: usize,
        master_seed: u64,
    ) -> Self {
        Self {
            n_qb,
            setup,
            total_shots,
            inits,
            master_seed,
            objectives: default_divergence_objectives(),
            alpha: default_alpha(),
            grid_points: default_grid_points(),
            ml_max_iters: default_ml_max_iters(),
            mixed_gauss_iters: default_mixed_gauss_iters(),
            reg_count: default_reg_count(),
        }
    }

    fn build_setup(&self) -> Result<MeasurementSetup> {
        match self.setup {
            SetupKind::Small => MeasurementSetup::small(self.n_qb),
            SetupKind::Tall => MeasurementSetup::tall(self.n_qb),
            SetupKind::Custom => Err(Error::InvalidConfig(
                "divergence experiments need a small or tall setup".into(),
            )),
        }
    }

    fn minimize_options(&self, objective: MlObjective) -> MinimizeOptions {
        let mut opts = MinimizeOptions::new(objective);
        opts.max_iters = self.ml_max_iters;
        opts.mixed_gauss_iters = self.mixed_gauss_iters;
        opts.reg_count = self.reg_count;
        opts
    }
}

/// Per-objective outcome of the divergence experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DivergenceCurve {
    pub objective: MlObjective,
    /// Initialization errors μᵢ, linear on [0, √2].
    pub mu_inits: Vec<f64>,
    /// −1: converged to the reference minimum, +1: to a different one.
    pub b: Vec<i8>,
    pub grid: Vec<f64>,
    pub delta: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DivergenceResult {
    pub curves: Vec<DivergenceCurve>,
}

impl DivergenceResult {
    pub fn curve(&self, objective: MlObjective) -> Option<&DivergenceCurve> {
        self.curves.iter().find(|c| c.objective == objective)
    }
}

/// For each trial i: draw a state and shots, run every objective once
/// from an error-free start (the reference) and once from a start at
/// error μᵢ; the pair counts as converged together when the two optima
/// match to within 1% of the reference's distance to the truth.
pub fn run_divergence(cfg: &DivergenceConfig) -> Result<DivergenceResult> {
    let setup = cfg.build_setup()?;
    if cfg.inits < 2 {
        return Err(Error::InvalidConfig(
            "need at least two initializations".into(),
        ));
    }
    if cfg.total_shots < setup.n_types() as u64 {
        return Err(Error::InvalidConfig("shot budget too small".into()));
    }
    let a = stacked_matrix(&setup);

    struct TrialOutcome {
        mu_init: f64,
        b: Vec<i8>, // one per objective
    }

    let outcomes: Result<Vec<TrialOutcome>> = (0..cfg.inits)
        .into_par_iter()
        .map(|i| {
            let trial_seed = derive_seed(cfg.master_seed, i as u64);
            let truth = random_state(cfg.n_qb, &mut purpose_rng(trial_seed, Purpose::StateGen));
            let rec = simulate_shots(
                &setup,
                &truth,
                cfg.total_shots,
                &mut purpose_rng(trial_seed, Purpose::Shots),
            )?;
            let data = CountData::from_record(&rec);
            let mu_init = MU_MAX * i as f64 / (cfg.inits - 1) as f64;
            let perturbed = state_at_error(
                &truth,
                mu_init,
                &mut purpose_rng(trial_seed, Purpose::Init),
            )?;
            let mut b = Vec::with_capacity(cfg.objectives.len());
            for &objective in &cfg.objectives {
                let opts = cfg.minimize_options(objective);
                let reference = minimize(&truth, &data, &a, &opts)?;
                let from_perturbed = minimize(&perturbed, &data, &a, &opts)?;
                let truth_error = error_mu(&reference.v_hat, &truth)?.mu;
                let same = same_minimum(&from_perturbed.v_hat, &reference.v_hat, truth_error)?;
                b.push(if same { -1 } else { 1 });
            }
            Ok(TrialOutcome { mu_init, b })
        })
        .collect();
    let outcomes = outcomes?;

    let mu_inits: Vec<f64> = outcomes.iter().map(|o| o.mu_init).collect();
    let grid: Vec<f64> = (0..cfg.grid_points)
        .map(|k| MU_MAX * k as f64 / (cfg.grid_points - 1).max(1) as f64)
        .collect();

    let curves = cfg
        .objectives
        .iter()
        .enumerate()
        .map(|(j, &objective)| {
            let b: Vec<i8> = outcomes.iter().map(|o| o.b[j]).collect();
            let delta = divergence_rate(&grid, &mu_inits, &b, cfg.alpha)?;
            Ok(DivergenceCurve {
                objective,
                mu_inits: mu_inits.clone(),
                b,
                grid: grid.clone(),
                delta,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DivergenceResult { curves })
}
