//! File-based command-line pipeline: generate states, simulate shots,
//! reconstruct, and run batch experiments.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 degraded result (the
//! reconstruction hit the phase-link failure set; the estimate is still
//! written).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use qst::experiments::{
    run_divergence, run_trials, DivergenceConfig, ExperimentConfig, InitMode,
};
use qst::io;
use qst::likelihood::{minimize, CountData, MinimizeOptions, MlObjective};
use qst::measurements::{stacked_matrix, MeasurementSetup, SetupKind};
use qst::phasecut::{build_problem, solve, PhaseCutOptions};
use qst::recursive::reconstruct_recursive;
use qst::rng::seeded;
use qst::sampling::{sample_probabilities, simulate_shots};
use qst::states::random_state;

#[derive(Parser)]
#[command(name = "qst", version, about = "Pure-state tomography from parallel per-qubit measurements")]
struct Cli {
    /// Worker threads for experiment fan-out (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Phasecut,
    Recursive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MlArg {
    Exact,
    Gauss,
    Mixed,
    None,
}

impl MlArg {
    fn objective(self) -> Option<MlObjective> {
        match self {
            MlArg::Exact => Some(MlObjective::Exact),
            MlArg::Gauss => Some(MlObjective::Gauss),
            MlArg::Mixed => Some(MlObjective::Mixed),
            MlArg::None => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SetupArg {
    Small,
    Tall,
}

impl SetupArg {
    fn kind(self) -> SetupKind {
        match self {
            SetupArg::Small => SetupKind::Small,
            SetupArg::Tall => SetupKind::Tall,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum InitModeArg {
    Estimate,
    Truth,
    Random,
}

impl InitModeArg {
    fn mode(self) -> InitMode {
        match self {
            InitModeArg::Estimate => InitMode::Estimate,
            InitModeArg::Truth => InitMode::Truth,
            InitModeArg::Random => InitMode::Random,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random pure state and write it as JSON.
    GenState {
        #[arg(long)]
        qubits: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate repeated measurements of a state.
    Measure {
        #[arg(long)]
        state: PathBuf,
        /// "small", "tall", or the path of a setup JSON file.
        #[arg(long)]
        setup: String,
        /// Total shot budget, split evenly over the measurement types.
        #[arg(long)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a state estimate from a shots file.
    Reconstruct {
        #[arg(long)]
        shots: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long, value_enum, default_value_t = MlArg::Mixed)]
        ml: MlArg,
        /// Full BCD sweeps; defaults to the sweep count covering the
        /// coordinate-update budget below.
        #[arg(long)]
        phasecut_sweeps: Option<usize>,
        /// PhaseCut coordinate-update budget.
        #[arg(long, default_value_t = 5000)]
        phasecut_updates: usize,
        #[arg(long, default_value_t = 0.01)]
        phasecut_nu: f64,
        #[arg(long, default_value_t = 10_000)]
        ml_max_iters: usize,
        /// Gaussian-stage iterations of the mixed schedule.
        #[arg(long, default_value_t = 100)]
        ml_mixed_gauss_iters: usize,
        /// Covariance regularization pseudo-count.
        #[arg(long, default_value_t = 5.0)]
        reg_count: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Diagnostics JSON path (default: <out> with a .diag.json suffix).
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Run a batch experiment; writes results.csv and aggregates.json
    /// (divergence mode: divergence.json and divergence.csv).
    Experiment {
        /// JSON config file; inline flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        qubits: Option<usize>,
        #[arg(long, value_enum)]
        setup: Option<SetupArg>,
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_enum, value_delimiter = ',')]
        ml: Option<Vec<MlArg>>,
        #[arg(long, value_enum, value_delimiter = ',')]
        init_modes: Option<Vec<InitModeArg>>,
        #[arg(long)]
        seed: Option<u64>,
        /// Divergence-rate mode (robustness to initialization error).
        #[arg(long)]
        divergence: bool,
        /// Kernel width for the divergence rate.
        #[arg(long)]
        alpha: Option<f64>,
        /// Initialization count for divergence mode.
        #[arg(long)]
        inits: Option<usize>,
        #[arg(long, default_value_t = 5000)]
        phasecut_updates: usize,
        #[arg(long, default_value_t = 0.01)]
        phasecut_nu: f64,
        #[arg(long, default_value_t = 10_000)]
        ml_max_iters: usize,
        #[arg(long, default_value_t = 100)]
        ml_mixed_gauss_iters: usize,
        #[arg(long, default_value_t = 5.0)]
        reg_count: f64,
        #[arg(long)]
        out_dir: PathBuf,
        /// Also write a matplotlib script rendering the outputs.
        #[arg(long)]
        emit_plot_script: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> qst::Result<ExitCode> {
    match command {
        Command::GenState { qubits, seed, out } => {
            if qubits == 0 {
                return Err(qst::Error::InvalidArgument(
                    "need at least one qubit".into(),
                ));
            }
            log_config("gen-state", &json!({"qubits": qubits, "seed": seed}));
            let v = random_state(qubits, &mut seeded(seed));
            io::write_state(&out, &v)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Measure {
            state,
            setup,
            shots,
            seed,
            out,
        } => {
            let v = io::read_state(&state)?;
            let setup = resolve_setup(&setup, v.n_qb())?;
            log_config(
                "measure",
                &json!({
                    "setup": setup.kind().to_string(),
                    "n_qb": v.n_qb(),
                    "shots": shots,
                    "seed": seed,
                }),
            );
            let rec = simulate_shots(&setup, &v, shots, &mut seeded(seed))?;
            io::write_shots(&out, &rec)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Reconstruct {
            shots,
            method,
            ml,
            phasecut_sweeps,
            phasecut_updates,
            phasecut_nu,
            ml_max_iters,
            ml_mixed_gauss_iters,
            reg_count,
            seed,
            out,
            diagnostics,
        } => {
            let rec = io::read_shots(&shots)?;
            let setup = rec.setup().clone();
            if method == MethodArg::Recursive && setup.kind() != SetupKind::Tall {
                return Err(qst::Error::InvalidArgument(
                    "the recursive method needs a tall-setup shots file".into(),
                ));
            }
            let start = Instant::now();
            let a = stacked_matrix(&setup);
            let p_hat = sample_probabilities(&rec);
            let data = CountData::from_record(&rec);

            let mut diag = io::ReconstructDiagnostics {
                method: match method {
                    MethodArg::Phasecut => "phasecut".into(),
                    MethodArg::Recursive => "recursive".into(),
                },
                ml: ml.objective().map(|o| o.to_string()),
                seed,
                phasecut_sweeps: None,
                phasecut_updates: None,
                objective_trace: None,
                ml_iterations: None,
                ml_converged: None,
                failure_flag: false,
                seconds: 0.0,
            };

            let initial = match method {
                MethodArg::Phasecut => {
                    let problem = build_problem(&a, &p_hat)?;
                    let opts = match phasecut_sweeps {
                        Some(sweeps) => PhaseCutOptions {
                            sweeps,
                            nu: phasecut_nu,
                        },
                        None => PhaseCutOptions {
                            nu: phasecut_nu,
                            ..PhaseCutOptions::from_update_budget(
                                phasecut_updates,
                                problem.n_prob(),
                            )
                        },
                    };
                    let r = solve(&problem, &opts, &mut seeded(seed));
                    diag.phasecut_sweeps = Some(r.sweeps);
                    diag.phasecut_updates = Some(r.coordinate_updates);
                    diag.objective_trace = Some(r.objective_trace);
                    r.v_hat
                }
                MethodArg::Recursive => {
                    let (v_hat, rdiag) = reconstruct_recursive(&p_hat, setup.n_qb())?;
                    diag.failure_flag = rdiag.in_failure_set();
                    v_hat
                }
            };

            let estimate = match ml.objective() {
                Some(objective) => {
                    let mut opts = MinimizeOptions::new(objective);
                    opts.max_iters = ml_max_iters;
                    opts.mixed_gauss_iters = ml_mixed_gauss_iters;
                    opts.reg_count = reg_count;
                    let est = minimize(&initial, &data, &a, &opts)?;
                    diag.ml_iterations = Some(est.iterations);
                    diag.ml_converged = Some(est.converged);
                    est.v_hat
                }
                None => initial,
            };
            diag.seconds = start.elapsed().as_secs_f64();

            log_config(
                "reconstruct",
                &json!({
                    "method": diag.method,
                    "ml": diag.ml,
                    "seed": seed,
                    "phasecut_updates": diag.phasecut_updates,
                    "failure_flag": diag.failure_flag,
                }),
            );
            io::write_state(&out, &estimate)?;
            let diag_path = diagnostics.unwrap_or_else(|| default_diag_path(&out));
            io::write_diagnostics(&diag_path, &diag)?;
            if diag.failure_flag {
                eprintln!("warning: phase-link failure set hit; estimate is degraded");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Experiment {
            config,
            qubits,
            setup,
            shots,
            trials,
            ml,
            init_modes,
            seed,
            divergence,
            alpha,
            inits,
            phasecut_updates,
            phasecut_nu,
            ml_max_iters,
            ml_mixed_gauss_iters,
            reg_count,
            out_dir,
            emit_plot_script,
        } => {
            let mut base = match &config {
                Some(path) => {
                    let text = std::fs::read_to_string(path)?;
                    serde_json::from_str::<serde_json::Value>(&text)?
                }
                None => json!({}),
            };
            let obj = base.as_object_mut().ok_or_else(|| {
                qst::Error::InvalidConfig("config file must hold a JSON object".into())
            })?;
            let divergence_mode =
                divergence || obj.get("mode").and_then(|m| m.as_str()) == Some("divergence");
            obj.remove("mode");

            // Flags override file fields.
            override_field(obj, "n_qb", qubits.map(|v| json!(v)));
            override_field(obj, "setup", setup.map(|s| json!(s.kind())));
            override_field(obj, "total_shots", shots.map(|v| json!(v)));
            override_field(obj, "trials", trials.map(|v| json!(v)));
            override_field(obj, "inits", inits.map(|v| json!(v)));
            override_field(obj, "master_seed", seed.map(|v| json!(v)));
            override_field(obj, "alpha", alpha.map(|v| json!(v)));
            override_field(
                obj,
                "ml_objectives",
                ml.as_ref().map(|list| {
                    json!(list
                        .iter()
                        .filter_map(|m| m.objective())
                        .collect::<Vec<_>>())
                }),
            );
            override_field(
                obj,
                "init_modes",
                init_modes
                    .as_ref()
                    .map(|list| json!(list.iter().map(|m| m.mode()).collect::<Vec<_>>())),
            );
            for (key, value) in [
                ("master_seed", json!(0)),
                ("trials", json!(200)),
                ("inits", json!(200)),
                ("total_shots", json!(5000)),
            ] {
                obj.entry(key).or_insert(value);
            }
            obj.entry("phasecut_updates")
                .or_insert(json!(phasecut_updates));
            obj.entry("phasecut_nu").or_insert(json!(phasecut_nu));
            obj.entry("ml_max_iters").or_insert(json!(ml_max_iters));
            obj.entry("mixed_gauss_iters")
                .or_insert(json!(ml_mixed_gauss_iters));
            obj.entry("reg_count").or_insert(json!(reg_count));

            std::fs::create_dir_all(&out_dir)?;
            if divergence_mode {
                let mut value = base.clone();
                for key in ["trials", "init_modes", "phasecut_updates", "phasecut_nu"] {
                    if let Some(o) = value.as_object_mut() {
                        o.remove(key);
                    }
                }
                rename_field(&mut value, "ml_objectives", "objectives");
                let cfg: DivergenceConfig = serde_json::from_value(value)?;
                log_config("experiment(divergence)", &base);
                let result = run_divergence(&cfg)?;
                let doc = io::divergence_json(&base, cfg.master_seed, &result);
                io::write_aggregates(&out_dir.join("divergence.json"), &doc)?;
                write_divergence_csv(&out_dir.join("divergence.csv"), &result, &base)?;
                if emit_plot_script {
                    io::write_plot_script(&out_dir.join("plot_results.py"))?;
                }
                Ok(ExitCode::SUCCESS)
            } else {
                let mut value = base.clone();
                for key in ["inits", "alpha", "grid_points"] {
                    if let Some(o) = value.as_object_mut() {
                        o.remove(key);
                    }
                }
                let cfg: ExperimentConfig = serde_json::from_value(value)?;
                log_config("experiment", &base);
                let result = run_trials(&cfg)?;
                let header = format!(
                    "config: {}\nmaster_seed: {}",
                    serde_json::to_string(&cfg)?,
                    cfg.master_seed
                );
                io::write_trial_csv(&out_dir.join("results.csv"), &result, &header)?;
                let agg = io::aggregates_json(&base, cfg.master_seed, &result);
                io::write_aggregates(&out_dir.join("aggregates.json"), &agg)?;
                if emit_plot_script {
                    io::write_plot_script(&out_dir.join("plot_results.py"))?;
                }
                Ok(ExitCode::SUCCESS)
            }
        }
    }
}

fn override_field(
    obj: &mut serde_json::Map<String, serde_json::Value>,
    key: &str,
    value: Option<serde_json::Value>,
) {
    if let Some(v) = value {
        obj.insert(key.to_string(), v);
    }
}

fn rename_field(value: &mut serde_json::Value, from: &str, to: &str) {
    if let Some(obj) = value.as_object_mut() {
        if let Some(v) = obj.remove(from) {
            obj.insert(to.to_string(), v);
        }
    }
}

fn resolve_setup(arg: &str, n_qb: usize) -> qst::Result<MeasurementSetup> {
    match arg {
        "small" => MeasurementSetup::small(n_qb),
        "tall" => MeasurementSetup::tall(n_qb),
        path => {
            let setup = io::read_setup(Path::new(path))?;
            if setup.n_qb() != n_qb {
                return Err(qst::Error::DimensionMismatch {
                    expected: n_qb,
                    actual: setup.n_qb(),
                });
            }
            Ok(setup)
        }
    }
}

fn default_diag_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_stem()
        .map_or_else(|| std::ffi::OsString::from("estimate"), |s| s.to_os_string());
    name.push(".diag.json");
    out.with_file_name(name)
}

fn write_divergence_csv(
    path: &Path,
    result: &qst::experiments::DivergenceResult,
    config: &serde_json::Value,
) -> qst::Result<()> {
    use std::io::Write;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "# config: {config}")?;
    writeln!(file, "objective,mu_init,b")?;
    for curve in &result.curves {
        for (mu, b) in curve.mu_inits.iter().zip(curve.b.iter()) {
            writeln!(file, "{},{},{}", curve.objective, mu, b)?;
        }
    }
    Ok(())
}

fn log_config(cmd: &str, config: &serde_json::Value) {
    eprintln!("qst {cmd} config: {config}");
}
