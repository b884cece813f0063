//! Batch error statistics: repeated trials on both measurement setups,
//! with the empirical CDF of the refined error printed as quantiles.
//!
//! Run: `cargo run --release --example error_cdf`

use qst::experiments::{empirical_cdf, run_trials, ExperimentConfig, InitMode};
use qst::likelihood::MlObjective;
use qst::measurements::SetupKind;

fn main() {
    let trials = 60;
    for setup in [SetupKind::Small, SetupKind::Tall] {
        let mut cfg = ExperimentConfig::new(5, setup, 5000, trials, 2024);
        cfg.ml_objectives = vec![MlObjective::Mixed];
        cfg.init_modes = vec![InitMode::Estimate, InitMode::Truth];
        let result = run_trials(&cfg).expect("valid config");

        println!(
            "setup {setup:?}: {} trials, init = {}",
            trials,
            cfg.resolved_init_method()
        );
        for stage in &result.stages {
            let mus = result.mus_for_stage(stage);
            if mus.is_empty() {
                continue;
            }
            let cdf = empirical_cdf(&mus);
            let q = |f: f64| {
                cdf.iter()
                    .find(|&&(_, cf)| cf >= f)
                    .map(|&(x, _)| x)
                    .unwrap_or(f64::NAN)
            };
            println!(
                "  {:<16} q25 {:.4}  median {:.4}  q75 {:.4}  max {:.4}",
                stage,
                q(0.25),
                q(0.5),
                q(0.75),
                cdf.last().unwrap().0
            );
        }
        println!();
    }
    println!("\"mixed-truth\" starts the optimizer at the true state: the");
    println!("reference optimum an experimenter cannot actually compute.");
}
