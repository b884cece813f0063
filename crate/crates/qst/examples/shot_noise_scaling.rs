//! Shot-noise scaling: the refined error falls like 1/√N with the total
//! measurement budget.
//!
//! Run: `cargo run --release --example shot_noise_scaling`

use qst::experiments::{run_trials, ExperimentConfig};
use qst::measurements::SetupKind;

fn main() {
    let budgets = [5_000u64, 20_000, 80_000, 320_000];
    println!("{:>9} {:>12} {:>18}", "shots", "median mu", "mu * sqrt(shots)");
    for &shots in &budgets {
        let cfg = ExperimentConfig::new(4, SetupKind::Tall, shots, 40, 777);
        let result = run_trials(&cfg).expect("valid config");
        let median = result.median_mu("mixed-estimate").unwrap();
        println!(
            "{:>9} {:>12.5} {:>18.3}",
            shots,
            median,
            median * (shots as f64).sqrt()
        );
    }
    println!("\nthe rightmost column staying flat is the 1/sqrt(N) law:");
    println!("100x more shots buy a 10x smaller error.");
}
