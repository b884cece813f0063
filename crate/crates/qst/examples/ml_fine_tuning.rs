//! Likelihood refinement of a recursive estimate: the exact multinomial
//! objective, its Gaussian approximation, and the mixed schedule, side
//! by side.
//!
//! Run: `cargo run --release --example ml_fine_tuning`

use qst::likelihood::{minimize, CountData, MinimizeOptions, MlObjective};
use qst::measurements::{stacked_matrix, MeasurementSetup};
use qst::recursive::reconstruct_recursive;
use qst::rng::seeded;
use qst::sampling::{sample_probabilities, simulate_shots};
use qst::states::{error_mu, random_state};

fn main() {
    let n_qb = 5;
    let total_shots = 5000;
    let mut rng = seeded(11);

    let setup = MeasurementSetup::tall(n_qb).unwrap();
    let a = stacked_matrix(&setup);
    let v = random_state(n_qb, &mut rng);
    let rec = simulate_shots(&setup, &v, total_shots, &mut rng).unwrap();
    let p_hat = sample_probabilities(&rec);
    let data = CountData::from_record(&rec);

    let (init, _) = reconstruct_recursive(&p_hat, n_qb).unwrap();
    let mu_init = error_mu(&v, &init).unwrap().mu;
    println!(
        "{n_qb} qubits, {} shots per type; recursive initialization mu = {mu_init:.4}\n",
        rec.shots_per_type()
    );

    println!("{:<8} {:>9} {:>12} {:>10}", "objective", "mu", "iterations", "converged");
    for objective in [MlObjective::Exact, MlObjective::Gauss, MlObjective::Mixed] {
        let est = minimize(&init, &data, &a, &MinimizeOptions::new(objective)).unwrap();
        let mu = error_mu(&v, &est.v_hat).unwrap().mu;
        println!(
            "{:<8} {:>9.4} {:>12} {:>10}",
            objective.to_string(),
            mu,
            est.iterations,
            est.converged
        );
    }
    println!("\nthe mixed schedule runs 100 iterations on the smooth Gaussian");
    println!("objective before switching to the exact multinomial one.");
}
