//! The file-based workflow driven through the library API: write a
//! state, measure it into a shots file, read it back and reconstruct.
//! The `qst` binary wraps exactly these calls.
//!
//! Run: `cargo run --release --example file_pipeline`

use qst::io;
use qst::likelihood::{minimize, CountData, MinimizeOptions, MlObjective};
use qst::measurements::{stacked_matrix, MeasurementSetup};
use qst::recursive::reconstruct_recursive;
use qst::rng::seeded;
use qst::sampling::{sample_probabilities, simulate_shots};
use qst::states::{error_mu, random_state};

fn main() -> qst::Result<()> {
    let dir = std::env::temp_dir().join("qst_file_pipeline");
    std::fs::create_dir_all(&dir)?;
    let state_path = dir.join("state.json");
    let shots_path = dir.join("shots.json");
    let estimate_path = dir.join("estimate.json");

    let mut rng = seeded(3);
    let v = random_state(3, &mut rng);
    io::write_state(&state_path, &v)?;

    let setup = MeasurementSetup::tall(3)?;
    let rec = simulate_shots(&setup, &io::read_state(&state_path)?, 100_000, &mut rng)?;
    io::write_shots(&shots_path, &rec)?;

    let rec = io::read_shots(&shots_path)?;
    let p_hat = sample_probabilities(&rec);
    let (init, diag) = reconstruct_recursive(&p_hat, rec.setup().n_qb())?;
    let a = stacked_matrix(rec.setup());
    let data = CountData::from_record(&rec);
    let est = minimize(&init, &data, &a, &MinimizeOptions::new(MlObjective::Mixed))?;
    io::write_state(&estimate_path, &est.v_hat)?;

    let mu = error_mu(&v, &io::read_state(&estimate_path)?)?.mu;
    println!("wrote {}", dir.display());
    println!(
        "recursive init in failure set: {}, refined error mu = {mu:.5}",
        diag.in_failure_set()
    );
    Ok(())
}
