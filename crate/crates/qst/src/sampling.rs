//! Shot-noise simulation: multinomial outcome counts per measurement
//! type and the sample probabilities they induce.

use ndarray::Array1;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::measurements::{probabilities, MeasurementSetup};
use crate::states::StateVector;

/// Outcome counts from repeating every measurement type `shots_per_type`
/// times. Counts in each type sum to `shots_per_type` exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct ShotRecord {
    setup: MeasurementSetup,
    shots_per_type: u64,
    counts: Vec<Vec<u64>>,
}

impl ShotRecord {
    /// Rebuilds a record from raw parts (used by the file reader).
    pub fn from_parts(
        setup: MeasurementSetup,
        shots_per_type: u64,
        counts: Vec<Vec<u64>>,
    ) -> Result<Self> {
        if counts.len() != setup.n_types() {
            return Err(Error::DimensionMismatch {
                expected: setup.n_types(),
                actual: counts.len(),
            });
        }
        for block in &counts {
            if block.len() != setup.dim() {
                return Err(Error::DimensionMismatch {
                    expected: setup.dim(),
                    actual: block.len(),
                });
            }
            let total: u64 = block.iter().sum();
            if total != shots_per_type {
                return Err(Error::InvalidArgument(format!(
                    "counts sum to {total}, expected {shots_per_type} per type"
                )));
            }
        }
        Ok(Self {
            setup,
            shots_per_type,
            counts,
        })
    }

    pub fn setup(&self) -> &MeasurementSetup {
        &self.setup
    }

    pub fn shots_per_type(&self) -> u64 {
        self.shots_per_type
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }
}

/// Draws one multinomial sample by sequential conditional binomials.
/// Exact, O(d), and deterministic given the RNG stream.
pub fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let d = probs.len();
    let mut counts = vec![0u64; d];
    let mut remaining = n;
    let mut mass_left = 1.0f64;
    for k in 0..d {
        if remaining == 0 {
            break;
        }
        if k == d - 1 {
            counts[k] = remaining;
            break;
        }
        let p = if mass_left > 0.0 {
            (probs[k].max(0.0) / mass_left).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let draw = if p >= 1.0 {
            remaining
        } else if p <= 0.0 {
            0
        } else {
            Binomial::new(remaining, p).expect("valid binomial").sample(rng)
        };
        counts[k] = draw;
        remaining -= draw;
        mass_left -= probs[k].max(0.0);
    }
    counts
}

/// Simulates `total_shots` measurements split evenly over the types of a
/// setup (floor division; leftover shots are discarded). Each type draws
/// its counts from a multinomial over its probability block.
pub fn simulate_shots<R: Rng + ?Sized>(
    setup: &MeasurementSetup,
    v: &StateVector,
    total_shots: u64,
    rng: &mut R,
) -> Result<ShotRecord> {
    let n_types = setup.n_types() as u64;
    let shots_per_type = total_shots / n_types;
    if shots_per_type == 0 {
        return Err(Error::TooFewShots {
            total: total_shots,
            types: setup.n_types(),
        });
    }
    let p = probabilities(setup, v)?;
    let d = setup.dim();
    let counts = (0..setup.n_types())
        .map(|k| {
            let block = &p.as_slice().expect("contiguous")[k * d..(k + 1) * d];
            multinomial(shots_per_type, block, rng)
        })
        .collect();
    Ok(ShotRecord {
        setup: setup.clone(),
        shots_per_type,
        counts,
    })
}

/// Concatenated `counts / N` blocks in setup order; each block sums to
/// exactly 1 in rational arithmetic.
pub fn sample_probabilities(rec: &ShotRecord) -> Array1<f64> {
    let n = rec.shots_per_type as f64;
    let mut out = Array1::zeros(rec.setup.n_prob());
    for (k, block) in rec.counts.iter().enumerate() {
        for (j, &c) in block.iter().enumerate() {
            out[k * rec.setup.dim() + j] = c as f64 / n;
        }
    }
    out
}
