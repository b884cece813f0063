//! File formats: JSON for single objects (states, setups, shot records,
//! aggregates, diagnostics), CSV for bulk trial rows, and an optional
//! Python plot script for the experiment outputs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array1;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{DivergenceResult, ExperimentResult, TrialRow};
use crate::linalg::CVector;
use crate::measurements::{MeasurementSetup, MeasurementType, SetupKind};
use crate::sampling::ShotRecord;
use crate::states::StateVector;

/// State file: `{ "n_qb": int, "amplitudes": [[re, im], ...] }`.
#[derive(Serialize, Deserialize)]
struct StateFile {
    n_qb: usize,
    amplitudes: Vec<(f64, f64)>,
}

pub fn write_state(path: &Path, v: &StateVector) -> Result<()> {
    let file = StateFile {
        n_qb: v.n_qb(),
        amplitudes: v.amplitudes().iter().map(|z| (z.re, z.im)).collect(),
    };
    write_json(path, &file)
}

/// Reads a state file, validating the norm within 1e−9 before
/// renormalizing exactly.
pub fn read_state(path: &Path) -> Result<StateVector> {
    let file: StateFile = read_json(path)?;
    let d = 1usize << file.n_qb;
    if file.amplitudes.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: file.amplitudes.len(),
        });
    }
    let amplitudes: CVector = file
        .amplitudes
        .iter()
        .map(|&(re, im)| Complex64::new(re, im))
        .collect();
    StateVector::new(amplitudes, 1e-9)
}

/// Setup file: `{ "kind": "small"|"tall"|"custom", "n_qb": int,
/// "types": ["ZX...", ...] }`, types only for custom setups.
#[derive(Serialize, Deserialize)]
struct SetupFile {
    kind: SetupKind,
    n_qb: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    types: Option<Vec<String>>,
}

pub fn write_setup(path: &Path, setup: &MeasurementSetup) -> Result<()> {
    write_json(path, &setup_to_file(setup))
}

fn setup_to_file(setup: &MeasurementSetup) -> SetupFile {
    SetupFile {
        kind: setup.kind(),
        n_qb: setup.n_qb(),
        types: match setup.kind() {
            SetupKind::Custom => Some(setup.types().iter().map(|t| t.to_string()).collect()),
            _ => None,
        },
    }
}

fn setup_from_file(file: &SetupFile) -> Result<MeasurementSetup> {
    let setup = match file.kind {
        SetupKind::Small => MeasurementSetup::small(file.n_qb)?,
        SetupKind::Tall => MeasurementSetup::tall(file.n_qb)?,
        SetupKind::Custom => {
            let names = file.types.as_ref().ok_or_else(|| {
                Error::InvalidSetup("custom setup file needs a types list".into())
            })?;
            let types: Result<Vec<MeasurementType>> =
                names.iter().map(|s| s.parse()).collect();
            let setup = MeasurementSetup::custom(types?)?;
            if setup.n_qb() != file.n_qb {
                return Err(Error::InvalidSetup(format!(
                    "axis strings have {} qubits but the file says {}",
                    setup.n_qb(),
                    file.n_qb
                )));
            }
            setup
        }
    };
    if let (Some(names), SetupKind::Small | SetupKind::Tall) = (&file.types, file.kind) {
        let expected: Vec<String> = setup.types().iter().map(|t| t.to_string()).collect();
        if *names != expected {
            return Err(Error::InvalidSetup(
                "types list disagrees with the named setup family".into(),
            ));
        }
    }
    Ok(setup)
}

pub fn read_setup(path: &Path) -> Result<MeasurementSetup> {
    setup_from_file(&read_json(path)?)
}

/// Shots file: `{ "setup": {...}, "shots_per_type": int, "counts": [[...]] }`.
#[derive(Serialize, Deserialize)]
struct ShotsFile {
    setup: SetupFile,
    shots_per_type: u64,
    counts: Vec<Vec<u64>>,
}

pub fn write_shots(path: &Path, rec: &ShotRecord) -> Result<()> {
    let file = ShotsFile {
        setup: setup_to_file(rec.setup()),
        shots_per_type: rec.shots_per_type(),
        counts: rec.counts().to_vec(),
    };
    write_json(path, &file)
}

pub fn read_shots(path: &Path) -> Result<ShotRecord> {
    let file: ShotsFile = read_json(path)?;
    let setup = setup_from_file(&file.setup)?;
    ShotRecord::from_parts(setup, file.shots_per_type, file.counts)
}

/// Reconstruction diagnostics written next to an estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructDiagnostics {
    pub method: String,
    pub ml: Option<String>,
    pub seed: u64,
    /// PhaseCut: full sweeps and coordinate updates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phasecut_sweeps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phasecut_updates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_trace: Option<Vec<f64>>,
    /// Likelihood refinement iterations, when a refinement ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ml_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ml_converged: Option<bool>,
    pub failure_flag: bool,
    pub seconds: f64,
}

pub fn write_diagnostics(path: &Path, diag: &ReconstructDiagnostics) -> Result<()> {
    write_json(path, diag)
}

/// Writes trial rows as CSV. The resolved configuration is recorded in
/// `#`-prefixed comment lines above the header so a result file is
/// self-describing.
pub fn write_trial_csv(path: &Path, result: &ExperimentResult, header: &str) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    for line in header.lines() {
        writeln!(file, "# {line}")?;
    }
    let mut writer = csv::Writer::from_writer(file);
    for row in &result.rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads trial rows back (comment lines are skipped).
pub fn read_trial_csv(path: &Path) -> Result<Vec<TrialRow>> {
    let reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(BufReader::new(File::open(path)?));
    let mut rows = Vec::new();
    for record in reader.into_deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

/// Per-stage aggregates plus the resolved config, as one JSON document.
pub fn aggregates_json(
    config: &serde_json::Value,
    master_seed: u64,
    result: &ExperimentResult,
) -> serde_json::Value {
    let mut stages = serde_json::Map::new();
    for stage in &result.stages {
        let mus = result.mus_for_stage(stage);
        if mus.is_empty() {
            continue;
        }
        let cdf = crate::experiments::empirical_cdf(&mus);
        let seconds = result.seconds_for_stage(stage);
        let max_mu = mus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        stages.insert(
            stage.clone(),
            serde_json::json!({
                "count": mus.len(),
                "median_mu": crate::experiments::median(&mus),
                "max_mu": max_mu,
                "median_seconds": crate::experiments::median(&seconds),
                "cdf_mu": cdf.iter().map(|p| p.0).collect::<Vec<_>>(),
                "cdf_f": cdf.iter().map(|p| p.1).collect::<Vec<_>>(),
            }),
        );
    }
    serde_json::json!({
        "master_seed": master_seed,
        "config": config,
        "trials": result.rows.iter().map(|r| r.trial).max().map_or(0, |t| t + 1),
        "stages": stages,
    })
}

pub fn write_aggregates(path: &Path, value: &serde_json::Value) -> Result<()> {
    write_json(path, value)
}

/// Divergence curves as JSON (per-objective b samples and δ grids).
pub fn divergence_json(
    config: &serde_json::Value,
    master_seed: u64,
    result: &DivergenceResult,
) -> serde_json::Value {
    serde_json::json!({
        "master_seed": master_seed,
        "config": config,
        "curves": result.curves,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Probability vector of a shots file, convenience for scripting.
pub fn shots_to_probabilities(rec: &ShotRecord) -> Array1<f64> {
    crate::sampling::sample_probabilities(rec)
}

/// Emits a small matplotlib script that renders the error CDFs from the
/// trial CSV and, when present, the divergence curves.
pub fn write_plot_script(path: &Path) -> Result<()> {
    let script = r##"#!/usr/bin/env python3
"""Render error CDFs (results.csv) and divergence curves
(divergence.csv, alpha = 0.1) produced by `qst experiment`."""
import csv
import math
import pathlib
import sys
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

out_dir = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else pathlib.Path(".")

def read_csv(path):
    with open(path) as fh:
        rows = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(rows))

results = out_dir / "results.csv"
if results.exists():
    by_stage = defaultdict(list)
    for row in read_csv(results):
        by_stage[row["stage"]].append(float(row["mu"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for stage, mus in sorted(by_stage.items()):
        mus.sort()
        cdf = [(i + 1) / len(mus) for i in range(len(mus))]
        ax.step(mus, cdf, where="post", label=stage)
    ax.set_xlabel("error mu")
    ax.set_ylabel("empirical CDF")
    ax.set_xscale("log")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_dir / "cdf.png", dpi=150)
    print(f"wrote {out_dir / 'cdf.png'}")

divergence = out_dir / "divergence.csv"
if divergence.exists():
    samples = defaultdict(list)
    for row in read_csv(divergence):
        samples[row["objective"]].append((float(row["mu_init"]), int(row["b"])))
    alpha = 0.1
    grid = [math.sqrt(2.0) * k / 99 for k in range(100)]
    fig, ax = plt.subplots(figsize=(6, 4))
    for objective, pts in sorted(samples.items()):
        delta = []
        for mu in grid:
            weights = [math.exp(-(((mu - mi) / alpha) ** 2)) for mi, _ in pts]
            num = sum(w * b for w, (_, b) in zip(weights, pts))
            den = sum(weights)
            delta.append(0.5 * (1.0 + num / den) if den > 0 else 0.5)
        ax.plot(grid, delta, label=objective)
    ax.set_xlabel("initialization error mu")
    ax.set_ylabel("divergence rate delta")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_dir / "divergence.png", dpi=150)
    print(f"wrote {out_dir / 'divergence.png'}")
"##;
    let mut file = BufWriter::new(File::create(path)?);
    file.write_all(script.as_bytes())?;
    Ok(())
}
