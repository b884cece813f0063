//! Pure-state tomography from parallel per-qubit measurements.
//!
//! An `n`-qubit pure state is a unit-norm complex vector with `d = 2^n`
//! entries. Measuring every qubit simultaneously along one of the axes
//! X, Y or Z realizes a `d`-outcome projective measurement whose outcome
//! probabilities are `|E* v|²`, with `E` a tensor product of the 2×2
//! single-qubit eigenvector matrices. This crate simulates repeated runs
//! of such measurements (multinomial shot noise) and reconstructs the
//! state from the observed frequencies with three estimators:
//!
//! - [`phasecut`]: semidefinite relaxation of the phase-retrieval problem
//!   solved by block-coordinate descent, for the 4-type "small" setup;
//! - [`recursive`]: closed-form recursive reconstruction for the
//!   `2n+1`-type "tall" setup;
//! - [`likelihood`]: maximum-likelihood refinement of either estimate
//!   (exact multinomial, Gaussian approximation, or a mixed schedule)
//!   driven by BFGS with analytic gradients.
//!
//! [`experiments`] batches trials into error statistics (empirical CDFs,
//! medians, divergence-rate curves) and the `qst` binary exposes the
//! pipeline as file-based subcommands. The `examples/` directory holds
//! one runnable example per capability.

pub mod bfgs;
pub mod error;
pub mod experiments;
pub mod io;
pub mod likelihood;
pub mod linalg;
pub mod measurements;
pub mod phasecut;
pub mod recursive;
pub mod rng;
pub mod sampling;
pub mod states;

pub use error::{Error, Result};
pub use measurements::{Axis, MeasurementSetup, MeasurementType, SetupKind, StackedMatrix};
pub use sampling::ShotRecord;
pub use states::{StateError, StateVector};
