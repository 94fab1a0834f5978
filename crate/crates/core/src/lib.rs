//! Stochastic proximal distance algorithm for constrained estimation.
//!
//! The crate minimizes `F(theta) = (1/n) sum_i f(theta; z_i)` over a
//! constraint set `C` by iterating
//!
//! ```text
//! theta_k = prox_{rho_k^{-1} g_k}[P_C(theta_{k-1})],   rho_k = rho_1 k^gamma,
//! ```
//!
//! where `g_k` is the mean loss over a minibatch drawn without replacement.
//! A full-batch variant and a projected SGD baseline share the same driver,
//! trace format and stopping rule.
//!
//! Modules, bottom-up:
//!
//! * [`constraints`]: projections onto the unit ball, sparsity and rank sets;
//! * [`models`]: datasets, minibatches and the four loss families;
//! * [`prox`]: proximal maps of minibatch losses;
//! * [`solver`]: the outer iteration drivers and their traces;
//! * [`datagen`]: synthetic data generators;
//! * [`experiments`]: sweeps, rate fits and method comparisons;
//! * [`cli`]: the command-line front end behind the `proxdist` binary.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cli;
pub mod constraints;
pub mod datagen;
pub mod error;
pub mod experiments;
pub mod models;
pub mod prox;
pub mod rng;
pub mod solver;

pub use constraints::{ConstraintKind, ConstraintSet, Shape};
pub use error::{Error, Result};
pub use models::{Batch, Dataset, Family, Model};
pub use prox::{InnerControls, ProxOutcome, ProxProblem};
pub use solver::{
    run_batch_pd, run_psgd, run_spd, true_discovery_rate, IterateTrace, PenaltySchedule, Reference,
    ReferenceSource, Schedule, SolverConfig, StepSchedule, TraceCadence,
};
