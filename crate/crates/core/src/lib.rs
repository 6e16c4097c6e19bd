//! Manpower scheduling toolkit.
//!
//! The crate is organised as a pipeline:
//!
//! - [`model`]: employees, positions, shifts, the eleven constraint atoms and
//!   their boolean combination.
//! - [`solver`]: staffing-vector optimisation under a constraint expression
//!   (genetic algorithm, simulated annealing).
//! - [`roster`]: day-by-day roster generation from a solved staffing vector.
//! - [`dataset`]: supervised datasets built from rosters (binary day encoding,
//!   min-max normalised sliding windows).
//! - [`neural`]: dense, RBF and recurrent networks with hand-derived
//!   gradients and Adam-family / RMSprop optimizers.
//! - [`forecast`]: roster forecasting, the day-match accuracy metric and the
//!   comparison studies.
//! - [`harness`]: built-in scenarios and the end-to-end pipeline used by the
//!   command-line tool.
//!
//! The numeric modules are generic over [`Scalar`] (`f32`/`f64`); the aliases
//! below pin the `f64` instantiation used by the pipeline.

pub mod dataset;
pub mod forecast;
pub mod harness;
pub mod model;
pub mod neural;
pub mod roster;
pub mod scalar;
pub mod solver;

pub use scalar::Scalar;

pub type Dataset = dataset::Dataset<f64>;
pub type Dataset32 = dataset::Dataset<f32>;
pub type Sample = dataset::Sample<f64>;
pub type TrainState = neural::TrainState<f64>;
pub type TrainState32 = neural::TrainState<f32>;
pub type Optimizer = neural::Optimizer<f64>;
pub type LossKind = neural::LossKind<f64>;
pub type TrainedModel = forecast::TrainedModel<f64>;
