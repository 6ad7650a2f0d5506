//! Force estimation and contact-state detection for soft pneumatic fingers
//! with a strain sensor and a 12-taxel pressure array.
//!
//! The pipeline: [`sim`] generates labelled grasp-and-drag episodes,
//! [`dataset`] stores them, [`preprocess`] scales and windows the sensor
//! channels, [`neural`] trains MLP/RNN/LSTM/GRU regressors, [`experiment`]
//! runs grids and ablations, and [`contact`] turns force estimates into
//! stick/slip states and plug-insertion verdicts.

pub mod cli;
pub mod contact;
pub mod dataset;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod neural;
pub mod preprocess;
pub mod sim;
pub mod types;

pub use error::{Error, Result};
