//! Semisupervised performance evaluation of binary classifiers.
//!
//! Given every score a classifier produced on a dataset and ground-truth
//! labels for only a handful of items, model the scores as a two-component
//! mixture, sample its posterior by importance sampling, complete the
//! missing labels per posterior sample, and read off precision-recall curves
//! with confidence bands. The same posterior ensemble drives threshold
//! recalibration against precision/recall requirements.

pub mod config;
pub mod data;
pub mod distributions;
pub mod error;
pub mod experiment;
pub mod inference;
pub mod mixture;
pub mod optimize;
pub mod performance;
pub mod report;
pub mod rng;

pub use distributions::{DistParams, FamilyTag, ScoreDistribution};
pub use error::{Result, SpeError};
pub use inference::{run_spe, PosteriorEnsemble, SpeOptions};
pub use mixture::{MixtureParams, PriorSpec, ScoreDataset};
pub use performance::{CurveBand, PerformanceCurve};
