//! Training-data reduction for symbolic regression.
//!
//! The crate reduces a regression training set with one of three aggregation
//! methods ([`reduction`]), trains offspring-selection genetic programming
//! ([`gp`]) and two baselines ([`baselines`]) on the result, and sweeps the
//! whole pipeline over reduction rates ([`harness`]).
//!
//! Data-parallel inner loops (batch evaluation, k-means assignment, forest
//! trees, sweep cells) go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and plain iterators otherwise.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod exprtree;
pub mod gp;
pub mod harness;
pub mod metrics;
pub mod par;
pub mod reduction;
pub mod seed;

pub use dataset::{Dataset, Normalizer};
pub use error::{Error, Result};
pub use exprtree::{ExpressionTree, ScaledModel, Symbol};
pub use gp::{GpConfig, GpRunStats};
