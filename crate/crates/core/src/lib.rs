//! Smooth min-max (SMM) monotonic networks.
//!
//! This crate holds the pure numerical part of the project and builds without
//! `std` (it needs `alloc`). It contains:
//!
//! * [`numerics`]: stabilized scaled LogSumExp, sigmoid, truncated Gaussian
//!   sampling and the seeded [`RngStream`].
//! * [`model`]: the min-max (MM), smooth min-max (SMM) and partial-monotone
//!   SMM with auxiliary network (SMM64) architectures.
//! * [`grad`]: hand-derived reverse-mode gradients of the mean squared error.
//! * [`train`]: Rprop, the progress-strip and validation stopping rules and
//!   the fit loop.
//! * [`isotonic`]: pool-adjacent-violators isotonic regression.
//! * [`bench`]: synthetic benchmark targets, dataset generation, k-fold
//!   splitting and unit normalization.
//! * [`stats`]: quartiles and the paired Wilcoxon signed-rank test.
//!
//! File formats, the experiment runner and the command line live in the
//! companion `smm` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bench;
pub mod data;
pub mod grad;
pub mod isotonic;
pub mod model;
pub mod numerics;
pub mod stats;
pub mod train;

mod error;

pub use crate::data::Dataset;
pub use crate::error::{Error, Result};
pub use crate::model::{
    Architecture, AuxActivation, GroupShape, Model, ModelParams, MonotonicityMask, Variant,
    WeightEncoding,
};
pub use crate::numerics::RngStream;
pub use crate::train::{fit, StopRule, TrainConfig, TrainTrace};
