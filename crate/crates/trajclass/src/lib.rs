//! Movement-pattern classification for positioning traces.
//!
//! The crate covers the full loop: synthesizing labeled trajectories under a
//! positioning-noise model, turning them into fixed-width feature instances,
//! training classifiers (decision tree, random forest, SVM) from scratch,
//! tuning the whole pipeline with sequential model-based optimization, and
//! comparing positioning technologies with rank-based statistics.

pub mod cli;
pub mod features;
pub mod hpo;
pub mod learners;
pub mod matrix;
pub mod metrics;
pub mod protocol;
pub mod savgol;
pub mod seed;
pub mod stats;
pub mod trajectory;
