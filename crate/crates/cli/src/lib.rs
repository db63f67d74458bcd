//! Experiment orchestration for flow interpolation and source localization:
//! typed configurations with override merging, evaluation metrics, and the
//! experiment runners behind the `hodgeflow` binary.

pub mod config;
pub mod experiments;
pub mod metrics;
