//! Physical-layer spoofing detection from OFDM channel estimates.
//!
//! The crate covers the whole offline pipeline: synthesizing (or loading)
//! per-packet channel-estimate traces for a legitimate transmitter and an
//! attacker, turning them into windowed magnitude features, fitting binary
//! classifiers, tuning them by exhaustive grid search, and sweeping the
//! experiment knobs (attack intensity, feature dimension, training size,
//! window size) to produce accuracy reports.

pub mod channel;
pub mod classifiers;
pub mod gridsearch;
pub mod harness;
pub mod label;
pub mod preprocess;
pub mod rng;
pub mod trace;

pub use channel::{ChannelEstimate, LinkModel, LinkState, ScenarioConfig};
pub use classifiers::{ClassifierSpec, Family, FittedModel};
pub use label::TransmitterLabel;
pub use preprocess::{FeatureMatrix, PreprocessConfig, Reduction};
pub use trace::{TraceCollection, TraceDataset};
