//! Core pieces of the smart bag: the activity classifier, labeled dataset
//! handling, and the device-to-gateway frame protocol.
//!
//! Everything here is synchronous and deterministic given its seeds, so the
//! service crate can share trained models across threads without locking.

pub mod dataset;
pub mod frame;
pub mod nn;

pub use dataset::{
    ClassProfile, ClassVocabulary, Dataset, DatasetError, LabeledExample, Normalizer,
    FEATURE_COUNT, FEATURE_NAMES,
};
pub use frame::{FrameError, SensorFrame};
pub use nn::{Hyperparams, ModelParams, ModelSpec, NnError, TrainReport, TrainedModel};
