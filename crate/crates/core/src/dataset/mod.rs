//! Labeled sensor datasets: the 13-channel feature schema, class vocabulary,
//! CSV persistence, seeded splitting, z-score normalization and the synthetic
//! generator that stands in for real recordings.

mod csv_io;
mod normalize;
mod split;
mod synth;

pub use csv_io::{load_csv, save_csv};
pub use normalize::Normalizer;
pub use split::split;
pub use synth::{default_profiles, generate, ClassProfile, DEFAULT_ROWS};

use thiserror::Error;

/// Width of the bag feature vector.
pub const FEATURE_COUNT: usize = 13;

/// Canonical feature order. GPS is deliberately absent: location is telemetry,
/// not activity evidence.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "ax",
    "ay",
    "az",
    "yaw",
    "pitch",
    "roll",
    "load_left",
    "load_right",
    "mq2",
    "mq135",
    "temp",
    "humidity",
    "water",
];

/// Index of the binary water channel inside the feature vector.
pub const WATER_INDEX: usize = 12;

pub const DEFAULT_CLASSES: [&str; 5] = ["Idle", "Walking", "Running", "Climbing", "Falling"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("row {row}: expected {expected} columns, found {found}")]
    Arity {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: column `{column}` is not a finite number: {value:?}")]
    NotNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: unknown label {label:?}")]
    UnknownLabel { row: usize, label: String },
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("example {index}: {reason}")]
    InvalidExample { index: usize, reason: String },
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("dataset is empty")]
    Empty,
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    FractionOutOfRange(f64),
    #[error("need at least {classes} rows to cover every class, got {n}")]
    TooFewRows { n: usize, classes: usize },
    #[error("invalid class profile {index}: {reason}")]
    InvalidProfile { index: usize, reason: String },
}

/// Ordered list of activity class names. Position is the class index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassVocabulary {
    names: Vec<String>,
}

impl ClassVocabulary {
    pub fn new<I, S>(names: I) -> Result<Self, DatasetError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(DatasetError::InvalidVocabulary("no classes".into()));
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(DatasetError::InvalidVocabulary(format!(
                    "class {i} has an empty name"
                )));
            }
            if names[..i].contains(name) {
                return Err(DatasetError::InvalidVocabulary(format!(
                    "duplicate class {name:?}"
                )));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl Default for ClassVocabulary {
    fn default() -> Self {
        Self {
            names: DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: Vec<f64>,
    pub label: usize,
}

/// A validated collection of examples sharing one feature width and one
/// vocabulary.
///
/// Bag datasets (CSV, synthetic) always have [`FEATURE_COUNT`] features; other
/// widths are accepted so the network can be exercised on toy problems.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<LabeledExample>,
    vocabulary: ClassVocabulary,
    width: usize,
}

impl Dataset {
    pub fn new(
        examples: Vec<LabeledExample>,
        vocabulary: ClassVocabulary,
    ) -> Result<Self, DatasetError> {
        let width = examples.first().map_or(FEATURE_COUNT, |e| e.features.len());
        Self::with_width(examples, vocabulary, width)
    }

    pub fn with_width(
        examples: Vec<LabeledExample>,
        vocabulary: ClassVocabulary,
        width: usize,
    ) -> Result<Self, DatasetError> {
        for (index, ex) in examples.iter().enumerate() {
            if ex.features.len() != width {
                return Err(DatasetError::InvalidExample {
                    index,
                    reason: format!("expected {width} features, found {}", ex.features.len()),
                });
            }
            if let Some(j) = ex.features.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::InvalidExample {
                    index,
                    reason: format!("feature {j} is not finite"),
                });
            }
            if ex.label >= vocabulary.len() {
                return Err(DatasetError::InvalidExample {
                    index,
                    reason: format!("label {} outside {} classes", ex.label, vocabulary.len()),
                });
            }
        }
        Ok(Self {
            examples,
            vocabulary,
            width,
        })
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn vocabulary(&self) -> &ClassVocabulary {
        &self.vocabulary
    }

    pub fn feature_width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Number of examples per class index.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.vocabulary.len()];
        for ex in &self.examples {
            counts[ex.label] += 1;
        }
        counts
    }

    /// Selects examples by index, keeping vocabulary and width.
    pub(crate) fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            vocabulary: self.vocabulary.clone(),
            width: self.width,
        }
    }
}
