use super::{Dataset, DatasetError};

/// Per-feature z-score transform fitted on a training set.
///
/// Uses the population (divide-by-N) standard deviation. Constant features get
/// a standard deviation of 1, which maps them to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Normalizer {
    pub fn fit(train: &Dataset) -> Result<Self, DatasetError> {
        Self::fit_rows(train.examples().iter().map(|e| e.features.as_slice()))
    }

    pub fn fit_rows<'a, I>(rows: I) -> Result<Self, DatasetError>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let first = rows.first().ok_or(DatasetError::Empty)?;
        let width = first.len();
        let n = rows.len() as f64;

        let mut mean = vec![0.0; width];
        for row in &rows {
            for (m, v) in mean.iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);

        let mut var = vec![0.0; width];
        for row in &rows {
            for ((s, v), m) in var.iter_mut().zip(row.iter()).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        let std = var
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                if sd <= 1e-12 * m.abs().max(1.0) {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    /// Builds a normalizer from stored statistics. Every stddev must be a
    /// positive finite number.
    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>) -> Result<Self, DatasetError> {
        if mean.len() != std.len() {
            return Err(DatasetError::InvalidExample {
                index: 0,
                reason: format!("{} means but {} stddevs", mean.len(), std.len()),
            });
        }
        if mean.iter().any(|m| !m.is_finite()) || std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(DatasetError::InvalidExample {
                index: 0,
                reason: "normalizer statistics must be finite with positive stddev".into(),
            });
        }
        Ok(Self { mean, std })
    }

    /// The identity transform for `width` features.
    pub fn identity(width: usize) -> Self {
        Self {
            mean: vec![0.0; width],
            std: vec![1.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    /// `(x - mean) / std`, feature by feature. `features` must have
    /// [`Normalizer::width`] entries.
    pub fn apply(&self, features: &[f64]) -> Vec<f64> {
        debug_assert_eq!(features.len(), self.width());
        features
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn apply_dataset(&self, data: &Dataset) -> Vec<Vec<f64>> {
        data.examples()
            .iter()
            .map(|e| self.apply(&e.features))
            .collect()
    }
}
