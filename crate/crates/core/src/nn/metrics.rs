use std::fmt;

use super::network::ModelParams;
use super::NnError;
use crate::dataset::Dataset;

/// K x K counts; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.classes + predicted] += 1;
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts
            .chunks(self.classes)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.trace() as f64 / n as f64,
        }
    }

    /// Fraction of class `c` examples predicted as `c`; `None` when the class
    /// never occurs.
    pub fn recall(&self, c: usize) -> Option<f64> {
        let row: u64 = self.row_sums()[c];
        (row > 0).then(|| self.get(c, c) as f64 / row as f64)
    }

    /// Renders the grid with class names as row and column labels.
    pub fn render(&self, names: &[String]) -> String {
        let label = |i: usize| names.get(i).cloned().unwrap_or_else(|| i.to_string());
        let width = (0..self.classes)
            .map(|i| label(i).len())
            .chain(self.counts.iter().map(|c| c.to_string().len()))
            .max()
            .unwrap_or(1)
            .max(4);
        let mut out = format!("{:>width$}", "true\\pred");
        for c in 0..self.classes {
            out.push_str(&format!(" {:>width$}", label(c)));
        }
        out.push('\n');
        for r in 0..self.classes {
            out.push_str(&format!("{:>width$}", label(r), width = width.max(9)));
            for c in 0..self.classes {
                out.push_str(&format!(" {:>width$}", self.get(r, c)));
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (0..self.classes).map(|i| i.to_string()).collect();
        f.write_str(&self.render(&names))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

/// Classifies every example (raw features, normalized by the model) and tallies
/// the confusion matrix.
pub fn evaluate(model: &ModelParams, dataset: &Dataset) -> Result<Evaluation, NnError> {
    if dataset.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    if dataset.vocabulary().len() != model.classes() {
        return Err(NnError::ClassCountMismatch {
            model: model.classes(),
            data: dataset.vocabulary().len(),
        });
    }
    let mut confusion = ConfusionMatrix::new(model.classes());
    for ex in dataset.examples() {
        let pred = model.predict(&ex.features)?;
        confusion.record(ex.label, pred.class);
    }
    Ok(Evaluation {
        accuracy: confusion.accuracy(),
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ClassVocabulary, LabeledExample, Normalizer};
    use crate::nn::{DenseLayer, ModelSpec};

    fn balanced(n_per_class: usize) -> Dataset {
        let examples = (0..5)
            .flat_map(|c| {
                (0..n_per_class).map(move |_| LabeledExample {
                    features: vec![if c == 0 { 1.0 } else { 0.0 }; 2],
                    label: c,
                })
            })
            .collect();
        Dataset::new(examples, ClassVocabulary::default()).unwrap()
    }

    #[test]
    fn constant_predictor_scores_one_fifth() {
        let model = ModelParams::zeros(&ModelSpec::new(vec![2, 3, 5]).unwrap());
        let eval = evaluate(&model, &balanced(4)).unwrap();
        assert_eq!(eval.accuracy, 0.2);
        assert_eq!(eval.confusion.row_sums(), vec![4; 5]);
        for r in 0..5 {
            assert_eq!(eval.confusion.get(r, 0), 4);
        }
    }

    #[test]
    fn perfect_classifier_is_diagonal() {
        // Output unit c fires on feature c, hidden layer copies the input.
        let n = 5;
        let mut w0 = vec![0.0; n * n];
        let mut w1 = vec![0.0; n * n];
        for i in 0..n {
            w0[i * n + i] = 1.0;
            w1[i * n + i] = 10.0;
        }
        let model = ModelParams::from_parts(
            vec![
                DenseLayer::from_parts(n, n, w0, vec![0.0; n]).unwrap(),
                DenseLayer::from_parts(n, n, w1, vec![0.0; n]).unwrap(),
            ],
            Normalizer::identity(n),
        )
        .unwrap();
        let examples = (0..10)
            .map(|i| {
                let mut features = vec![0.0; n];
                features[i % n] = 1.0;
                LabeledExample {
                    features,
                    label: i % n,
                }
            })
            .collect();
        let ds = Dataset::new(examples, ClassVocabulary::default()).unwrap();
        let eval = evaluate(&model, &ds).unwrap();
        assert_eq!(eval.accuracy, 1.0);
        for r in 0..n {
            for c in 0..n {
                assert_eq!(eval.confusion.get(r, c), if r == c { 2 } else { 0 });
            }
        }
        assert_eq!(eval.confusion.recall(3), Some(1.0));
    }

    #[test]
    fn empty_and_mismatched_rejected() {
        let model = ModelParams::zeros(&ModelSpec::new(vec![2, 3, 5]).unwrap());
        let empty = Dataset::new(vec![], ClassVocabulary::default()).unwrap();
        assert_eq!(evaluate(&model, &empty), Err(NnError::EmptyDataset));
        let three = ModelParams::zeros(&ModelSpec::new(vec![2, 3, 3]).unwrap());
        assert!(matches!(
            evaluate(&three, &balanced(1)),
            Err(NnError::ClassCountMismatch { .. })
        ));
    }

    #[test]
    fn render_has_one_line_per_class() {
        let mut m = ConfusionMatrix::new(2);
        m.record(0, 0);
        m.record(1, 0);
        let text = m.render(&["Idle".into(), "Walking".into()]);
        assert_eq!(text.lines().count(), 3);
        assert_eq!(m.recall(1), Some(0.0));
        assert_eq!(ConfusionMatrix::new(2).recall(0), None);
    }
}
