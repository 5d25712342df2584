use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamState};
use super::metrics::{evaluate, ConfusionMatrix};
use super::network::ModelParams;
use super::{Hyperparams, ModelSpec, NnError};
use crate::dataset::{Dataset, Normalizer};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Full training-set cost (including the L2 term) after each epoch.
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
    pub train_confusion: ConfusionMatrix,
    pub test_accuracy: Option<f64>,
    pub test_confusion: Option<ConfusionMatrix>,
}

impl TrainReport {
    /// Held-out confusion matrix when a test set was evaluated, otherwise the
    /// training one.
    pub fn confusion(&self) -> &ConfusionMatrix {
        self.test_confusion
            .as_ref()
            .unwrap_or(&self.train_confusion)
    }
}

/// Fits a normalizer on `train_set`, initializes from `hyper.seed` and runs
/// mini-batch Adam. The final partial batch of each epoch is trained on.
///
/// The result depends only on `(train_set, spec, hyper)`.
pub fn train(
    train_set: &Dataset,
    spec: &ModelSpec,
    hyper: &Hyperparams,
) -> Result<(ModelParams, TrainReport), NnError> {
    hyper.validate()?;
    if train_set.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    if train_set.feature_width() != spec.input_width() {
        return Err(NnError::DimensionMismatch {
            expected: spec.input_width(),
            found: train_set.feature_width(),
        });
    }
    if train_set.vocabulary().len() != spec.classes() {
        return Err(NnError::ClassCountMismatch {
            model: spec.classes(),
            data: train_set.vocabulary().len(),
        });
    }

    let normalizer = Normalizer::fit(train_set).map_err(|_| NnError::EmptyDataset)?;
    let inputs = normalizer.apply_dataset(train_set);
    let labels: Vec<usize> = train_set.examples().iter().map(|e| e.label).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut params = ModelParams::init(spec, &mut rng);
    params.set_normalizer(normalizer)?;
    let mut adam = AdamState::new(&params);

    let all_rows: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut epoch_losses = Vec::with_capacity(hyper.epochs);
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hyper.batch_size) {
            let rows: Vec<&[f64]> = chunk.iter().map(|&i| inputs[i].as_slice()).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (_, grads) = params.cost(&rows, &ys, hyper.lambda, true);
            adam_step(&mut params, &mut adam, &grads.expect("requested"), hyper)?;
        }
        epoch_losses.push(params.cost(&all_rows, &labels, hyper.lambda, false).0);
    }

    let eval = evaluate(&params, train_set)?;
    let report = TrainReport {
        epoch_losses,
        train_accuracy: eval.accuracy,
        train_confusion: eval.confusion,
        test_accuracy: None,
        test_confusion: None,
    };
    Ok((params, report))
}

/// Trains, rounds the parameters to the `f32` precision of the model file, and
/// reports accuracy of that deployable model on both sets. Evaluating the
/// exported file therefore reproduces these numbers exactly.
pub fn train_and_evaluate(
    train_set: &Dataset,
    test_set: &Dataset,
    spec: &ModelSpec,
    hyper: &Hyperparams,
) -> Result<(ModelParams, TrainReport), NnError> {
    let (params, mut report) = train(train_set, spec, hyper)?;
    let deployed = params.quantized();
    let train_eval = evaluate(&deployed, train_set)?;
    report.train_accuracy = train_eval.accuracy;
    report.train_confusion = train_eval.confusion;
    if !test_set.is_empty() {
        let test_eval = evaluate(&deployed, test_set)?;
        report.test_accuracy = Some(test_eval.accuracy);
        report.test_confusion = Some(test_eval.confusion);
    }
    Ok((deployed, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ClassVocabulary, LabeledExample};

    /// 50 points split by the line x + y = 0 with a margin of at least 0.5.
    fn separable() -> Dataset {
        let mut examples = Vec::new();
        for i in 0..50 {
            let t = i as f64 / 49.0;
            let along = -2.0 + 4.0 * t;
            let offset = 0.5 + (i % 7) as f64 * 0.25;
            let label = i % 2;
            let side = if label == 0 { 1.0 } else { -1.0 };
            // Rotate (along, side*offset) into the (x, y) plane.
            let x = (along + side * offset) / 2f64.sqrt();
            let y = (-along + side * offset) / 2f64.sqrt();
            examples.push(LabeledExample {
                features: vec![x, y],
                label,
            });
        }
        Dataset::new(examples, ClassVocabulary::new(["above", "below"]).unwrap()).unwrap()
    }

    fn toy_hyper() -> Hyperparams {
        Hyperparams {
            learning_rate: 0.05,
            batch_size: 10,
            epochs: 10,
            seed: 3,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn separable_toy_set_fits_perfectly() {
        let data = separable();
        // Independent check that the construction is separable: the sign of
        // x + y decides the label.
        for ex in data.examples() {
            let s = ex.features[0] + ex.features[1];
            assert_eq!(s > 0.0, ex.label == 0);
        }
        let spec = ModelSpec::new(vec![2, 8, 2]).unwrap();
        let (_, report) = train(&data, &spec, &toy_hyper()).unwrap();
        assert_eq!(report.train_accuracy, 1.0, "{:?}", report.epoch_losses);
        for w in report.epoch_losses.windows(2) {
            assert!(w[1] <= w[0], "loss rose: {:?}", report.epoch_losses);
        }
    }

    #[test]
    fn same_seed_same_weights() {
        let data = separable();
        let spec = ModelSpec::new(vec![2, 6, 5, 2]).unwrap();
        let a = train(&data, &spec, &toy_hyper()).unwrap();
        let b = train(&data, &spec, &toy_hyper()).unwrap();
        assert_eq!(a, b);
        let other = train(
            &data,
            &spec,
            &Hyperparams {
                seed: 4,
                ..toy_hyper()
            },
        )
        .unwrap();
        assert_ne!(a.0, other.0);
    }

    #[test]
    fn rejects_empty_and_mismatched_data() {
        let spec = ModelSpec::new(vec![2, 4, 2]).unwrap();
        let vocab = ClassVocabulary::new(["a", "b"]).unwrap();
        let empty = Dataset::with_width(vec![], vocab.clone(), 2).unwrap();
        assert_eq!(
            train(&empty, &spec, &toy_hyper()).unwrap_err(),
            NnError::EmptyDataset
        );
        let wide = Dataset::new(
            vec![LabeledExample {
                features: vec![0.0; 3],
                label: 0,
            }],
            vocab,
        )
        .unwrap();
        assert!(matches!(
            train(&wide, &spec, &toy_hyper()),
            Err(NnError::DimensionMismatch {
                expected: 2,
                found: 3
            })
        ));
        let five = ModelSpec::new(vec![2, 4, 5]).unwrap();
        assert!(matches!(
            train(&separable(), &five, &toy_hyper()),
            Err(NnError::ClassCountMismatch { .. })
        ));
    }

    #[test]
    fn trailing_partial_batch_trains() {
        // 50 rows with batch 48 leaves a trailing batch of 2.
        let data = separable();
        let spec = ModelSpec::new(vec![2, 4, 2]).unwrap();
        let h = Hyperparams {
            batch_size: 48,
            epochs: 1,
            ..toy_hyper()
        };
        let (two_steps, _) = train(&data, &spec, &h).unwrap();
        let (one_step, _) = train(
            &data,
            &spec,
            &Hyperparams {
                batch_size: 50,
                ..h
            },
        )
        .unwrap();
        assert_ne!(two_steps, one_step);
    }
}
