use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smartbag_core::dataset::{default_profiles, generate, split, ClassVocabulary, DEFAULT_ROWS};
use smartbag_core::nn::{train_and_evaluate, ModelParams, TrainedModel};
use smartbag_core::{Hyperparams, ModelSpec};

fn trained() -> (ModelParams, smartbag_core::TrainReport) {
    let vocab = ClassVocabulary::default();
    let data = generate(&default_profiles(), &vocab, DEFAULT_ROWS, 42).unwrap();
    let (train, test) = split(&data, 0.9, 42).unwrap();
    train_and_evaluate(
        &train,
        &test,
        &ModelSpec::default(),
        &Hyperparams::default(),
    )
    .unwrap()
}

#[test]
fn synthetic_activity_task_is_learned() {
    let (params, report) = trained();
    let test_acc = report.test_accuracy.unwrap();
    assert!(test_acc >= 0.95, "test accuracy {test_acc}");
    let confusion = report.test_confusion.as_ref().unwrap();
    for c in 0..5 {
        let r = confusion.recall(c).unwrap();
        assert!(r >= 0.90, "class {c} recall {r}");
    }
    assert_eq!(report.epoch_losses.len(), 10);
    assert!(report.epoch_losses.last() < report.epoch_losses.first());

    let vocab = ClassVocabulary::default();
    let model = TrainedModel::new(params, vocab.clone()).unwrap();
    for (c, profile) in default_profiles().iter().enumerate() {
        let (name, _) = model.classify(&profile.mean_features()).unwrap();
        assert_eq!(name, vocab.name(c).unwrap());
    }
}

#[test]
fn model_file_preserves_predictions() {
    let (params, _) = trained();
    let model = TrainedModel::new(params, ClassVocabulary::default()).unwrap();
    let back = TrainedModel::from_bytes(&model.to_bytes().unwrap()).unwrap();
    assert_eq!(back.to_bytes().unwrap(), model.to_bytes().unwrap());
    let profiles = default_profiles();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let x = profiles[rng.random_range(0..profiles.len())].sample(&mut rng);
        let (a, pa) = model.classify(&x).unwrap();
        let (b, pb) = back.classify(&x).unwrap();
        assert_eq!(a, b);
        assert_eq!(pa.probabilities, pb.probabilities);
    }
}
