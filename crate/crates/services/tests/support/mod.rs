#![allow(dead_code)]

use smartbag_core::dataset::{default_profiles, generate, ClassVocabulary};
use smartbag_core::nn::{train, TrainedModel};
use smartbag_core::{Hyperparams, ModelSpec};

/// Small model trained in well under a second.
pub fn quick_model() -> TrainedModel {
    let vocab = ClassVocabulary::default();
    let data = generate(&default_profiles(), &vocab, 500, 3).unwrap();
    let spec = ModelSpec::new(vec![13, 16, 5]).unwrap();
    let hyper = Hyperparams {
        learning_rate: 0.01,
        batch_size: 32,
        epochs: 20,
        ..Hyperparams::default()
    };
    let (params, _) = train(&data, &spec, &hyper).unwrap();
    TrainedModel::new(params.quantized(), vocab).unwrap()
}
