mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smartbag_core::dataset::Normalizer;
use smartbag_core::nn::{one_hot, DenseLayer, ModelParams, ModelSpec};
use support::oracle::{max_gradient_error, NaiveNet};

fn random_case(rng: &mut ChaCha8Rng) -> (ModelParams, Vec<Vec<f64>>, Vec<usize>) {
    let depth = rng.random_range(3..=5);
    let sizes: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=8)).collect();
    let mut sizes = sizes;
    // At least two classes so the cost is not constant.
    let last = sizes.len() - 1;
    sizes[last] = sizes[last].max(2);
    let spec = ModelSpec::new(sizes).unwrap();
    // Random biases as well as weights: with zero biases a unit fed only by
    // dead units sits exactly on the ReLU kink.
    let layers = spec
        .layer_sizes()
        .windows(2)
        .map(|w| {
            let weights = (0..w[0] * w[1])
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let biases = (0..w[1]).map(|_| rng.random_range(-0.5..0.5)).collect();
            DenseLayer::from_parts(w[0], w[1], weights, biases).unwrap()
        })
        .collect();
    let params = ModelParams::from_parts(layers, Normalizer::identity(spec.input_width())).unwrap();
    let m = rng.random_range(1..=8);
    let xs = (0..m)
        .map(|_| {
            (0..spec.input_width())
                .map(|_| rng.random_range(-1.5..1.5))
                .collect()
        })
        .collect();
    let labels = (0..m)
        .map(|_| rng.random_range(0..spec.classes()))
        .collect();
    (params, xs, labels)
}

#[test]
fn naive_oracle_agrees_with_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..10 {
        let (params, xs, labels) = random_case(&mut rng);
        let targets: Vec<Vec<f64>> = labels
            .iter()
            .map(|&c| one_hot(c, params.classes()))
            .collect();
        let ours = params.loss(&xs, &targets, 0.3).unwrap();
        let naive = NaiveNet::from_params(&params).cost(&xs, &labels, 0.3);
        assert!((ours - naive).abs() < 1e-12, "{ours} vs {naive}");
    }
}

#[test]
fn spec_3_4_5_2_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let spec = ModelSpec::new(vec![3, 4, 5, 2]).unwrap();
    let params = ModelParams::init(&spec, &mut rng);
    let xs: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let labels = vec![0, 1, 1, 0];
    let targets: Vec<Vec<f64>> = labels.iter().map(|&c| one_hot(c, 2)).collect();
    let grads = params.backward(&xs, &targets, 0.0).unwrap();
    let err = max_gradient_error(&params, &grads, &xs, &labels, 0.0, 1e-5);
    assert!(err <= 1e-5, "max relative error {err}");
}

#[test]
fn random_networks_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let (params, xs, labels) = random_case(&mut rng);
        let lambda = if case % 2 == 0 { 0.0 } else { 0.5 };
        let targets: Vec<Vec<f64>> = labels
            .iter()
            .map(|&c| one_hot(c, params.classes()))
            .collect();
        let grads = params.backward(&xs, &targets, lambda).unwrap();
        let err = max_gradient_error(&params, &grads, &xs, &labels, lambda, 1e-5);
        assert!(
            err <= 1e-5,
            "case {case} {:?}: {err}",
            params.spec().layer_sizes()
        );
    }
}
