use super::network::{DenseLayer, Gradients, ModelParams};
use super::{Hyperparams, NnError};

/// Per-parameter first and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: u64,
    first: Vec<DenseLayer>,
    second: Vec<DenseLayer>,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<DenseLayer> = params
            .layers()
            .iter()
            .map(|l| DenseLayer::zeros(l.inputs(), l.outputs()))
            .collect();
        Self {
            t: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn first_moments(&self) -> &[DenseLayer] {
        &self.first
    }

    pub fn second_moments(&self) -> &[DenseLayer] {
        &self.second
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut ModelParams,
    state: &mut AdamState,
    grads: &Gradients,
    hyper: &Hyperparams,
) -> Result<(), NnError> {
    if !grads.matches(params) || state.first.len() != params.layers().len() {
        return Err(NnError::ShapeMismatch);
    }
    state.t += 1;
    let (b1, b2) = (hyper.beta1, hyper.beta2);
    let c1 = 1.0 - b1.powf(state.t as f64);
    let c2 = 1.0 - b2.powf(state.t as f64);

    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for (((p, g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= hyper.learning_rate * m_hat / (v_hat.sqrt() + hyper.epsilon);
        }
    };

    for (((layer, g), m), v) in params
        .layers_mut()
        .iter_mut()
        .zip(&grads.layers)
        .zip(state.first.iter_mut())
        .zip(state.second.iter_mut())
    {
        update(
            &mut layer.weights,
            &g.weights,
            &mut m.weights,
            &mut v.weights,
        );
        update(&mut layer.biases, &g.biases, &mut m.biases, &mut v.biases);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelSpec;

    fn scalar_net() -> ModelParams {
        // 1 -> 1 -> 1: two weights, two biases.
        let mut p = ModelParams::zeros(&ModelSpec::new(vec![1, 1, 1]).unwrap());
        p.layers_mut()[0].weights[0] = 0.5;
        p.layers_mut()[1].weights[0] = -0.25;
        p
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar_net();
        let before = p.clone();
        let mut s = AdamState::new(&p);
        let g = Gradients::zeros_like(&p);
        adam_step(&mut p, &mut s, &g, &Hyperparams::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g and v_hat = g^2 after one step, so the update is
        // lr * g / (|g| + eps).
        let h = Hyperparams::default();
        for g0 in [3.0, -0.02, 1e-3] {
            let mut p = scalar_net();
            let mut s = AdamState::new(&p);
            let mut g = Gradients::zeros_like(&p);
            g.layers[0].weights[0] = g0;
            adam_step(&mut p, &mut s, &g, &h).unwrap();
            let moved = p.layers()[0].weights[0] - 0.5;
            let expected = -h.learning_rate * g0 / (f64::abs(g0) + h.epsilon);
            assert!((moved - expected).abs() < 1e-15, "{moved} vs {expected}");
            assert!((moved + h.learning_rate * g0.signum()).abs() < 1e-5 * h.learning_rate);
        }
    }

    #[test]
    fn deterministic_and_moments_nonnegative() {
        let h = Hyperparams::default();
        let run = || {
            let mut p = scalar_net();
            let mut s = AdamState::new(&p);
            let mut g = Gradients::zeros_like(&p);
            g.layers[0].weights[0] = 0.7;
            g.layers[1].biases[0] = -1.3;
            for _ in 0..3 {
                adam_step(&mut p, &mut s, &g, &h).unwrap();
            }
            (p, s)
        };
        let (p1, s1) = run();
        let (p2, s2) = run();
        assert_eq!(p1, p2);
        assert_eq!(s1, s2);
        assert_eq!(s1.t, 3);
        assert!(s1.second_moments().iter().all(|l| l
            .weights
            .iter()
            .chain(&l.biases)
            .all(|v| *v >= 0.0)));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = scalar_net();
        let mut s = AdamState::new(&p);
        let other = ModelParams::zeros(&ModelSpec::new(vec![2, 1, 1]).unwrap());
        let g = Gradients::zeros_like(&other);
        assert_eq!(
            adam_step(&mut p, &mut s, &g, &Hyperparams::default()),
            Err(NnError::ShapeMismatch)
        );
    }
}
