//! Finite-difference gradient oracle.
//!
//! Re-implements the forward pass and cost with plain nested loops over a copy
//! of the weights, so it shares no code with the network under test.

#![allow(dead_code, clippy::needless_range_loop)]

use smartbag_core::nn::{Gradients, ModelParams};

/// Weights as `[layer][out][in]` plus biases `[layer][out]`.
#[derive(Clone)]
pub struct NaiveNet {
    pub w: Vec<Vec<Vec<f64>>>,
    pub b: Vec<Vec<f64>>,
}

impl NaiveNet {
    pub fn from_params(p: &ModelParams) -> Self {
        let mut w = Vec::new();
        let mut b = Vec::new();
        for layer in p.layers() {
            let rows = (0..layer.outputs())
                .map(|j| (0..layer.inputs()).map(|i| layer.weight(j, i)).collect())
                .collect();
            w.push(rows);
            b.push(layer.biases.clone());
        }
        Self { w, b }
    }

    pub fn output(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let last = self.w.len() - 1;
        for l in 0..self.w.len() {
            let mut z = Vec::new();
            for j in 0..self.w[l].len() {
                let mut s = self.b[l][j];
                for i in 0..a.len() {
                    s += self.w[l][j][i] * a[i];
                }
                z.push(s);
            }
            if l == last {
                let max = z.iter().cloned().fold(f64::MIN, f64::max);
                let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
                let total: f64 = e.iter().sum();
                a = e.iter().map(|v| v / total).collect();
            } else {
                a = z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
            }
        }
        a
    }

    pub fn cost(&self, xs: &[Vec<f64>], labels: &[usize], lambda: f64) -> f64 {
        let clamp = |v: f64| v.clamp(1e-12, 1.0 - 1e-12);
        let m = xs.len() as f64;
        let mut total = 0.0;
        for (x, &c) in xs.iter().zip(labels) {
            let h = self.output(x);
            for k in 0..h.len() {
                // 1 - h_k as the sum of the other outputs: subtracting a
                // saturated output from 1 loses most of its digits.
                let rest: f64 = (0..h.len()).filter(|&j| j != k).map(|j| h[j]).sum();
                let y = if k == c { 1.0 } else { 0.0 };
                total -= y * clamp(h[k]).ln() + (1.0 - y) * clamp(rest).ln();
            }
        }
        let mut sq = 0.0;
        for layer in &self.w {
            for row in layer {
                for v in row {
                    sq += v * v;
                }
            }
        }
        total / m + lambda / (2.0 * m) * sq
    }
}

/// Relative error with a denominator floor, so entries whose gradient is
/// essentially zero are judged by absolute error instead.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

/// Largest relative error between `grads` and central differences of the
/// naive cost with step `h`.
pub fn max_gradient_error(
    params: &ModelParams,
    grads: &Gradients,
    xs: &[Vec<f64>],
    labels: &[usize],
    lambda: f64,
    h: f64,
) -> f64 {
    let base = NaiveNet::from_params(params);
    let mut worst: f64 = 0.0;
    for l in 0..base.w.len() {
        let outs = base.w[l].len();
        let ins = base.w[l][0].len();
        for j in 0..outs {
            for i in 0..ins {
                let mut plus = base.clone();
                plus.w[l][j][i] += h;
                let mut minus = base.clone();
                minus.w[l][j][i] -= h;
                let numeric =
                    (plus.cost(xs, labels, lambda) - minus.cost(xs, labels, lambda)) / (2.0 * h);
                let analytic = grads.layers[l].weights[j * ins + i];
                worst = worst.max(relative_error(analytic, numeric));
            }
            let mut plus = base.clone();
            plus.b[l][j] += h;
            let mut minus = base.clone();
            minus.b[l][j] -= h;
            let numeric =
                (plus.cost(xs, labels, lambda) - minus.cost(xs, labels, lambda)) / (2.0 * h);
            worst = worst.max(relative_error(grads.layers[l].biases[j], numeric));
        }
    }
    worst
}
