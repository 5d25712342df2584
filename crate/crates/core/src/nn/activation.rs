use super::NnError;

/// Elementwise `max(z, 0)`.
pub fn relu(z: &[f64]) -> Result<Vec<f64>, NnError> {
    check_finite(z)?;
    Ok(z.iter().map(|&v| v.max(0.0)).collect())
}

/// Normalized exponentials, shifted by the maximum so large logits do not
/// overflow.
pub fn softmax(z: &[f64]) -> Result<Vec<f64>, NnError> {
    if z.is_empty() {
        return Err(NnError::EmptyVector);
    }
    check_finite(z)?;
    let mut out = z.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

fn check_finite(z: &[f64]) -> Result<(), NnError> {
    match z.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(NnError::NonFinite(i)),
        None => Ok(()),
    }
}

pub(crate) fn relu_in_place(z: &mut [f64]) {
    for v in z {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}
