use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, DatasetError};

/// Seeded random partition into `(train, test)`.
///
/// The train side receives `floor(fraction * N)` examples; the rest go to test.
pub fn split(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::FractionOutOfRange(train_fraction));
    }
    if dataset.is_empty() {
        return Err(DatasetError::Empty);
    }
    let n = dataset.len();
    // Small slack so products such as 0.29 * 100 land on 29, not 28.
    let n_train = ((train_fraction * n as f64) + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train_idx, test_idx) = order.split_at(n_train.min(n));
    Ok((dataset.subset(train_idx), dataset.subset(test_idx)))
}
