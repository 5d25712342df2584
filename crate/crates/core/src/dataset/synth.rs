use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ClassVocabulary, Dataset, DatasetError, LabeledExample, FEATURE_COUNT, WATER_INDEX};

/// Row count of the reference recording.
pub const DEFAULT_ROWS: usize = 1743;

/// Number of Gaussian channels; the water channel is sampled separately.
const CONTINUOUS: usize = FEATURE_COUNT - 1;

/// Signal statistics for one activity class.
///
/// `mean`/`std` cover the 12 continuous channels in feature order (everything
/// but `water`). Water is Bernoulli with `water_prob`; `sos_prob` is only used
/// when replaying frame traces.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProfile {
    pub mean: [f64; CONTINUOUS],
    pub std: [f64; CONTINUOUS],
    pub water_prob: f64,
    pub sos_prob: f64,
}

impl ClassProfile {
    pub fn validate(&self) -> Result<(), String> {
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err("non-finite mean".into());
        }
        if self.std.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err("stddev must be finite and non-negative".into());
        }
        for (name, p) in [("water_prob", self.water_prob), ("sos_prob", self.sos_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} {p} outside [0, 1]"));
            }
        }
        Ok(())
    }

    /// Draws one feature vector.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        for ((o, &m), &s) in out.iter_mut().zip(&self.mean).zip(&self.std) {
            *o = Normal::new(m, s).expect("validated profile").sample(rng);
        }
        out[WATER_INDEX] = if rng.random_bool(self.water_prob) {
            1.0
        } else {
            0.0
        };
        out
    }

    /// The class-mean feature vector, with water at its most likely value.
    pub fn mean_features(&self) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        out[..CONTINUOUS].copy_from_slice(&self.mean);
        out[WATER_INDEX] = if self.water_prob > 0.5 { 1.0 } else { 0.0 };
        out
    }
}

/// Shared environment channels: mq2, mq135, temp, humidity.
const ENV_MEAN: [f64; 4] = [120.0, 80.0, 27.0, 55.0];
const ENV_STD: [f64; 4] = [15.0, 12.0, 1.5, 5.0];

fn profile(
    motion_mean: [f64; 8],
    motion_std: [f64; 8],
    water_prob: f64,
    sos_prob: f64,
) -> ClassProfile {
    let mut mean = [0.0; CONTINUOUS];
    let mut std = [0.0; CONTINUOUS];
    mean[..8].copy_from_slice(&motion_mean);
    std[..8].copy_from_slice(&motion_std);
    mean[8..].copy_from_slice(&ENV_MEAN);
    std[8..].copy_from_slice(&ENV_STD);
    ClassProfile {
        mean,
        std,
        water_prob,
        sos_prob,
    }
}

/// Built-in profiles for `[Idle, Walking, Running, Climbing, Falling]`.
///
/// Channels: ax, ay, az (g), yaw, pitch, roll (deg/s), load_left,
/// load_right. Gas and climate channels are shared by every class, which keeps
/// gas readings at least 5 stddevs under the default alert thresholds.
pub fn default_profiles() -> Vec<ClassProfile> {
    vec![
        // Idle: gravity only, barely moving.
        profile(
            [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 40.0, 40.0],
            [0.03, 0.03, 0.03, 2.0, 2.0, 2.0, 3.0, 3.0],
            0.01,
            0.0,
        ),
        // Walking: moderate periodic swing.
        profile(
            [0.8, 0.3, 1.15, 30.0, 10.0, 16.0, 55.0, 55.0],
            [0.06, 0.05, 0.05, 4.0, 3.0, 3.0, 4.0, 4.0],
            0.01,
            0.0,
        ),
        // Running: large acceleration and rotation.
        profile(
            [1.2, 0.6, 1.45, 60.0, 25.0, 32.0, 70.0, 70.0],
            [0.08, 0.06, 0.06, 6.0, 4.0, 4.0, 4.0, 4.0],
            0.01,
            0.0,
        ),
        // Climbing: pitched forward, weight on one strap.
        profile(
            [0.4, 0.15, 1.3, 15.0, 45.0, 8.0, 85.0, 45.0],
            [0.06, 0.05, 0.05, 4.0, 4.0, 3.0, 4.0, 4.0],
            0.01,
            0.0,
        ),
        // Falling: transient spike, near free-fall z, straps unloaded.
        profile(
            [1.6, 0.9, 0.3, 90.0, 60.0, 64.0, 15.0, 15.0],
            [0.1, 0.08, 0.1, 8.0, 6.0, 6.0, 4.0, 4.0],
            0.01,
            0.05,
        ),
    ]
}

/// Draws `n` labeled rows: labels uniform over classes, features from the
/// label's profile. Deterministic in `seed`.
pub fn generate(
    profiles: &[ClassProfile],
    vocabulary: &ClassVocabulary,
    n: usize,
    seed: u64,
) -> Result<Dataset, DatasetError> {
    let k = vocabulary.len();
    if profiles.len() != k {
        return Err(DatasetError::InvalidProfile {
            index: profiles.len(),
            reason: format!("{} profiles for {k} classes", profiles.len()),
        });
    }
    for (index, p) in profiles.iter().enumerate() {
        p.validate()
            .map_err(|reason| DatasetError::InvalidProfile { index, reason })?;
    }
    if n < k {
        return Err(DatasetError::TooFewRows { n, classes: k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let examples = (0..n)
        .map(|_| {
            let label = rng.random_range(0..k);
            LabeledExample {
                features: profiles[label].sample(&mut rng).to_vec(),
                label,
            }
        })
        .collect();
    Dataset::with_width(examples, vocabulary.clone(), FEATURE_COUNT)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_profiles_reproduce_means() {
        let profiles: Vec<ClassProfile> = (0..5)
            .map(|c| ClassProfile {
                mean: [c as f64 * 10.0 + 1.5; CONTINUOUS],
                std: [0.0; CONTINUOUS],
                water_prob: if c % 2 == 0 { 0.0 } else { 1.0 },
                sos_prob: 0.0,
            })
            .collect();
        let ds = generate(&profiles, &ClassVocabulary::default(), 5, 9).unwrap();
        assert_eq!(ds.len(), 5);
        for ex in ds.examples() {
            assert_eq!(ex.features, profiles[ex.label].mean_features().to_vec());
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let v = ClassVocabulary::default();
        let a = generate(&default_profiles(), &v, 200, 5).unwrap();
        let b = generate(&default_profiles(), &v, 200, 5).unwrap();
        let c = generate(&default_profiles(), &v, 200, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn class_counts_are_near_uniform() {
        let ds = generate(
            &default_profiles(),
            &ClassVocabulary::default(),
            DEFAULT_ROWS,
            42,
        )
        .unwrap();
        let expected = DEFAULT_ROWS as f64 / 5.0;
        for count in ds.class_counts() {
            assert!(
                (count as f64 - expected).abs() <= 0.15 * expected,
                "count {count} vs {expected}"
            );
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let v = ClassVocabulary::default();
        assert_eq!(
            generate(&default_profiles(), &v, 4, 0),
            Err(DatasetError::TooFewRows { n: 4, classes: 5 })
        );
        assert!(generate(&default_profiles()[..4], &v, 10, 0).is_err());
        let mut bad = default_profiles();
        bad[2].std[0] = -1.0;
        assert!(matches!(
            generate(&bad, &v, 10, 0),
            Err(DatasetError::InvalidProfile { index: 2, .. })
        ));
        bad = default_profiles();
        bad[1].water_prob = 1.5;
        assert!(generate(&bad, &v, 10, 0).is_err());
    }

    #[test]
    fn gas_means_sit_five_sigma_under_default_thresholds() {
        for p in default_profiles() {
            assert!(p.mean[8] + 5.0 * p.std[8] < 300.0);
            assert!(p.mean[9] + 5.0 * p.std[9] < 200.0);
        }
    }
}
