//! Distortion of latent utilities into the scores an evaluator observes.
//!
//! Candidates in the advantaged group (label 0) are always scored at face
//! value; members of other groups are scored through one of the models
//! below.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{GroupLabels, LatentProfile};

/// How observed scores are derived from latent utilities for groups other
/// than group 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasModel {
    /// Multiply by a fixed factor beta in (0, 1].
    Multiplicative { beta: f64 },
    /// Multiply by a per-candidate factor drawn from a Gaussian centered at
    /// beta with the given std, truncated to [0, 1].
    NoisyMultiplicative { beta: f64, std: f64 },
    /// Add delta times a standard Gaussian to each utility. Observed scores
    /// may go negative.
    AdditiveNoise { delta: f64 },
}

impl BiasModel {
    pub fn validate(&self) -> Result<(), Error> {
        match *self {
            BiasModel::Multiplicative { beta } => {
                if !beta.is_finite() || beta <= 0.0 || beta > 1.0 {
                    return Err(Error::Config(format!("bias factor {beta} outside (0, 1]")));
                }
            }
            BiasModel::NoisyMultiplicative { beta, std } => {
                if !beta.is_finite() || beta <= 0.0 || beta > 1.0 {
                    return Err(Error::Config(format!("bias factor {beta} outside (0, 1]")));
                }
                if !std.is_finite() || std < 0.0 {
                    return Err(Error::Config(format!("bias noise std {std} must be >= 0")));
                }
            }
            BiasModel::AdditiveNoise { delta } => {
                if !delta.is_finite() || delta < 0.0 {
                    return Err(Error::Config(format!("noise scale {delta} must be >= 0")));
                }
            }
        }
        Ok(())
    }

    /// Scale factors or offsets beyond group 0. Group labels above 1 share
    /// the same treatment as group 1.
    fn observe<R: Rng + ?Sized>(&self, u: f64, rng: &mut R) -> f64 {
        match *self {
            BiasModel::Multiplicative { beta } => beta * u,
            BiasModel::NoisyMultiplicative { beta, std } => {
                if std == 0.0 {
                    return beta * u;
                }
                let normal = Normal::new(beta, std).expect("validated std");
                let factor = loop {
                    let b = normal.sample(rng);
                    if (0.0..=1.0).contains(&b) {
                        break b;
                    }
                };
                factor * u
            }
            BiasModel::AdditiveNoise { delta } => {
                let normal = Normal::new(0.0, 1.0).expect("unit std");
                u + delta * normal.sample(rng)
            }
        }
    }
}

/// Observed scores for every candidate: group 0 keeps its latent utilities,
/// all other groups are passed through `model`.
pub fn apply_bias<R: Rng + ?Sized>(
    latent: &LatentProfile,
    groups: &GroupLabels,
    model: &BiasModel,
    rng: &mut R,
) -> Result<Vec<f64>, Error> {
    model.validate()?;
    if latent.len() != groups.len() {
        return Err(Error::LengthMismatch(format!(
            "{} utilities for {} group labels",
            latent.len(),
            groups.len()
        )));
    }
    Ok(latent
        .values()
        .iter()
        .zip(groups.labels())
        .map(|(&u, &g)| if g == 0 { u } else { model.observe(u, rng) })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn profile(values: &[f64]) -> LatentProfile {
        LatentProfile::new(values.to_vec()).unwrap()
    }

    #[test]
    fn multiplicative_scales_only_the_disadvantaged_group() {
        let latent = profile(&[0.9, 0.8, 0.7, 0.6]);
        let groups = GroupLabels::new(vec![0, 1, 0, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let observed =
            apply_bias(&latent, &groups, &BiasModel::Multiplicative { beta: 0.5 }, &mut rng)
                .unwrap();
        assert_eq!(observed, vec![0.9, 0.4, 0.7, 0.3]);
    }

    #[test]
    fn beta_one_changes_nothing() {
        let latent = profile(&[0.3, 0.2, 0.1]);
        let groups = GroupLabels::new(vec![0, 1, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let observed =
            apply_bias(&latent, &groups, &BiasModel::Multiplicative { beta: 1.0 }, &mut rng)
                .unwrap();
        assert_eq!(observed, latent.values());
    }

    #[test]
    fn noisy_factors_stay_in_unit_interval_and_center_on_beta() {
        let n = 20_000;
        let latent = profile(&vec![1.0; n]);
        let mut labels = vec![1; n];
        labels[0] = 0;
        let groups = GroupLabels::new(labels).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = BiasModel::NoisyMultiplicative { beta: 0.5, std: 0.1 };
        let observed = apply_bias(&latent, &groups, &model, &mut rng).unwrap();
        let distorted = &observed[1..];
        assert!(distorted.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let mean = distorted.iter().sum::<f64>() / distorted.len() as f64;
        // Symmetric truncation at 0.5 +/- 5 sigma leaves the mean at beta.
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
    }

    #[test]
    fn additive_noise_perturbs_around_the_latent_value() {
        let n = 20_000;
        let latent = profile(&vec![0.5; n]);
        let mut labels = vec![1; n];
        labels[0] = 0;
        let groups = GroupLabels::new(labels).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let observed =
            apply_bias(&latent, &groups, &BiasModel::AdditiveNoise { delta: 2.0 }, &mut rng)
                .unwrap();
        let distorted = &observed[1..];
        assert!(distorted.iter().any(|&v| v < 0.0), "large noise reaches negatives");
        let mean = distorted.iter().sum::<f64>() / distorted.len() as f64;
        let sd = (distorted.iter().map(|&v| (v - mean).powi(2)).sum::<f64>()
            / distorted.len() as f64)
            .sqrt();
        assert!((mean - 0.5).abs() < 0.05, "{mean}");
        assert!((sd - 2.0).abs() < 0.05, "{sd}");
    }

    #[test]
    fn zero_delta_additive_noise_is_identity() {
        let latent = profile(&[0.1, 0.9]);
        let groups = GroupLabels::new(vec![0, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let observed =
            apply_bias(&latent, &groups, &BiasModel::AdditiveNoise { delta: 0.0 }, &mut rng)
                .unwrap();
        assert_eq!(observed, latent.values());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let latent = profile(&[0.5]);
        let groups = GroupLabels::new(vec![0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for model in [
            BiasModel::Multiplicative { beta: 0.0 },
            BiasModel::Multiplicative { beta: 1.5 },
            BiasModel::NoisyMultiplicative { beta: 0.5, std: -0.1 },
            BiasModel::AdditiveNoise { delta: -1.0 },
        ] {
            assert!(apply_bias(&latent, &groups, &model, &mut rng).is_err(), "{model:?}");
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let latent = profile(&[0.5, 0.6]);
        let groups = GroupLabels::new(vec![0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = BiasModel::Multiplicative { beta: 0.5 };
        assert!(apply_bias(&latent, &groups, &model, &mut rng).is_err());
    }
}
