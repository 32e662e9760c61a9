//! Random generation of latent utilities and preference rankings.

use rand::Rng;
use rand_distr::{Distribution, Normal, Pareto as ParetoDist};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::LatentProfile;

/// Distribution of latent utilities. Pareto uses scale 1, so its mean is
/// shape/(shape-1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityDistribution {
    Uniform01,
    /// Gaussian truncated by rejection to `[lower, inf)`.
    TruncGaussian { mean: f64, std: f64, lower: f64 },
    Pareto { shape: f64 },
}

impl UtilityDistribution {
    /// Truncated Gaussian with mean 0 and std 1, bounded below by 0.
    pub const GAUSS: UtilityDistribution =
        UtilityDistribution::TruncGaussian { mean: 0.0, std: 1.0, lower: 0.0 };
    /// Pareto with shape 3 (mean 1.5 at scale 1).
    pub const PARETO: UtilityDistribution = UtilityDistribution::Pareto { shape: 3.0 };

    pub fn validate(&self) -> Result<(), Error> {
        match *self {
            UtilityDistribution::Uniform01 => Ok(()),
            UtilityDistribution::TruncGaussian { mean, std, lower } => {
                if !std.is_finite() || std <= 0.0 {
                    return Err(Error::Config(format!("truncated Gaussian std {std} must be > 0")));
                }
                if !mean.is_finite() || !lower.is_finite() {
                    return Err(Error::Config("non-finite truncated Gaussian parameter".into()));
                }
                if lower < 0.0 {
                    return Err(Error::Config("utility lower bound must be >= 0".into()));
                }
                Ok(())
            }
            UtilityDistribution::Pareto { shape } => {
                if !shape.is_finite() || shape <= 0.0 {
                    return Err(Error::Config(format!("Pareto shape {shape} must be > 0")));
                }
                Ok(())
            }
        }
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            UtilityDistribution::Uniform01 => rng.random::<f64>(),
            UtilityDistribution::TruncGaussian { mean, std, lower } => {
                let normal = Normal::new(mean, std).expect("validated std");
                loop {
                    let x = normal.sample(rng);
                    if x >= lower {
                        return x;
                    }
                }
            }
            UtilityDistribution::Pareto { shape } => {
                ParetoDist::new(1.0, shape).expect("validated shape").sample(rng)
            }
        }
    }
}

/// `n` i.i.d. draws from `dist`.
pub fn sample_utilities<R: Rng + ?Sized>(
    dist: &UtilityDistribution,
    n: usize,
    rng: &mut R,
) -> Result<LatentProfile, Error> {
    dist.validate()?;
    LatentProfile::new((0..n).map(|_| dist.sample_one(rng)).collect())
}

/// Mallows distribution over rankings: Pr(sigma) proportional to
/// phi^d(sigma, rho) where d is the Kendall tau distance to the central
/// ranking rho.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MallowsModel {
    central: Vec<usize>,
    phi: f64,
}

impl MallowsModel {
    pub fn new(central: Vec<usize>, phi: f64) -> Result<Self, Error> {
        let p = central.len();
        let mut seen = vec![false; p];
        for &j in &central {
            if j >= p || seen[j] {
                return Err(Error::InvalidInput("central ranking is not a permutation".into()));
            }
            seen[j] = true;
        }
        if !phi.is_finite() || phi <= 0.0 || phi > 1.0 {
            return Err(Error::Config(format!("dispersion phi {phi} outside (0, 1]")));
        }
        Ok(Self { central, phi })
    }

    pub fn central(&self) -> &[usize] {
        &self.central
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// One exact draw via repeated insertion: item j of the central ranking
    /// is inserted i places from the bottom of the current prefix with
    /// probability proportional to phi^i, which charges phi once per
    /// inversion introduced.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let p = self.central.len();
        let mut out: Vec<usize> = Vec::with_capacity(p);
        let mut weights: Vec<f64> = Vec::with_capacity(p);
        for (j, &item) in self.central.iter().enumerate() {
            weights.clear();
            let mut w = 1.0;
            let mut total = 0.0;
            for _ in 0..=j {
                total += w;
                weights.push(w);
                w *= self.phi;
            }
            let mut pick = rng.random::<f64>() * total;
            // weights[i] is the chance of landing i slots from the bottom.
            let mut from_bottom = j;
            for (i, w) in weights.iter().enumerate() {
                if pick < *w || i == j {
                    from_bottom = i;
                    break;
                }
                pick -= w;
            }
            out.insert(j - from_bottom, item);
        }
        out
    }
}

/// Convenience wrapper over [`MallowsModel::sample`].
pub fn sample_mallows<R: Rng + ?Sized>(model: &MallowsModel, rng: &mut R) -> Vec<usize> {
    model.sample(rng)
}

/// Kendall tau distance: the number of pairs ordered differently by the two
/// rankings.
pub fn kendall_tau(a: &[usize], b: &[usize]) -> Result<usize, Error> {
    let p = a.len();
    if b.len() != p {
        return Err(Error::LengthMismatch(format!("rankings of length {p} and {}", b.len())));
    }
    let mut pos_b = vec![usize::MAX; p];
    for (rank, &item) in b.iter().enumerate() {
        if item >= p || pos_b[item] != usize::MAX {
            return Err(Error::InvalidInput("second ranking is not a permutation".into()));
        }
        pos_b[item] = rank;
    }
    let mut mapped = Vec::with_capacity(p);
    let mut seen = vec![false; p];
    for &item in a {
        if item >= p || seen[item] {
            return Err(Error::InvalidInput("first ranking is not a permutation".into()));
        }
        seen[item] = true;
        mapped.push(pos_b[item]);
    }
    let mut count = 0usize;
    for i in 0..p {
        for j in i + 1..p {
            if mapped[i] > mapped[j] {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// A uniformly random ranking at Kendall tau distance exactly `gamma` from
/// `rho`, drawn by sampling an inversion table with the given total
/// uniformly and decoding it against `rho`.
pub fn ranking_at_distance<R: Rng + ?Sized>(
    rho: &[usize],
    gamma: usize,
    rng: &mut R,
) -> Result<Vec<usize>, Error> {
    let p = rho.len();
    kendall_tau(rho, rho)?; // permutation check
    let max = p * p.saturating_sub(1) / 2;
    if gamma > max {
        return Err(Error::InvalidInput(format!(
            "distance {gamma} exceeds the maximum {max} for {p} items"
        )));
    }

    // ways[j][s]: number of inversion tables for positions j.. summing to s,
    // where position j admits entries 0..=p-1-j. Counts grow like p!, so
    // track them in f64; the sampling weights stay accurate far beyond any
    // practical p.
    let mut ways = vec![vec![0.0f64; gamma + 1]; p + 1];
    ways[p][0] = 1.0;
    for j in (0..p).rev() {
        let cap = p - 1 - j;
        for s in 0..=gamma {
            let mut total = 0.0;
            for c in 0..=cap.min(s) {
                total += ways[j + 1][s - c];
            }
            ways[j][s] = total;
        }
    }

    let mut remaining: Vec<usize> = rho.to_vec();
    let mut out = Vec::with_capacity(p);
    let mut s = gamma;
    for j in 0..p {
        let cap = p - 1 - j;
        let total = ways[j][s];
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = cap.min(s);
        for c in 0..=cap.min(s) {
            let w = ways[j + 1][s - c];
            if pick < w {
                chosen = c;
                break;
            }
            pick -= w;
        }
        // Pulling the item `chosen` places down the remaining central order
        // creates exactly `chosen` new discordant pairs.
        out.push(remaining.remove(chosen));
        s -= chosen;
    }
    assert_eq!(
        kendall_tau(&out, rho)?,
        gamma,
        "constructed ranking must sit at the requested distance"
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_mean_is_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let profile =
            sample_utilities(&UtilityDistribution::Uniform01, 100_000, &mut rng).unwrap();
        let mean = profile.values().iter().sum::<f64>() / profile.len() as f64;
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
        assert!(profile.values().iter().all(|&u| (0.0..=1.0).contains(&u)));
    }

    #[test]
    fn pareto_mean_matches_shape_over_shape_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let profile =
            sample_utilities(&UtilityDistribution::PARETO, 200_000, &mut rng).unwrap();
        let mean = profile.values().iter().sum::<f64>() / profile.len() as f64;
        // Mean 1.5; the variance is 0.75 so 200k draws put the sample mean
        // within about 0.006 at 3 sigma.
        assert!((mean - 1.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn truncated_gaussian_stays_above_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let profile = sample_utilities(&UtilityDistribution::GAUSS, 50_000, &mut rng).unwrap();
        assert!(profile.values().iter().all(|&u| u >= 0.0));
        // Half-normal mean is sqrt(2/pi) = 0.79788.
        let mean = profile.values().iter().sum::<f64>() / profile.len() as f64;
        assert!((mean - 0.79788).abs() < 0.01, "{mean}");
    }

    #[test]
    fn invalid_distribution_parameters_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let bad = UtilityDistribution::Pareto { shape: 0.0 };
        assert!(sample_utilities(&bad, 1, &mut rng).is_err());
        let bad = UtilityDistribution::TruncGaussian { mean: 0.0, std: -1.0, lower: 0.0 };
        assert!(sample_utilities(&bad, 1, &mut rng).is_err());
    }

    #[test]
    fn kendall_tau_frozen_values() {
        assert_eq!(kendall_tau(&[0, 1, 2, 3], &[0, 1, 2, 3]).unwrap(), 0);
        assert_eq!(kendall_tau(&[4, 3, 2, 1, 0], &[0, 1, 2, 3, 4]).unwrap(), 10);
        assert_eq!(kendall_tau(&[0, 2, 1, 3], &[0, 1, 2, 3]).unwrap(), 1);
    }

    #[test]
    fn kendall_tau_rejects_non_permutations() {
        assert!(kendall_tau(&[0, 0], &[0, 1]).is_err());
        assert!(kendall_tau(&[0, 1], &[1, 2]).is_err());
        assert!(kendall_tau(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn kendall_tau_is_a_metric_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        for _ in 0..200 {
            let p = rng.random_range(1..=6usize);
            let perm = |rng: &mut ChaCha8Rng| {
                let mut v: Vec<usize> = (0..p).collect();
                use rand::seq::SliceRandom;
                v.shuffle(rng);
                v
            };
            let (a, b, c) = (perm(&mut rng), perm(&mut rng), perm(&mut rng));
            let dab = kendall_tau(&a, &b).unwrap();
            let dba = kendall_tau(&b, &a).unwrap();
            let dac = kendall_tau(&a, &c).unwrap();
            let dcb = kendall_tau(&c, &b).unwrap();
            assert_eq!(dab, dba);
            assert_eq!(dab == 0, a == b);
            assert!(dab <= dac + dcb);
        }
    }

    #[test]
    fn mallows_phi_one_is_uniform() {
        let model = MallowsModel::new(vec![0, 1, 2], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let draws = 60_000usize;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..draws {
            *counts.entry(model.sample(&mut rng)).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        // Chi-square against uniform over 6 cells, 5 dof; 20.5 is p=0.001.
        let expected = draws as f64 / 6.0;
        let chi2: f64 =
            counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 20.5, "chi2 {chi2}");
    }

    #[test]
    fn mallows_low_phi_concentrates_on_central() {
        let model = MallowsModel::new(vec![2, 0, 1], 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let hits = (0..10_000).filter(|_| model.sample(&mut rng) == vec![2, 0, 1]).count();
        assert!(hits > 9_700, "{hits}");
    }

    #[test]
    fn mallows_probabilities_follow_phi_powers() {
        // For p=3, phi=0.5 count every permutation over many draws and
        // compare each frequency ratio to 0.5^d against the enumeration.
        let phi = 0.5f64;
        let central = vec![0usize, 1, 2];
        let model = MallowsModel::new(central.clone(), phi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(48);
        let draws = 100_000usize;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..draws {
            *counts.entry(model.sample(&mut rng)).or_insert(0usize) += 1;
        }
        let perms =
            [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let z: f64 =
            perms.iter().map(|s| phi.powi(kendall_tau(s, &central).unwrap() as i32)).sum();
        for s in perms {
            let d = kendall_tau(&s, &central).unwrap();
            let want = phi.powi(d as i32) / z;
            let got = *counts.get(s.as_slice()).unwrap_or(&0) as f64 / draws as f64;
            let se = (want * (1.0 - want) / draws as f64).sqrt();
            assert!(
                (got - want).abs() <= 3.0 * se,
                "perm {s:?}: got {got}, want {want}, se {se}"
            );
        }
    }

    #[test]
    fn distance_zero_returns_central_and_max_reverses_it() {
        let mut rng = ChaCha8Rng::seed_from_u64(49);
        let rho = vec![3usize, 1, 0, 2, 4];
        assert_eq!(ranking_at_distance(&rho, 0, &mut rng).unwrap(), rho);
        let reversed: Vec<usize> = rho.iter().rev().copied().collect();
        assert_eq!(ranking_at_distance(&rho, 10, &mut rng).unwrap(), reversed);
    }

    #[test]
    fn sampled_rankings_sit_at_the_requested_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for p in 2..=7usize {
            let rho: Vec<usize> = (0..p).rev().collect();
            for gamma in 0..=(p * (p - 1) / 2) {
                let out = ranking_at_distance(&rho, gamma, &mut rng).unwrap();
                assert_eq!(kendall_tau(&out, &rho).unwrap(), gamma);
            }
        }
    }

    #[test]
    fn out_of_range_distance_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        assert!(ranking_at_distance(&[0, 1, 2], 4, &mut rng).is_err());
    }

    #[test]
    fn distance_sampler_is_uniform_over_small_fibers() {
        // p=4, gamma=2: five permutations lie at distance 2.
        let rho = vec![0usize, 1, 2, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let draws = 50_000usize;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..draws {
            *counts.entry(ranking_at_distance(&rho, 2, &mut rng).unwrap()).or_insert(0usize) +=
                1;
        }
        assert_eq!(counts.len(), 5);
        let expected = draws as f64 / 5.0;
        for (perm, c) in counts {
            assert!(
                (c as f64 - expected).abs() < 5.0 * expected.sqrt(),
                "{perm:?}: {c}"
            );
        }
    }
}
