//! Closed-form predictions for unconstrained selection of two groups with
//! uniform latent utilities, plus the log-concave upper bound. Acceptance
//! tests compare simulation output against these values.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Parameters of the two-group selection problem the predictions cover.
/// `eta1`, `eta2`, `eta3` are the constant fractions the finite-sample error
/// terms assume; they are carried for reporting and do not move the point
/// predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub n1: usize,
    pub n2: usize,
    pub capacity: usize,
    pub beta: f64,
    #[serde(default)]
    pub eta1: Option<f64>,
    #[serde(default)]
    pub eta2: Option<f64>,
    #[serde(default)]
    pub eta3: Option<f64>,
}

impl TheoryParams {
    pub fn new(n1: usize, n2: usize, capacity: usize, beta: f64) -> Result<Self, Error> {
        let params =
            TheoryParams { n1, n2, capacity, beta, eta1: None, eta2: None, eta3: None };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.n1 + self.n2 < self.capacity {
            return Err(Error::Config(format!(
                "capacity {} exceeds population {}",
                self.capacity,
                self.n1 + self.n2
            )));
        }
        if !self.beta.is_finite() || self.beta <= 0.0 || self.beta > 1.0 {
            return Err(Error::Config(format!("bias factor {} outside (0, 1]", self.beta)));
        }
        Ok(())
    }
}

/// Expected sum of the largest `x` of `y` independent uniform-[0,1] draws:
/// x - x(x+1)/(2(y+1)). The k-th largest has mean (y+1-k)/(y+1); summing k
/// from 1 to x gives the closed form. `x` may be fractional (the predictions
/// feed expected counts through it).
pub fn f_order_stat(x: f64, y: f64) -> Result<f64, Error> {
    if !x.is_finite() || !y.is_finite() || x < 0.0 || x > y {
        return Err(Error::InvalidInput(format!(
            "order-statistic sum needs 0 <= x <= y, got x={x}, y={y}"
        )));
    }
    Ok(x - x * (x + 1.0) / (2.0 * (y + 1.0)))
}

/// Expected number of selected candidates from each group when the top
/// `capacity` observed scores win and group 2's scores are scaled by beta.
pub fn predicted_alphas(params: &TheoryParams) -> Result<(f64, f64), Error> {
    params.validate()?;
    let (n1, n2) = (params.n1 as f64, params.n2 as f64);
    let k = params.capacity as f64;
    let beta = params.beta;
    let alpha1 =
        k - n2 / (beta * n1 + n2) * (k - (1.0 - beta) * n1).max(0.0);
    Ok((alpha1, k - alpha1))
}

/// Predicted metrics for unconstrained selection under uniform utilities.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct UniformPrediction {
    /// Selection-rate ratio of the disfavored group to the favored one.
    pub representation: f64,
    /// Realized share of the best achievable total utility.
    pub utility: f64,
    /// Upper bound on the first-choice fairness ratio (equals
    /// `representation`).
    pub preference_upper: f64,
}

pub fn predicted_metrics_uniform(params: &TheoryParams) -> Result<UniformPrediction, Error> {
    params.validate()?;
    let (n1, n2) = (params.n1 as f64, params.n2 as f64);
    let k = params.capacity as f64;
    let beta = params.beta;
    let representation =
        ((k - n1 * (1.0 - beta)) / (k * beta + n2 * (1.0 - beta))).max(0.0);
    let (alpha1, alpha2) = predicted_alphas(params)?;
    let utility = (f_order_stat(alpha1.min(n1), n1)? + f_order_stat(alpha2.min(n2), n2)?)
        / f_order_stat(k, n1 + n2)?;
    Ok(UniformPrediction { representation, utility, preference_upper: representation })
}

/// Large-n limit of [`predicted_metrics_uniform`] for n1 = n2 = capacity:
/// representation beta, utility 2/3 + 4 beta / (3 (beta+1)^2).
pub fn equal_groups_limit(beta: f64) -> Result<(f64, f64), Error> {
    if !beta.is_finite() || beta <= 0.0 || beta > 1.0 {
        return Err(Error::Config(format!("bias factor {beta} outside (0, 1]")));
    }
    Ok((beta, 2.0 / 3.0 + 4.0 * beta / (3.0 * (beta + 1.0).powi(2))))
}

/// Upper bound min(1, 2 beta ln(1/beta)) on the representation and
/// first-choice ratios for any log-concave utility density. Vacuous (0) at
/// beta = 1; the derivation assumes beta ln(1/beta) <= 1/2.
pub fn logconcave_bound(beta: f64) -> Result<f64, Error> {
    if !beta.is_finite() || beta <= 0.0 || beta > 1.0 {
        return Err(Error::InvalidInput(format!("bias factor {beta} outside (0, 1]")));
    }
    Ok((2.0 * beta * (1.0 / beta).ln()).min(1.0))
}

/// Half-width c sqrt(ln n / n) of the finite-sample band around the
/// predictions, with the constant c = 8 the concentration events use.
/// Display only; tests pin fixed tolerances instead.
pub fn uncertainty_band(n: usize) -> f64 {
    if n < 2 {
        return f64::INFINITY;
    }
    let n = n as f64;
    8.0 * (n.ln() / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn order_stat_sum_closed_form_values() {
        assert_eq!(f_order_stat(0.0, 10.0).unwrap(), 0.0);
        assert_eq!(f_order_stat(1.0, 1.0).unwrap(), 0.5);
        assert!(f_order_stat(2.0, 1.0).is_err());
        assert!(f_order_stat(-1.0, 1.0).is_err());
    }

    #[test]
    fn order_stat_sum_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let trials = 10_000;
        let (x, y) = (100usize, 1000usize);
        let mut total = 0.0;
        let mut squares = 0.0;
        for _ in 0..trials {
            let mut draws: Vec<f64> = (0..y).map(|_| rng.random::<f64>()).collect();
            draws.sort_by(|a, b| b.total_cmp(a));
            let s: f64 = draws[..x].iter().sum();
            total += s;
            squares += s * s;
        }
        let mean = total / trials as f64;
        let var = (squares - total * total / trials as f64) / (trials as f64 - 1.0);
        let se = (var / trials as f64).sqrt();
        let predicted = f_order_stat(x as f64, y as f64).unwrap();
        assert!(
            (mean - predicted).abs() <= 3.0 * se,
            "mean {mean}, predicted {predicted}, se {se}"
        );
    }

    #[test]
    fn group_counts_split_capacity() {
        let params = TheoryParams::new(1000, 1000, 1000, 0.5).unwrap();
        let (a1, a2) = predicted_alphas(&params).unwrap();
        assert!((a1 - 2000.0 / 3.0).abs() < 1e-9);
        assert!((a2 - 1000.0 / 3.0).abs() < 1e-9);
        assert!((a1 + a2 - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn unbiased_counts_are_proportional() {
        let params = TheoryParams::new(600, 400, 500, 1.0).unwrap();
        let (a1, a2) = predicted_alphas(&params).unwrap();
        assert!((a1 - 300.0).abs() < 1e-9);
        assert!((a2 - 200.0).abs() < 1e-9);
    }

    #[test]
    fn severe_bias_shuts_out_the_second_group() {
        // capacity <= (1-beta) n1 means group 1 alone fills every slot.
        let params = TheoryParams::new(1000, 1000, 100, 0.5).unwrap();
        let (a1, a2) = predicted_alphas(&params).unwrap();
        assert_eq!(a1, 100.0);
        assert_eq!(a2, 0.0);
        let pred = predicted_metrics_uniform(&params).unwrap();
        assert_eq!(pred.representation, 0.0);
    }

    #[test]
    fn equal_groups_predictions_match_the_limit_formula() {
        for beta in [0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
            let params = TheoryParams::new(100_000, 100_000, 100_000, beta).unwrap();
            let pred = predicted_metrics_uniform(&params).unwrap();
            let (r_limit, u_limit) = equal_groups_limit(beta).unwrap();
            assert!((pred.representation - r_limit).abs() < 1e-9, "beta {beta}");
            // Finite-size correction is O(1/n).
            assert!((pred.utility - u_limit).abs() < 1e-4, "beta {beta}");
            assert_eq!(pred.preference_upper, pred.representation);
        }
    }

    #[test]
    fn half_bias_utility_is_just_below_26_27ths() {
        let (r, u) = equal_groups_limit(0.5).unwrap();
        assert_eq!(r, 0.5);
        assert!((u - 26.0 / 27.0).abs() < 1e-12);
        let params = TheoryParams::new(1000, 1000, 1000, 0.5).unwrap();
        let pred = predicted_metrics_uniform(&params).unwrap();
        assert!((pred.utility - u).abs() < 1e-3);
        assert!(pred.utility < u);
    }

    #[test]
    fn no_bias_is_perfectly_fair_and_efficient() {
        let params = TheoryParams::new(500, 500, 500, 1.0).unwrap();
        let pred = predicted_metrics_uniform(&params).unwrap();
        assert_eq!(pred.representation, 1.0);
        // Unit utility holds in the limit; the finite-n value sits a hair
        // below because the split halves lose slightly more order-statistic
        // mass than the pooled top K.
        assert!(pred.utility <= 1.0 && pred.utility > 0.999, "{}", pred.utility);
    }

    #[test]
    fn predictions_increase_with_beta() {
        let mut last = (0.0, 0.0);
        for i in 1..=20 {
            let beta = i as f64 / 20.0;
            let params = TheoryParams::new(2000, 2000, 2000, beta).unwrap();
            let pred = predicted_metrics_uniform(&params).unwrap();
            assert!(pred.representation >= last.0 && pred.utility >= last.1, "beta {beta}");
            assert!(pred.utility > 0.0 && pred.utility <= 1.0);
            last = (pred.representation, pred.utility);
        }
    }

    #[test]
    fn logconcave_bound_frozen_values() {
        assert!((logconcave_bound(1.0 / std::f64::consts::E).unwrap()
            - 2.0 / std::f64::consts::E)
            .abs()
            < 1e-12);
        assert!((logconcave_bound(0.1).unwrap() - 0.46051).abs() < 1e-4);
        assert_eq!(logconcave_bound(1.0).unwrap(), 0.0);
        assert!(logconcave_bound(0.0).is_err());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(TheoryParams::new(10, 10, 30, 0.5).is_err());
        assert!(TheoryParams::new(10, 10, 10, 0.0).is_err());
        assert!(TheoryParams::new(10, 10, 10, 1.5).is_err());
    }

    #[test]
    fn band_shrinks_with_n() {
        assert!(uncertainty_band(100) > uncertainty_band(10_000));
        assert!(uncertainty_band(10_000) > 0.0);
    }
}
