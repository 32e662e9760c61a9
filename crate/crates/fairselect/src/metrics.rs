//! Outcome metrics: realized utility and two fairness ratios.
//!
//! Each function computes the per-draw value; averaging across draws is the
//! caller's job. Ratios with an all-zero denominator and numerator are
//! defined as 1 (identical zeros carry no disparity).

use serde::Serialize;

use crate::error::Error;
use crate::model::{Assignment, GroupLabels, Instance, LatentProfile};

/// Realized fraction of the best achievable total utility: the latent
/// utilities of the assigned candidates over the sum of the `capacity`
/// largest latent utilities. Latent values are used on both sides even when
/// selection ran on distorted scores.
pub fn utility_ratio(
    assignment: &Assignment,
    latent: &LatentProfile,
    capacity: usize,
) -> Result<f64, Error> {
    let n = latent.len();
    if assignment.len() != n {
        return Err(Error::LengthMismatch(format!(
            "assignment over {} candidates, {n} utilities",
            assignment.len()
        )));
    }
    if capacity > n {
        return Err(Error::InvalidInput(format!(
            "capacity {capacity} exceeds candidate count {n}"
        )));
    }
    let realized: f64 =
        assignment.selected().iter().map(|&i| latent.values()[i]).sum();
    let mut sorted: Vec<f64> = latent.values().to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let best: f64 = sorted[..capacity].iter().sum();
    if best == 0.0 {
        return Ok(if realized == 0.0 { 1.0 } else { realized / best });
    }
    Ok(realized / best)
}

/// Per-group selection rates and their min/max ratio.
#[derive(Debug, Clone, Serialize)]
pub struct RepresentationReport {
    /// Fraction of each group that was assigned anywhere.
    pub rates: Vec<f64>,
    /// min rate / max rate, or 1 when no one was selected.
    pub ratio: f64,
}

pub fn representational_fairness(
    assignment: &Assignment,
    groups: &GroupLabels,
) -> Result<RepresentationReport, Error> {
    if assignment.len() != groups.len() {
        return Err(Error::LengthMismatch(format!(
            "assignment over {} candidates, {} group labels",
            assignment.len(),
            groups.len()
        )));
    }
    if groups.group_count() < 2 {
        return Err(Error::InvalidInput("need at least two groups".into()));
    }
    let sizes = groups.sizes();
    let mut counts = vec![0usize; groups.group_count()];
    for &i in &assignment.selected() {
        counts[groups.labels()[i]] += 1;
    }
    let rates: Vec<f64> =
        counts.iter().zip(sizes).map(|(&c, &s)| c as f64 / s as f64).collect();
    Ok(RepresentationReport { ratio: min_over_max(&rates), rates })
}

/// Per-group fractions assigned within their first `ell` preferences, and
/// the min/max ratio of those fractions.
#[derive(Debug, Clone, Serialize)]
pub struct PreferenceReport {
    /// Fraction of each group assigned one of its top-`ell` institutions.
    pub fractions: Vec<f64>,
    /// min fraction / max fraction, or 1 when every fraction is 0.
    pub ratio: f64,
}

pub fn preference_fairness(
    assignment: &Assignment,
    instance: &Instance,
    groups: &GroupLabels,
    ell: usize,
) -> Result<PreferenceReport, Error> {
    let n = instance.n();
    if assignment.len() != n || groups.len() != n {
        return Err(Error::LengthMismatch(format!(
            "instance of {n} candidates, assignment {}, labels {}",
            assignment.len(),
            groups.len()
        )));
    }
    if groups.group_count() < 2 {
        return Err(Error::InvalidInput("need at least two groups".into()));
    }
    if ell < 1 || ell > instance.p() {
        return Err(Error::InvalidInput(format!(
            "preference depth {ell} outside 1..={}",
            instance.p()
        )));
    }
    let sizes = groups.sizes();
    let mut counts = vec![0usize; groups.group_count()];
    for i in 0..n {
        if let Some(j) = assignment.assigned(i) {
            if instance.preference_rank(i, j) < ell {
                counts[groups.labels()[i]] += 1;
            }
        }
    }
    let fractions: Vec<f64> =
        counts.iter().zip(sizes).map(|(&c, &s)| c as f64 / s as f64).collect();
    Ok(PreferenceReport { ratio: min_over_max(&fractions), fractions })
}

fn min_over_max(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        return 1.0;
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    min / max
}
