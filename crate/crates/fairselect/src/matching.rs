//! Assignment algorithms: unconstrained serial dictatorship plus the
//! group-wise, institution-wise, and relaxed constrained variants.
//!
//! All five process candidates in decreasing observed utility (ties by
//! index) and are deterministic; they differ only in which candidates may
//! occupy which slots.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{Assignment, GroupLabels, Instance};

/// Which constraint set to impose on the assignment. `alpha` interpolates
/// between no constraint (0) and the strict quota (1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintPolicy {
    Unconstrained,
    /// Serialized as `group`, matching the label in result output.
    #[serde(rename = "group")]
    GroupWise,
    InstitutionWise,
    RelaxedGroup { alpha: f64 },
    RelaxedInstitution { alpha: f64 },
}

impl ConstraintPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            ConstraintPolicy::Unconstrained => "unconstrained",
            ConstraintPolicy::GroupWise => "group",
            ConstraintPolicy::InstitutionWise => "institution_wise",
            ConstraintPolicy::RelaxedGroup { .. } => "relaxed_group",
            ConstraintPolicy::RelaxedInstitution { .. } => "relaxed_institution",
        }
    }

    pub fn needs_groups(&self) -> bool {
        !matches!(self, ConstraintPolicy::Unconstrained)
    }
}

/// Runs the policy's algorithm. Groups may be omitted only for
/// [`ConstraintPolicy::Unconstrained`].
pub fn assign(
    instance: &Instance,
    groups: Option<&GroupLabels>,
    policy: ConstraintPolicy,
) -> Result<Assignment, Error> {
    if let ConstraintPolicy::Unconstrained = policy {
        return Ok(serial_dictatorship(instance));
    }
    let groups = groups.ok_or_else(|| {
        Error::InvalidInput(format!("{} requires group labels", policy.name()))
    })?;
    match policy {
        ConstraintPolicy::Unconstrained => unreachable!(),
        ConstraintPolicy::GroupWise => group_constrained(instance, groups),
        ConstraintPolicy::InstitutionWise => institution_wise(instance, groups),
        ConstraintPolicy::RelaxedGroup { alpha } => relaxed_group(instance, groups, alpha),
        ConstraintPolicy::RelaxedInstitution { alpha } => {
            relaxed_institution(instance, groups, alpha)
        }
    }
}

/// Serial dictatorship: in decreasing observed utility, each candidate takes
/// the most preferred institution with a vacant slot. With distinct
/// utilities this is the unique stable assignment.
pub fn serial_dictatorship(instance: &Instance) -> Assignment {
    serial_dictatorship_among(instance, instance.utility_order())
}

/// Serial dictatorship restricted to `order` (already sorted by decreasing
/// observed utility); everyone else stays unassigned.
fn serial_dictatorship_among(instance: &Instance, order: Vec<usize>) -> Assignment {
    let mut remaining = instance.capacities().to_vec();
    let mut slots = vec![None; instance.n()];
    for i in order {
        for &j in &instance.preferences()[i] {
            if remaining[j] > 0 {
                remaining[j] -= 1;
                slots[i] = Some(j);
                break;
            }
        }
    }
    Assignment::new(slots)
}

/// Splits an integer-or-fractional `total` across groups in proportion to
/// their sizes: floor each share, then hand the remaining slots out in
/// decreasing fractional-remainder order, ties to the smaller group id. The
/// result sums to floor(total) exactly.
pub fn quota(total: f64, group_sizes: &[usize]) -> Vec<usize> {
    let n: usize = group_sizes.iter().sum();
    if n == 0 {
        return vec![0; group_sizes.len()];
    }
    let shares: Vec<f64> =
        group_sizes.iter().map(|&s| total * s as f64 / n as f64).collect();
    let mut out: Vec<usize> = shares.iter().map(|&s| floor_eps(s)).collect();
    let mut leftover = floor_eps(total).saturating_sub(out.iter().sum::<usize>());
    let mut by_remainder: Vec<usize> = (0..group_sizes.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = shares[a] - out[a] as f64;
        let rb = shares[b] - out[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for g in by_remainder {
        if leftover == 0 {
            break;
        }
        out[g] += 1;
        leftover -= 1;
    }
    out
}

/// Floor guarded against values sitting a rounding error below an integer,
/// e.g. 0.29 * 100 = 28.999999999999996.
fn floor_eps(x: f64) -> usize {
    (x + 1e-9).floor() as usize
}

fn group_sorted_by_utility(instance: &Instance, groups: &GroupLabels, g: usize) -> Vec<usize> {
    let mut members = groups.members(g);
    members.sort_unstable_by(|&a, &b| {
        instance.observed()[b].total_cmp(&instance.observed()[a]).then(a.cmp(&b))
    });
    members
}

fn check_groups(instance: &Instance, groups: &GroupLabels) -> Result<(), Error> {
    if groups.len() != instance.n() {
        return Err(Error::LengthMismatch(format!(
            "{} group labels vs {} candidates",
            groups.len(),
            instance.n()
        )));
    }
    if groups.group_count() < 2 {
        return Err(Error::InvalidInput("constrained algorithms need at least 2 groups".into()));
    }
    Ok(())
}

/// Group-wise constraints: keep the top `quota(K)` candidates of each group
/// by observed utility, then run serial dictatorship on their union with the
/// original capacities.
pub fn group_constrained(instance: &Instance, groups: &GroupLabels) -> Result<Assignment, Error> {
    check_groups(instance, groups)?;
    let quotas = quota(instance.total_capacity() as f64, groups.sizes());
    let mut keep: Vec<usize> = Vec::with_capacity(instance.total_capacity());
    for (g, &m) in quotas.iter().enumerate() {
        let members = group_sorted_by_utility(instance, groups, g);
        if members.len() < m {
            return Err(Error::Infeasible(format!(
                "group {g} has {} members but a selection quota of {m}",
                members.len()
            )));
        }
        keep.extend(&members[..m]);
    }
    keep.sort_unstable_by(|&a, &b| {
        instance.observed()[b].total_cmp(&instance.observed()[a]).then(a.cmp(&b))
    });
    Ok(serial_dictatorship_among(instance, keep))
}

/// Institution-wise constraints: each institution's capacity is split across
/// groups in proportion to group size, and serial dictatorship runs on each
/// group's sub-instance independently. The output never depends on
/// between-group utility comparisons.
pub fn institution_wise(instance: &Instance, groups: &GroupLabels) -> Result<Assignment, Error> {
    check_groups(instance, groups)?;
    let per_institution: Vec<Vec<usize>> = instance
        .capacities()
        .iter()
        .map(|&k| quota(k as f64, groups.sizes()))
        .collect();
    let mut slots = vec![None; instance.n()];
    for g in 0..groups.group_count() {
        let mut remaining: Vec<usize> = per_institution.iter().map(|split| split[g]).collect();
        for i in group_sorted_by_utility(instance, groups, g) {
            for &j in &instance.preferences()[i] {
                if remaining[j] > 0 {
                    remaining[j] -= 1;
                    slots[i] = Some(j);
                    break;
                }
            }
        }
    }
    Ok(Assignment::new(slots))
}

fn check_alpha(alpha: f64) -> Result<(), Error> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(())
}

/// Relaxed group-wise constraints: a fraction `alpha` of the total capacity
/// is reserved per group (proportionally to group size); the rest is an open
/// pool. Candidates are processed in decreasing observed utility; one is
/// selected while its group reserve or the open pool has room, charging the
/// reserve first, and takes its most preferred institution with a vacant
/// slot. alpha = 0 reduces to the unconstrained algorithm, alpha = 1 to the
/// group-wise one.
pub fn relaxed_group(
    instance: &Instance,
    groups: &GroupLabels,
    alpha: f64,
) -> Result<Assignment, Error> {
    check_groups(instance, groups)?;
    check_alpha(alpha)?;
    let k_total = instance.total_capacity();
    let mut reserve = quota(alpha * k_total as f64, groups.sizes());
    let mut open = k_total - reserve.iter().sum::<usize>();
    let mut remaining = instance.capacities().to_vec();
    let mut slots = vec![None; instance.n()];
    for i in instance.utility_order() {
        let g = groups.labels()[i];
        if reserve[g] > 0 {
            reserve[g] -= 1;
        } else if open > 0 {
            open -= 1;
        } else {
            continue;
        }
        for &j in &instance.preferences()[i] {
            if remaining[j] > 0 {
                remaining[j] -= 1;
                slots[i] = Some(j);
                break;
            }
        }
    }
    Ok(Assignment::new(slots))
}

/// Relaxed institution-wise constraints: per institution, a fraction `alpha`
/// of its capacity is reserved per group and the rest is an open pool local
/// to that institution. Candidates are processed in decreasing observed
/// utility and take their most preferred institution where either their
/// group's reserve or the open pool has room (reserve charged first);
/// institutions with neither are skipped and the list is walked further.
/// alpha = 0 reduces to the unconstrained algorithm, alpha = 1 to the
/// institution-wise one.
pub fn relaxed_institution(
    instance: &Instance,
    groups: &GroupLabels,
    alpha: f64,
) -> Result<Assignment, Error> {
    check_groups(instance, groups)?;
    check_alpha(alpha)?;
    let mut reserve: Vec<Vec<usize>> = instance
        .capacities()
        .iter()
        .map(|&k| quota(alpha * k as f64, groups.sizes()))
        .collect();
    let mut open: Vec<usize> = instance
        .capacities()
        .iter()
        .zip(&reserve)
        .map(|(&k, split)| k - split.iter().sum::<usize>())
        .collect();
    let mut slots = vec![None; instance.n()];
    for i in instance.utility_order() {
        let g = groups.labels()[i];
        for &j in &instance.preferences()[i] {
            if reserve[j][g] > 0 {
                reserve[j][g] -= 1;
            } else if open[j] > 0 {
                open[j] -= 1;
            } else {
                continue;
            }
            slots[i] = Some(j);
            break;
        }
    }
    Ok(Assignment::new(slots))
}
