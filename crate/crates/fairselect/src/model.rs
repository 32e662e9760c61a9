//! Data model for selection instances, group labels, and assignments, with a
//! stability checker and an exhaustive stable-assignment search usable as a
//! test oracle on small instances.

use crate::error::Error;

/// Upper bounds for [`brute_force_stable`]; enumeration is exponential.
const SEARCH_MAX_N: usize = 8;
const SEARCH_MAX_P: usize = 4;

/// A selection problem: `n` candidates with observed utilities and full
/// preference lists over `p` institutions with fixed capacities.
///
/// Institutions are identified by index `0..p`, candidates by index `0..n`.
/// Preference lists run from most to least preferred. Observed utilities may
/// be negative (additive noise models produce them); latent utilities are
/// non-negative, see [`LatentProfile`].
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    capacities: Vec<usize>,
    observed: Vec<f64>,
    preferences: Vec<Vec<usize>>,
}

impl Instance {
    pub fn new(
        capacities: Vec<usize>,
        observed: Vec<f64>,
        preferences: Vec<Vec<usize>>,
    ) -> Result<Self, Error> {
        if capacities.is_empty() {
            return Err(Error::InvalidInput("at least one institution required".into()));
        }
        if observed.len() != preferences.len() {
            return Err(Error::LengthMismatch(format!(
                "{} observed utilities vs {} preference lists",
                observed.len(),
                preferences.len()
            )));
        }
        if let Some(u) = observed.iter().find(|u| !u.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite observed utility {u}")));
        }
        let p = capacities.len();
        for (i, pref) in preferences.iter().enumerate() {
            if !is_permutation(pref, p) {
                return Err(Error::InvalidInput(format!(
                    "preference list of candidate {i} is not a permutation of 0..{p}"
                )));
            }
        }
        Ok(Self { capacities, observed, preferences })
    }

    pub fn n(&self) -> usize {
        self.observed.len()
    }

    pub fn p(&self) -> usize {
        self.capacities.len()
    }

    /// Total capacity K over all institutions.
    pub fn total_capacity(&self) -> usize {
        self.capacities.iter().sum()
    }

    pub fn capacities(&self) -> &[usize] {
        &self.capacities
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn preferences(&self) -> &[Vec<usize>] {
        &self.preferences
    }

    /// Position of `institution` in candidate `i`'s list (0 = top choice).
    pub fn preference_rank(&self, i: usize, institution: usize) -> usize {
        self.preferences[i]
            .iter()
            .position(|&j| j == institution)
            .expect("preference lists are permutations over all institutions")
    }

    /// Candidate indices ordered by decreasing observed utility, ties broken
    /// by ascending index. This is the processing order shared by all
    /// assignment algorithms in this crate.
    pub fn utility_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n()).collect();
        order.sort_unstable_by(|&a, &b| {
            self.observed[b].total_cmp(&self.observed[a]).then(a.cmp(&b))
        });
        order
    }

    /// Copy of the instance with one preference list replaced.
    pub fn with_preferences(&self, i: usize, list: Vec<usize>) -> Result<Self, Error> {
        let mut preferences = self.preferences.clone();
        if i >= preferences.len() {
            return Err(Error::InvalidInput(format!("candidate {i} out of range")));
        }
        preferences[i] = list;
        Self::new(self.capacities.clone(), self.observed.clone(), preferences)
    }

    /// Copy of the instance with one institution's capacity replaced.
    pub fn with_capacity(&self, institution: usize, capacity: usize) -> Result<Self, Error> {
        let mut capacities = self.capacities.clone();
        if institution >= capacities.len() {
            return Err(Error::InvalidInput(format!("institution {institution} out of range")));
        }
        capacities[institution] = capacity;
        Self::new(capacities, self.observed.clone(), self.preferences.clone())
    }
}

fn is_permutation(list: &[usize], p: usize) -> bool {
    if list.len() != p {
        return false;
    }
    let mut seen = vec![false; p];
    for &j in list {
        if j >= p || seen[j] {
            return false;
        }
        seen[j] = true;
    }
    true
}

/// True (latent) utilities, used only by the utility-ratio metric; the
/// assignment algorithms never see them.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentProfile {
    values: Vec<f64>,
}

impl LatentProfile {
    pub fn new(values: Vec<f64>) -> Result<Self, Error> {
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!("latent utility {v} is not finite and >= 0")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-candidate group membership. Group ids are contiguous `0..g` and every
/// id occurs at least once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupLabels {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl GroupLabels {
    pub fn new(labels: Vec<usize>) -> Result<Self, Error> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("empty group labels".into()));
        }
        let g = labels.iter().max().copied().unwrap_or(0) + 1;
        let mut sizes = vec![0usize; g];
        for &l in &labels {
            sizes[l] += 1;
        }
        if let Some(id) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidInput(format!("group id {id} has no members")));
        }
        Ok(Self { labels, sizes })
    }

    /// First `n1` candidates in group 0, the next `n2` in group 1.
    pub fn two_groups(n1: usize, n2: usize) -> Result<Self, Error> {
        let mut labels = vec![0usize; n1];
        labels.extend(std::iter::repeat(1).take(n2));
        Self::new(labels)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn group_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn members(&self, group: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == group).collect()
    }
}

/// A partial assignment of candidates to institutions; `None` marks an
/// unassigned candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    slots: Vec<Option<usize>>,
}

impl Assignment {
    pub fn new(slots: Vec<Option<usize>>) -> Self {
        Self { slots }
    }

    pub fn slots(&self) -> &[Option<usize>] {
        &self.slots
    }

    pub fn assigned(&self, i: usize) -> Option<usize> {
        self.slots[i]
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn assigned_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    /// Indices of assigned candidates, ascending.
    pub fn selected(&self) -> Vec<usize> {
        (0..self.slots.len()).filter(|&i| self.slots[i].is_some()).collect()
    }

    pub fn institution_counts(&self, p: usize) -> Vec<usize> {
        let mut counts = vec![0usize; p];
        for slot in self.slots.iter().flatten() {
            counts[*slot] += 1;
        }
        counts
    }

    pub fn members_of(&self, institution: usize) -> Vec<usize> {
        (0..self.slots.len()).filter(|&i| self.slots[i] == Some(institution)).collect()
    }

    /// Number of candidates whose slot differs between the two assignments.
    pub fn diff_count(&self, other: &Assignment) -> usize {
        assert_eq!(self.slots.len(), other.slots.len());
        self.slots.iter().zip(&other.slots).filter(|(a, b)| a != b).count()
    }
}

/// Checks that no candidate-institution pair blocks `assignment`: a pair
/// (i, j) blocks when i strictly prefers j to its current slot (unassigned
/// ranks below every institution) and j has either a vacant slot or an
/// assigned candidate with strictly lower observed utility than i's.
pub fn verify_stable(instance: &Instance, assignment: &Assignment) -> Result<bool, Error> {
    let n = instance.n();
    let p = instance.p();
    if assignment.len() != n {
        return Err(Error::LengthMismatch(format!(
            "assignment covers {} candidates, instance has {n}",
            assignment.len()
        )));
    }
    if let Some(j) = assignment.slots().iter().flatten().find(|&&j| j >= p) {
        return Err(Error::InvalidInput(format!("assignment names institution {j}, p={p}")));
    }
    let counts = assignment.institution_counts(p);
    for (j, (&c, &k)) in counts.iter().zip(instance.capacities()).enumerate() {
        if c > k {
            return Err(Error::InvalidInput(format!(
                "institution {j} holds {c} candidates, capacity {k}"
            )));
        }
    }

    let mut min_assigned = vec![f64::INFINITY; p];
    for (i, slot) in assignment.slots().iter().enumerate() {
        if let Some(j) = slot {
            min_assigned[*j] = min_assigned[*j].min(instance.observed()[i]);
        }
    }

    for i in 0..n {
        let held_rank = match assignment.assigned(i) {
            Some(j) => instance.preference_rank(i, j),
            None => p,
        };
        for &j in &instance.preferences()[i][..held_rank] {
            if counts[j] < instance.capacities()[j] {
                return Ok(false);
            }
            if min_assigned[j] < instance.observed()[i] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Enumerates every capacity-respecting assignment of exactly `min(n, K)`
/// candidates and returns the stable ones. With distinct observed utilities
/// the result has exactly one element. Limited to n <= 8, p <= 4.
pub fn brute_force_stable(instance: &Instance) -> Result<Vec<Assignment>, Error> {
    let n = instance.n();
    let p = instance.p();
    if n > SEARCH_MAX_N || p > SEARCH_MAX_P {
        return Err(Error::SearchScale { n, p });
    }
    let target = n.min(instance.total_capacity());
    let mut slots: Vec<Option<usize>> = vec![None; n];
    let mut counts = vec![0usize; p];
    let mut found = Vec::new();
    enumerate(instance, target, 0, 0, &mut slots, &mut counts, &mut found)?;
    Ok(found)
}

fn enumerate(
    instance: &Instance,
    target: usize,
    i: usize,
    assigned: usize,
    slots: &mut Vec<Option<usize>>,
    counts: &mut Vec<usize>,
    found: &mut Vec<Assignment>,
) -> Result<(), Error> {
    let n = instance.n();
    if assigned + (n - i) < target {
        return Ok(());
    }
    if i == n {
        if assigned == target {
            let candidate = Assignment::new(slots.clone());
            if verify_stable(instance, &candidate)? {
                found.push(candidate);
            }
        }
        return Ok(());
    }
    slots[i] = None;
    enumerate(instance, target, i + 1, assigned, slots, counts, found)?;
    if assigned < target {
        for j in 0..instance.p() {
            if counts[j] < instance.capacities()[j] {
                slots[i] = Some(j);
                counts[j] += 1;
                enumerate(instance, target, i + 1, assigned + 1, slots, counts, found)?;
                counts[j] -= 1;
            }
        }
    }
    slots[i] = None;
    Ok(())
}
