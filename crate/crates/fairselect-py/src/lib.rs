//! Python bindings for the fairselect library: build instances, run the
//! assignment algorithms, and score the outcome with the fairness metrics.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fairselect::bias::BiasModel;
use fairselect::matching::{self, ConstraintPolicy};
use fairselect::metrics;
use fairselect::model;
use fairselect::sampling::{self, MallowsModel, UtilityDistribution};
use fairselect::theory;
use fairselect::{Error, LatentProfile};

fn pyerr(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Csv(_) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// A selection instance: institution capacities, observed scores, and each
/// candidate's preference list over institutions.
#[pyclass(frozen, skip_from_py_object)]
struct Instance {
    inner: model::Instance,
}

#[pymethods]
impl Instance {
    #[new]
    fn new(
        capacities: Vec<usize>,
        observed: Vec<f64>,
        preferences: Vec<Vec<usize>>,
    ) -> PyResult<Self> {
        Ok(Instance {
            inner: model::Instance::new(capacities, observed, preferences).map_err(pyerr)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn total_capacity(&self) -> usize {
        self.inner.total_capacity()
    }

    #[getter]
    fn capacities(&self) -> Vec<usize> {
        self.inner.capacities().to_vec()
    }

    #[getter]
    fn observed(&self) -> Vec<f64> {
        self.inner.observed().to_vec()
    }

    #[getter]
    fn preferences(&self) -> Vec<Vec<usize>> {
        self.inner.preferences().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Instance(n={}, p={})", self.inner.n(), self.inner.p())
    }
}

/// Group membership labels, one dense index per candidate.
#[pyclass(frozen, skip_from_py_object)]
struct GroupLabels {
    inner: model::GroupLabels,
}

#[pymethods]
impl GroupLabels {
    #[new]
    fn new(labels: Vec<usize>) -> PyResult<Self> {
        Ok(GroupLabels { inner: model::GroupLabels::new(labels).map_err(pyerr)? })
    }

    #[staticmethod]
    fn two_groups(n1: usize, n2: usize) -> PyResult<Self> {
        Ok(GroupLabels { inner: model::GroupLabels::two_groups(n1, n2).map_err(pyerr)? })
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.labels().to_vec()
    }

    #[getter]
    fn group_count(&self) -> usize {
        self.inner.group_count()
    }

    #[getter]
    fn sizes(&self) -> Vec<usize> {
        self.inner.sizes().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "GroupLabels(n={}, groups={})",
            self.inner.len(),
            self.inner.group_count()
        )
    }
}

/// Result of an assignment algorithm: per candidate, the institution index
/// or None.
#[pyclass(frozen, skip_from_py_object)]
struct Assignment {
    inner: model::Assignment,
}

#[pymethods]
impl Assignment {
    #[new]
    fn new(slots: Vec<Option<usize>>) -> Self {
        Assignment { inner: model::Assignment::new(slots) }
    }

    #[getter]
    fn slots(&self) -> Vec<Option<usize>> {
        self.inner.slots().to_vec()
    }

    #[getter]
    fn assigned_count(&self) -> usize {
        self.inner.assigned_count()
    }

    fn selected(&self) -> Vec<usize> {
        self.inner.selected()
    }

    fn members_of(&self, institution: usize) -> Vec<usize> {
        self.inner.members_of(institution)
    }

    fn diff_count(&self, other: &Assignment) -> usize {
        self.inner.diff_count(&other.inner)
    }

    fn __eq__(&self, other: &Assignment) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Assignment(assigned={}/{})",
            self.inner.assigned_count(),
            self.inner.len()
        )
    }
}

fn parse_policy(policy: &str, alpha: Option<f64>) -> PyResult<ConstraintPolicy> {
    let needs_alpha = || {
        alpha.ok_or_else(|| {
            PyValueError::new_err(format!("policy {policy} needs the alpha argument"))
        })
    };
    match policy {
        "unconstrained" => Ok(ConstraintPolicy::Unconstrained),
        "group" => Ok(ConstraintPolicy::GroupWise),
        "institution_wise" => Ok(ConstraintPolicy::InstitutionWise),
        "relaxed_group" => Ok(ConstraintPolicy::RelaxedGroup { alpha: needs_alpha()? }),
        "relaxed_institution" => {
            Ok(ConstraintPolicy::RelaxedInstitution { alpha: needs_alpha()? })
        }
        other => Err(PyValueError::new_err(format!(
            "unknown policy `{other}`; expected unconstrained, group, \
             institution_wise, relaxed_group, or relaxed_institution"
        ))),
    }
}

/// Run one assignment algorithm. `policy` is one of "unconstrained",
/// "group", "institution_wise", "relaxed_group", "relaxed_institution"; the
/// relaxed policies take `alpha` in [0, 1].
#[pyfunction]
#[pyo3(signature = (instance, policy, groups=None, alpha=None))]
fn assign(
    instance: &Instance,
    policy: &str,
    groups: Option<&GroupLabels>,
    alpha: Option<f64>,
) -> PyResult<Assignment> {
    let policy = parse_policy(policy, alpha)?;
    let inner = matching::assign(&instance.inner, groups.map(|g| &g.inner), policy)
        .map_err(pyerr)?;
    Ok(Assignment { inner })
}

/// True iff no candidate-institution pair blocks the assignment.
#[pyfunction]
fn verify_stable(instance: &Instance, assignment: &Assignment) -> PyResult<bool> {
    model::verify_stable(&instance.inner, &assignment.inner).map_err(pyerr)
}

/// All stable assignments of a small instance (n <= 8, p <= 4) by
/// exhaustive enumeration.
#[pyfunction]
fn brute_force_stable(instance: &Instance) -> PyResult<Vec<Assignment>> {
    Ok(model::brute_force_stable(&instance.inner)
        .map_err(pyerr)?
        .into_iter()
        .map(|inner| Assignment { inner })
        .collect())
}

/// Realized over optimal total latent utility for the `capacity` best
/// candidates.
#[pyfunction]
fn utility_ratio(
    assignment: &Assignment,
    latent: Vec<f64>,
    capacity: usize,
) -> PyResult<f64> {
    let latent = LatentProfile::new(latent).map_err(pyerr)?;
    metrics::utility_ratio(&assignment.inner, &latent, capacity).map_err(pyerr)
}

/// Per-group selection rates and their min/max ratio.
#[pyfunction]
fn representational_fairness(
    assignment: &Assignment,
    groups: &GroupLabels,
) -> PyResult<(Vec<f64>, f64)> {
    let report =
        metrics::representational_fairness(&assignment.inner, &groups.inner).map_err(pyerr)?;
    Ok((report.rates, report.ratio))
}

/// Per-group top-`ell` assignment fractions and their min/max ratio.
#[pyfunction]
fn preference_fairness(
    assignment: &Assignment,
    instance: &Instance,
    groups: &GroupLabels,
    ell: usize,
) -> PyResult<(Vec<f64>, f64)> {
    let report =
        metrics::preference_fairness(&assignment.inner, &instance.inner, &groups.inner, ell)
            .map_err(pyerr)?;
    Ok((report.fractions, report.ratio))
}

/// Proportional split of `total` slots across groups of the given sizes.
#[pyfunction]
fn quota(total: f64, group_sizes: Vec<usize>) -> Vec<usize> {
    matching::quota(total, &group_sizes)
}

fn distribution_from_name(name: &str) -> PyResult<UtilityDistribution> {
    match name {
        "uniform" => Ok(UtilityDistribution::Uniform01),
        "gaussian" => Ok(UtilityDistribution::GAUSS),
        "pareto" => Ok(UtilityDistribution::PARETO),
        other => Err(PyValueError::new_err(format!(
            "unknown distribution `{other}`; expected uniform, gaussian, or pareto"
        ))),
    }
}

/// `n` latent utilities from "uniform", "gaussian" (truncated at 0), or
/// "pareto" (shape 3).
#[pyfunction]
fn sample_utilities(distribution: &str, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    let dist = distribution_from_name(distribution)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sampling::sample_utilities(&dist, n, &mut rng)
        .map_err(pyerr)?
        .values()
        .to_vec())
}

/// Observed scores under a bias model: "multiplicative" scales group != 0
/// by `value`; "noisy_multiplicative" draws the factor per candidate around
/// `value` (std 0.1); "additive" adds `value` times standard Gaussian noise.
#[pyfunction]
fn apply_bias(
    latent: Vec<f64>,
    groups: &GroupLabels,
    model: &str,
    value: f64,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let model = match model {
        "multiplicative" => BiasModel::Multiplicative { beta: value },
        "noisy_multiplicative" => BiasModel::NoisyMultiplicative { beta: value, std: 0.1 },
        "additive" => BiasModel::AdditiveNoise { delta: value },
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown bias model `{other}`; expected multiplicative, \
                 noisy_multiplicative, or additive"
            )))
        }
    };
    let latent = LatentProfile::new(latent).map_err(pyerr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fairselect::bias::apply_bias(&latent, &groups.inner, &model, &mut rng).map_err(pyerr)
}

/// One ranking drawn from the Mallows distribution around `central`.
#[pyfunction]
fn sample_mallows(central: Vec<usize>, phi: f64, seed: u64) -> PyResult<Vec<usize>> {
    let model = MallowsModel::new(central, phi).map_err(pyerr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(model.sample(&mut rng))
}

/// Number of pairs ordered differently by the two rankings.
#[pyfunction]
fn kendall_tau(a: Vec<usize>, b: Vec<usize>) -> PyResult<usize> {
    sampling::kendall_tau(&a, &b).map_err(pyerr)
}

/// A uniformly random ranking at the exact Kendall distance `gamma` from
/// `rho`.
#[pyfunction]
fn ranking_at_distance(rho: Vec<usize>, gamma: usize, seed: u64) -> PyResult<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sampling::ranking_at_distance(&rho, gamma, &mut rng).map_err(pyerr)
}

/// Closed-form predictions for unconstrained selection of two groups with
/// uniform utilities: dict with representation, utility, first-choice
/// bound, and expected per-group selected counts.
#[pyfunction]
fn theory_predictions(
    py: Python<'_>,
    n1: usize,
    n2: usize,
    capacity: usize,
    beta: f64,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let params = theory::TheoryParams::new(n1, n2, capacity, beta).map_err(pyerr)?;
    let pred = theory::predicted_metrics_uniform(&params).map_err(pyerr)?;
    let (alpha1, alpha2) = theory::predicted_alphas(&params).map_err(pyerr)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("representation", pred.representation)?;
    dict.set_item("utility", pred.utility)?;
    dict.set_item("first_choice_upper_bound", pred.preference_upper)?;
    dict.set_item("expected_selected", (alpha1, alpha2))?;
    Ok(dict.unbind())
}

/// Upper bound min(1, 2 beta ln(1/beta)) on the fairness ratios for
/// log-concave utility densities.
#[pyfunction]
fn logconcave_bound(beta: f64) -> PyResult<f64> {
    theory::logconcave_bound(beta).map_err(pyerr)
}

#[pymodule]
fn fairselect_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<GroupLabels>()?;
    m.add_class::<Assignment>()?;
    m.add_function(wrap_pyfunction!(assign, m)?)?;
    m.add_function(wrap_pyfunction!(verify_stable, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_stable, m)?)?;
    m.add_function(wrap_pyfunction!(utility_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(representational_fairness, m)?)?;
    m.add_function(wrap_pyfunction!(preference_fairness, m)?)?;
    m.add_function(wrap_pyfunction!(quota, m)?)?;
    m.add_function(wrap_pyfunction!(sample_utilities, m)?)?;
    m.add_function(wrap_pyfunction!(apply_bias, m)?)?;
    m.add_function(wrap_pyfunction!(sample_mallows, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(ranking_at_distance, m)?)?;
    m.add_function(wrap_pyfunction!(theory_predictions, m)?)?;
    m.add_function(wrap_pyfunction!(logconcave_bound, m)?)?;
    Ok(())
}
