//! Declarative Monte Carlo experiments: sweep one parameter, repeat draws,
//! aggregate mean and standard error per algorithm and metric.
//!
//! Reproducibility contract: iteration `i` at sweep point `s` draws from a
//! dedicated RNG stream keyed by the master seed and `(s, i)`, and draws
//! are aggregated in iteration order, so serial and parallel runs of the
//! same config and seed produce identical output bytes.

use std::io::Write;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bias::{apply_bias, BiasModel};
use crate::error::Error;
use crate::ingest;
use crate::matching::{assign, ConstraintPolicy};
use crate::metrics::{preference_fairness, representational_fairness, utility_ratio};
use crate::model::{GroupLabels, Instance, LatentProfile};
use crate::sampling::{ranking_at_distance, sample_utilities, MallowsModel, UtilityDistribution};

/// Where candidates and institutions come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    /// Latent utilities drawn fresh each iteration; observed scores derive
    /// from them through the bias model.
    Synthetic {
        n: usize,
        p: usize,
        /// Per-institution capacities; mutually exclusive with
        /// `capacity_each`.
        #[serde(default)]
        capacities: Option<Vec<usize>>,
        /// Same capacity for all p institutions.
        #[serde(default)]
        capacity_each: Option<usize>,
        /// Defaults to an even two-way split of n.
        #[serde(default)]
        group_sizes: Option<Vec<usize>>,
    },
    /// Scores read from a candidate CSV; they act as both observed and
    /// latent utilities. Institutions come from the program file ordered by
    /// closing rank.
    Ingest {
        candidates: PathBuf,
        programs: PathBuf,
        group_column: String,
        /// Keep only the best-scoring candidates.
        #[serde(default)]
        rank_limit: Option<usize>,
        /// Drop programs with a closing rank above this.
        #[serde(default)]
        closing_rank_cutoff: Option<u32>,
    },
}

/// Which parameter the sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Multiplicative bias factor.
    Beta,
    /// Mallows dispersion.
    Phi,
    /// Kendall distance between the two groups' central rankings.
    Gamma,
    /// Reserve fraction of the relaxed algorithms.
    Alpha,
    /// Scale of additive score noise.
    Delta,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Beta => "beta",
            SweepAxis::Phi => "phi",
            SweepAxis::Gamma => "gamma",
            SweepAxis::Alpha => "alpha",
            SweepAxis::Delta => "delta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// One requested output metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    /// Realized over optimal total latent utility.
    Utility,
    /// min/max ratio of group selection rates.
    Representation,
    /// min/max ratio of group top-`ell` assignment fractions.
    Preference { ell: usize },
}

impl MetricSpec {
    pub fn name(&self) -> String {
        match self {
            MetricSpec::Utility => "utility".into(),
            MetricSpec::Representation => "representation".into(),
            MetricSpec::Preference { ell } => format!("preference_top{ell}"),
        }
    }
}

fn default_phi() -> f64 {
    0.25
}

fn default_iterations() -> usize {
    50
}

fn default_distribution() -> UtilityDistribution {
    UtilityDistribution::Uniform01
}

/// Full experiment description. Unknown fields in a config file are
/// rejected so typos fail fast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: SourceSpec,
    #[serde(default = "default_distribution")]
    pub utility_distribution: UtilityDistribution,
    /// Score distortion for groups other than group 0. None means scores
    /// equal latent utilities (unless the sweep axis supplies a model).
    #[serde(default)]
    pub bias: Option<BiasModel>,
    /// Mallows dispersion for preference sampling; 0 gives every candidate
    /// exactly the central ranking.
    #[serde(default = "default_phi")]
    pub phi: f64,
    /// Kendall distance of group >= 1 central rankings from group 0's; 0
    /// means one shared ranking.
    #[serde(default)]
    pub gamma: usize,
    pub algorithms: Vec<ConstraintPolicy>,
    pub metrics: Vec<MetricSpec>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    pub sweep: SweepSpec,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms requested".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::Config("no metrics requested".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if !self.phi.is_finite() || !(0.0..=1.0).contains(&self.phi) {
            return Err(Error::Config(format!("phi {} outside [0, 1]", self.phi)));
        }
        self.utility_distribution.validate()?;
        if let Some(bias) = &self.bias {
            bias.validate()?;
        }
        for value in &self.sweep.values {
            if !value.is_finite() {
                return Err(Error::Config("non-finite sweep value".into()));
            }
            match self.sweep.axis {
                SweepAxis::Beta => {
                    if *value <= 0.0 || *value > 1.0 {
                        return Err(Error::Config(format!(
                            "bias factor {value} outside (0, 1]"
                        )));
                    }
                }
                SweepAxis::Phi | SweepAxis::Alpha => {
                    if !(0.0..=1.0).contains(value) {
                        return Err(Error::Config(format!(
                            "{} value {value} outside [0, 1]",
                            self.sweep.axis.name()
                        )));
                    }
                }
                SweepAxis::Gamma => {
                    if *value < 0.0 || value.fract() != 0.0 {
                        return Err(Error::Config(format!(
                            "gamma value {value} is not a non-negative integer"
                        )));
                    }
                }
                SweepAxis::Delta => {
                    if *value < 0.0 {
                        return Err(Error::Config(format!("delta {value} is negative")));
                    }
                }
            }
        }
        match self.sweep.axis {
            SweepAxis::Beta => {
                if matches!(self.bias, Some(BiasModel::AdditiveNoise { .. })) {
                    return Err(Error::Config(
                        "a beta sweep needs a multiplicative bias model".into(),
                    ));
                }
                if matches!(self.source, SourceSpec::Ingest { .. }) {
                    return Err(Error::Config(
                        "bias sweeps need a synthetic source; ingested scores are \
                         already observed"
                            .into(),
                    ));
                }
            }
            SweepAxis::Delta => {
                if !matches!(self.bias, None | Some(BiasModel::AdditiveNoise { .. })) {
                    return Err(Error::Config(
                        "a delta sweep needs the additive noise model".into(),
                    ));
                }
                if matches!(self.source, SourceSpec::Ingest { .. }) {
                    return Err(Error::Config(
                        "bias sweeps need a synthetic source; ingested scores are \
                         already observed"
                            .into(),
                    ));
                }
            }
            SweepAxis::Alpha => {
                let any_relaxed = self.algorithms.iter().any(|a| {
                    matches!(
                        a,
                        ConstraintPolicy::RelaxedGroup { .. }
                            | ConstraintPolicy::RelaxedInstitution { .. }
                    )
                });
                if !any_relaxed {
                    return Err(Error::Config(
                        "an alpha sweep needs a relaxed algorithm in the list".into(),
                    ));
                }
            }
            SweepAxis::Phi | SweepAxis::Gamma => {}
        }
        if let SourceSpec::Synthetic { n, p, capacities, capacity_each, group_sizes } =
            &self.source
        {
            if *n == 0 || *p == 0 {
                return Err(Error::Config("n and p must be positive".into()));
            }
            let caps = match (capacities, capacity_each) {
                (Some(_), Some(_)) => {
                    return Err(Error::Config(
                        "give capacities or capacity_each, not both".into(),
                    ))
                }
                (Some(list), None) => {
                    if list.len() != *p {
                        return Err(Error::Config(format!(
                            "{} capacities for p={p}",
                            list.len()
                        )));
                    }
                    list.clone()
                }
                (None, Some(each)) => vec![*each; *p],
                (None, None) => {
                    return Err(Error::Config(
                        "synthetic source needs capacities or capacity_each".into(),
                    ))
                }
            };
            let total: usize = caps.iter().sum();
            if total == 0 {
                return Err(Error::Config("total capacity is zero".into()));
            }
            if self.metrics.iter().any(|m| matches!(m, MetricSpec::Utility)) && total > *n {
                return Err(Error::Config(format!(
                    "utility metric needs total capacity {total} <= n {n}"
                )));
            }
            if let Some(sizes) = group_sizes {
                if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
                    return Err(Error::Config(
                        "group_sizes needs at least two nonempty groups".into(),
                    ));
                }
                if sizes.iter().sum::<usize>() != *n {
                    return Err(Error::Config(format!(
                        "group sizes sum to {}, n is {n}",
                        sizes.iter().sum::<usize>()
                    )));
                }
            } else if *n < 2 {
                return Err(Error::Config("default group split needs n >= 2".into()));
            }
            let max_distance = p * (p - 1) / 2;
            let gamma_max = match self.sweep.axis {
                SweepAxis::Gamma => self
                    .sweep
                    .values
                    .iter()
                    .fold(self.gamma as f64, |acc, v| acc.max(*v))
                    as usize,
                _ => self.gamma,
            };
            if gamma_max > max_distance {
                return Err(Error::Config(format!(
                    "gamma {gamma_max} exceeds the maximum distance {max_distance} for \
                     p={p}"
                )));
            }
            for m in &self.metrics {
                if let MetricSpec::Preference { ell } = m {
                    if *ell < 1 || ell > p {
                        return Err(Error::Config(format!(
                            "preference depth {ell} outside 1..={p}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Master seed precedence: explicit config value, else the
    /// FAIRSELECT_SEED environment variable, else 0.
    pub fn master_seed(&self) -> u64 {
        if let Some(seed) = self.seed {
            return seed;
        }
        std::env::var("FAIRSELECT_SEED")
            .ok()
            .and_then(|text| text.parse().ok())
            .unwrap_or(0)
    }

    fn bias_at(&self, value: f64) -> Option<BiasModel> {
        match self.sweep.axis {
            SweepAxis::Beta => Some(match self.bias {
                Some(BiasModel::NoisyMultiplicative { std, .. }) => {
                    BiasModel::NoisyMultiplicative { beta: value, std }
                }
                _ => BiasModel::Multiplicative { beta: value },
            }),
            SweepAxis::Delta => Some(BiasModel::AdditiveNoise { delta: value }),
            _ => self.bias,
        }
    }

    fn phi_at(&self, value: f64) -> f64 {
        match self.sweep.axis {
            SweepAxis::Phi => value,
            _ => self.phi,
        }
    }

    fn gamma_at(&self, value: f64) -> usize {
        match self.sweep.axis {
            SweepAxis::Gamma => value as usize,
            _ => self.gamma,
        }
    }

    fn algorithms_at(&self, value: f64) -> Vec<ConstraintPolicy> {
        self.algorithms
            .iter()
            .map(|a| match (self.sweep.axis, a) {
                (SweepAxis::Alpha, ConstraintPolicy::RelaxedGroup { .. }) => {
                    ConstraintPolicy::RelaxedGroup { alpha: value }
                }
                (SweepAxis::Alpha, ConstraintPolicy::RelaxedInstitution { .. }) => {
                    ConstraintPolicy::RelaxedInstitution { alpha: value }
                }
                (_, other) => *other,
            })
            .collect()
    }
}

/// Stable 64-bit FNV-1a over the canonical JSON form of the config,
/// reported as provenance alongside results.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let text = serde_json::to_string(config).expect("config serializes");
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub algorithm: String,
    pub metric: String,
    pub mean: f64,
    pub sem: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub sweep_value: f64,
    pub cells: Vec<MetricCell>,
    /// Algorithms that failed at this point, with the failure message.
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config_hash: String,
    pub seed: u64,
    pub sweep_axis: String,
    pub points: Vec<PointResult>,
}

impl ExperimentResult {
    /// Mean of one algorithm/metric pair across the sweep, in point order.
    pub fn series(&self, algorithm: &str, metric: &str) -> Vec<(f64, f64, f64)> {
        self.points
            .iter()
            .filter_map(|point| {
                point
                    .cells
                    .iter()
                    .find(|c| c.algorithm == algorithm && c.metric == metric)
                    .map(|c| (point.sweep_value, c.mean, c.sem))
            })
            .collect()
    }
}

enum PreparedSource {
    Synthetic { capacities: Vec<usize>, groups: GroupLabels },
    Ingest { scores: Vec<f64>, capacities: Vec<usize>, groups: GroupLabels },
}

impl PreparedSource {
    fn prepare(config: &ExperimentConfig) -> Result<Self, Error> {
        match &config.source {
            SourceSpec::Synthetic { n, p, capacities, capacity_each, group_sizes } => {
                let caps = match (capacities, capacity_each) {
                    (Some(list), None) => list.clone(),
                    (None, Some(each)) => vec![*each; *p],
                    _ => unreachable!("validated"),
                };
                let labels = match group_sizes {
                    Some(sizes) => {
                        let mut labels = Vec::with_capacity(*n);
                        for (g, &s) in sizes.iter().enumerate() {
                            labels.extend(std::iter::repeat(g).take(s));
                        }
                        labels
                    }
                    None => {
                        let n1 = n - n / 2;
                        let mut labels = vec![0; n1];
                        labels.extend(std::iter::repeat(1).take(n / 2));
                        labels
                    }
                };
                Ok(PreparedSource::Synthetic {
                    capacities: caps,
                    groups: GroupLabels::new(labels)?,
                })
            }
            SourceSpec::Ingest {
                candidates,
                programs,
                group_column,
                rank_limit,
                closing_rank_cutoff,
            } => {
                let table = ingest::load_candidates(candidates, group_column)?;
                let table = table.ranked(*rank_limit)?;
                if table.groups().group_count() < 2 {
                    return Err(Error::Config(format!(
                        "group column `{group_column}` has a single value"
                    )));
                }
                let records = ingest::load_programs(programs)?;
                let ranking = ingest::build_central_ranking(&records, *closing_rank_cutoff)?;
                let capacities = ranking.capacities();
                let total: usize = capacities.iter().sum();
                if config.metrics.iter().any(|m| matches!(m, MetricSpec::Utility))
                    && total > table.len()
                {
                    return Err(Error::Config(format!(
                        "utility metric needs total capacity {total} <= candidate count {}",
                        table.len()
                    )));
                }
                let p = capacities.len();
                for m in &config.metrics {
                    if let MetricSpec::Preference { ell } = m {
                        if *ell < 1 || *ell > p {
                            return Err(Error::Config(format!(
                                "preference depth {ell} outside 1..={p}"
                            )));
                        }
                    }
                }
                let max_distance = p * (p - 1) / 2;
                let gamma_max = match config.sweep.axis {
                    SweepAxis::Gamma => config
                        .sweep
                        .values
                        .iter()
                        .fold(config.gamma as f64, |acc, v| acc.max(*v))
                        as usize,
                    _ => config.gamma,
                };
                if gamma_max > max_distance {
                    return Err(Error::Config(format!(
                        "gamma {gamma_max} exceeds the maximum distance {max_distance} \
                         for p={p}"
                    )));
                }
                Ok(PreparedSource::Ingest {
                    scores: table.scores().to_vec(),
                    capacities,
                    groups: table.groups().clone(),
                })
            }
        }
    }

    fn n(&self) -> usize {
        match self {
            PreparedSource::Synthetic { groups, .. } => groups.len(),
            PreparedSource::Ingest { scores, .. } => scores.len(),
        }
    }

    fn capacities(&self) -> &[usize] {
        match self {
            PreparedSource::Synthetic { capacities, .. } => capacities,
            PreparedSource::Ingest { capacities, .. } => capacities,
        }
    }

    fn groups(&self) -> &GroupLabels {
        match self {
            PreparedSource::Synthetic { groups, .. } => groups,
            PreparedSource::Ingest { groups, .. } => groups,
        }
    }
}

/// Per-draw metric values for each algorithm, in config order.
type DrawOutcome = Vec<Result<Vec<f64>, String>>;

fn run_draw(
    config: &ExperimentConfig,
    source: &PreparedSource,
    sweep_index: usize,
    iteration: usize,
    value: f64,
) -> Result<DrawOutcome, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed());
    rng.set_stream(((sweep_index as u64) << 32) | iteration as u64);

    let (latent, observed) = match source {
        PreparedSource::Synthetic { groups, .. } => {
            let latent =
                sample_utilities(&config.utility_distribution, source.n(), &mut rng)?;
            let observed = match config.bias_at(value) {
                Some(model) => apply_bias(&latent, groups, &model, &mut rng)?,
                None => latent.values().to_vec(),
            };
            (latent, observed)
        }
        PreparedSource::Ingest { scores, .. } => {
            (LatentProfile::new(scores.clone())?, scores.clone())
        }
    };

    let p = source.capacities().len();
    let shared: Vec<usize> = (0..p).collect();
    let gamma = config.gamma_at(value);
    let offset_center = if gamma > 0 {
        ranking_at_distance(&shared, gamma, &mut rng)?
    } else {
        shared.clone()
    };
    let phi = config.phi_at(value);
    let groups = source.groups();
    let preferences: Vec<Vec<usize>> = if phi == 0.0 {
        (0..source.n())
            .map(|i| {
                if groups.labels()[i] == 0 {
                    shared.clone()
                } else {
                    offset_center.clone()
                }
            })
            .collect()
    } else {
        let shared_model = MallowsModel::new(shared.clone(), phi)?;
        let offset_model = MallowsModel::new(offset_center.clone(), phi)?;
        (0..source.n())
            .map(|i| {
                if groups.labels()[i] == 0 {
                    shared_model.sample(&mut rng)
                } else {
                    offset_model.sample(&mut rng)
                }
            })
            .collect()
    };

    let instance = Instance::new(source.capacities().to_vec(), observed, preferences)?;
    let capacity = instance.total_capacity().min(instance.n());

    let outcome = config
        .algorithms_at(value)
        .iter()
        .map(|policy| {
            let assignment = match assign(&instance, Some(groups), *policy) {
                Ok(a) => a,
                Err(e) => return Err(format!("{}: {e}", policy.name())),
            };
            config
                .metrics
                .iter()
                .map(|metric| {
                    let result = match metric {
                        MetricSpec::Utility => utility_ratio(&assignment, &latent, capacity),
                        MetricSpec::Representation => {
                            representational_fairness(&assignment, groups).map(|r| r.ratio)
                        }
                        MetricSpec::Preference { ell } => {
                            preference_fairness(&assignment, &instance, groups, *ell)
                                .map(|r| r.ratio)
                        }
                    };
                    result.map_err(|e| format!("{}: {e}", policy.name()))
                })
                .collect()
        })
        .collect();
    Ok(outcome)
}

fn mean_and_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Run the full sweep. Iterations run in parallel on the current rayon
/// pool; results are identical regardless of thread count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, Error> {
    config.validate()?;
    let source = PreparedSource::prepare(config)?;
    let seed = config.master_seed();
    let mut points = Vec::with_capacity(config.sweep.values.len());

    for (sweep_index, &value) in config.sweep.values.iter().enumerate() {
        let draws: Vec<Result<DrawOutcome, Error>> = (0..config.iterations)
            .into_par_iter()
            .map(|iteration| run_draw(config, &source, sweep_index, iteration, value))
            .collect();

        let mut cells = Vec::new();
        let mut errors = Vec::new();
        let algorithms = config.algorithms_at(value);
        // A draw-level error (bad sampling input) aborts the run; an
        // algorithm-level failure is recorded and skips its cells.
        let mut draw_outcomes = Vec::with_capacity(draws.len());
        for draw in draws {
            draw_outcomes.push(draw?);
        }
        for (a, policy) in algorithms.iter().enumerate() {
            let mut failed = false;
            for (iteration, outcome) in draw_outcomes.iter().enumerate() {
                if let Err(message) = &outcome[a] {
                    errors.push(format!("iteration {iteration}: {message}"));
                    failed = true;
                    break;
                }
            }
            if failed {
                continue;
            }
            for (m, metric) in config.metrics.iter().enumerate() {
                let values: Vec<f64> = draw_outcomes
                    .iter()
                    .map(|outcome| outcome[a].as_ref().expect("checked above")[m])
                    .collect();
                let (mean, sem) = mean_and_sem(&values);
                cells.push(MetricCell {
                    algorithm: policy.name().to_string(),
                    metric: metric.name(),
                    mean,
                    sem,
                    iterations: values.len(),
                });
            }
        }
        points.push(PointResult { sweep_value: value, cells, errors });
    }

    Ok(ExperimentResult {
        config_hash: config_hash(config),
        seed,
        sweep_axis: config.sweep.axis.name().to_string(),
        points,
    })
}

/// Long-format CSV: one row per sweep point, algorithm, and metric.
pub fn write_csv(result: &ExperimentResult, writer: impl Write) -> Result<(), Error> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["sweep_value", "algorithm", "metric", "mean", "sem", "iterations"])?;
    for point in &result.points {
        for cell in &point.cells {
            out.write_record([
                point.sweep_value.to_string(),
                cell.algorithm.clone(),
                cell.metric.clone(),
                cell.mean.to_string(),
                cell.sem.to_string(),
                cell.iterations.to_string(),
            ])?;
        }
    }
    out.flush().map_err(Error::Io)?;
    Ok(())
}

pub fn write_json(result: &ExperimentResult, mut writer: impl Write) -> Result<(), Error> {
    serde_json::to_writer_pretty(&mut writer, result)?;
    writer.write_all(b"\n").map_err(Error::Io)?;
    Ok(())
}
