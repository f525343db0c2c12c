//! The random wheel classifier.
//!
//! There is one wheel per class. In each trial the classifier draws a random
//! count `n`, takes the `n` most important factors the observation can use,
//! and for each factor looks at the training records that agree with the
//! observation on all of the factor's attributes (its neighborhood):
//!
//! * weightage `h`: the scaled Gini coefficient of the neighborhood's class
//!   counts, 0 for a perfectly mixed neighborhood and 1 for a pure one;
//! * elementary force `f_j`: the lift of class `j` in the neighborhood over its
//!   training prior.
//!
//! Wheel `j` receives the resultant force `F_j = sum(h * f_j)` and spins at
//! `omega_j = F_j`. Velocities are averaged over trials, the fastest wheel wins,
//! and the confidence is the winner's relative margin over the runner-up.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitset::BitSet;
use crate::dataset::{attribute_stddev, class_prior, AttributeKind, Dataset, Value};
use crate::error::{Error, Result};
use crate::factors::{build_factor_table, Factor, FactorScore, FactorTable};
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WheelConfig {
    /// Largest factor size considered.
    pub depth: usize,
    /// Caps how far down the factor ranking a trial may reach: each trial uses
    /// between 1 and `ceil(noise_fraction * usable factors)` factors.
    pub noise_fraction: f64,
    pub trials: usize,
    /// Shuffle budget per factor when measuring importance.
    pub importance_shuffles: usize,
    /// Half-width of the numeric neighborhood band, in standard deviations.
    pub neighbor_window: f64,
    pub seed: u64,
}

impl Default for WheelConfig {
    fn default() -> Self {
        Self {
            depth: 3,
            noise_fraction: 0.5,
            trials: 100,
            importance_shuffles: 100,
            neighbor_window: 0.5,
            seed: 0,
        }
    }
}

impl WheelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if !(self.noise_fraction > 0.0 && self.noise_fraction <= 1.0) {
            return Err(Error::Config("noise fraction must be in (0, 1]".into()));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.importance_shuffles < 1 {
            return Err(Error::Config("importance shuffles must be at least 1".into()));
        }
        if !(self.neighbor_window > 0.0 && self.neighbor_window.is_finite()) {
            return Err(Error::Config("neighbor window must be a positive number".into()));
        }
        Ok(())
    }
}

/// A trained model. The training records are kept: neighborhoods are looked
/// up at recommendation time.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomWheelModel {
    dataset: Dataset,
    factor_table: FactorTable,
    priors: Vec<f64>,
    sigmas: Vec<Option<f64>>,
    config: WheelConfig,
}

/// Standard deviation of every numeric attribute; `None` for categorical
/// attributes and for numeric ones with no values at all.
pub fn attribute_sigmas(dataset: &Dataset) -> Vec<Option<f64>> {
    dataset
        .schema()
        .iter()
        .map(|a| if a.kind.is_numeric() { attribute_stddev(dataset, a.position).ok() } else { None })
        .collect()
}

pub fn train(dataset: Dataset, config: WheelConfig) -> Result<RandomWheelModel> {
    config.validate()?;
    let counts = dataset.class_counts();
    if let Some(absent) = counts.iter().position(|&c| c == 0) {
        return Err(Error::domain(format!(
            "class `{}` has no training records",
            dataset.label_token(absent)
        )));
    }
    let depth = config.depth.min(dataset.attribute_count());
    let factor_table = build_factor_table(&dataset, depth, config.importance_shuffles, config.seed)?;
    let priors = class_prior(&dataset);
    let sigmas = attribute_sigmas(&dataset);
    Ok(RandomWheelModel { dataset, factor_table, priors, sigmas, config })
}

impl RandomWheelModel {
    /// Reassembles a model from stored parts, checking that the priors and
    /// standard deviations are exactly what the records produce.
    pub fn from_parts(
        dataset: Dataset,
        factor_table: FactorTable,
        priors: Vec<f64>,
        sigmas: Vec<Option<f64>>,
        config: WheelConfig,
    ) -> Result<Self> {
        config.validate()?;
        factor_table.validate(dataset.attribute_count())?;
        if priors != class_prior(&dataset) {
            return Err(Error::Model("class priors do not match the training records".into()));
        }
        if priors.contains(&0.0) {
            return Err(Error::Model("a class has no training records".into()));
        }
        let expected = attribute_sigmas(&dataset);
        let same = sigmas.len() == expected.len()
            && sigmas.iter().zip(&expected).all(|(a, b)| match (a, b) {
                (Some(x), Some(y)) => x.to_bits() == y.to_bits(),
                (None, None) => true,
                _ => false,
            });
        if !same {
            return Err(Error::Model("standard deviations do not match the training records".into()));
        }
        Ok(Self { dataset, factor_table, priors, sigmas, config })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn factor_table(&self) -> &FactorTable {
        &self.factor_table
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn sigmas(&self) -> &[Option<f64>] {
        &self.sigmas
    }

    pub fn config(&self) -> &WheelConfig {
        &self.config
    }

    /// Checks an observation's shape and brings loosely typed values into the
    /// schema's representation.
    pub fn conform_observation(&self, values: Vec<Value>) -> Result<Vec<Value>> {
        let schema = self.dataset.schema();
        if values.len() != schema.len() {
            return Err(Error::Observation(format!(
                "expected {} values, found {}",
                schema.len(),
                values.len()
            )));
        }
        values
            .into_iter()
            .zip(schema)
            .map(|(v, a)| v.coerce(a.kind).map_err(|m| Error::Observation(format!("{}: {m}", a.name))))
            .collect()
    }

    /// Parses a comma-separated observation (attribute values only, `?` for missing).
    pub fn parse_observation(&self, line: &str) -> Result<Vec<Value>> {
        let schema = self.dataset.schema();
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != schema.len() {
            return Err(Error::Observation(format!(
                "expected {} values, found {}",
                schema.len(),
                fields.len()
            )));
        }
        fields
            .iter()
            .zip(schema)
            .map(|(t, a)| Value::parse(t, a.kind).map_err(|m| Error::Observation(format!("{}: {m}", a.name))))
            .collect()
    }

    /// Factors whose attributes are all present in the observation, in rank order.
    pub fn usable_factors<'a>(&'a self, observation: &'a [Value]) -> impl Iterator<Item = &'a FactorScore> + 'a {
        self.factor_table
            .scores
            .iter()
            .filter(move |s| s.factor.attributes().iter().all(|&a| !observation[a].is_missing()))
    }

    fn check_observation(&self, observation: &[Value]) -> Result<()> {
        let schema = self.dataset.schema();
        if observation.len() != schema.len() {
            return Err(Error::Observation(format!(
                "expected {} values, found {}",
                schema.len(),
                observation.len()
            )));
        }
        for (v, a) in observation.iter().zip(schema) {
            if !v.fits(a.kind) {
                return Err(Error::Observation(format!("{}: `{v}` is not a {} value", a.name, a.kind)));
            }
        }
        Ok(())
    }

    /// Whether a training value falls in the observation's neighborhood on one attribute.
    fn matches(&self, position: usize, observed: &Value, candidate: &Value) -> bool {
        match self.dataset.schema()[position].kind {
            AttributeKind::Categorical => !candidate.is_missing() && candidate == observed,
            AttributeKind::Integer | AttributeKind::Real => {
                match (observed.as_f64(), candidate.as_f64(), self.sigmas[position]) {
                    (Some(v), Some(x), Some(sigma)) => {
                        let half = self.config.neighbor_window * sigma;
                        v - half <= x && x <= v + half
                    }
                    _ => false,
                }
            }
        }
    }
}

/// Training records that agree with an observation on a factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub factor: Factor,
    /// Indices into the model's training records, ascending.
    pub records: Vec<usize>,
}

impl Neighborhood {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn class_counts(&self, dataset: &Dataset) -> Vec<usize> {
        let mut counts = vec![0; dataset.class_count()];
        for &r in &self.records {
            counts[dataset.records()[r].label] += 1;
        }
        counts
    }
}

/// Records matching the observation on every attribute of `factor`:
/// categorical values equal, numeric values within `neighbor_window * sigma`
/// (inclusive). Records missing any factor attribute never match.
pub fn extract_neighborhood(model: &RandomWheelModel, factor: &Factor, observation: &[Value]) -> Neighborhood {
    let records = model
        .dataset
        .records()
        .iter()
        .enumerate()
        .filter(|(_, r)| factor.attributes().iter().all(|&a| model.matches(a, &observation[a], &r.values[a])))
        .map(|(i, _)| i)
        .collect();
    Neighborhood { factor: factor.clone(), records }
}

/// Scaled Gini coefficient of class counts: `m/(m-1) * (sum(n_j^2)/N^2 - 1/m)`.
/// With two classes this is `2 (n1^2 + n2^2) / (n1 + n2)^2 - 1`.
pub fn weightage(class_counts: &[usize]) -> Result<f64> {
    let total: usize = class_counts.iter().sum();
    if total == 0 {
        return Err(Error::domain("weightage of an empty neighborhood"));
    }
    let m = class_counts.len();
    if m < 2 {
        return Err(Error::domain("weightage needs at least two classes"));
    }
    let total = total as f64;
    let concentration: f64 = class_counts.iter().map(|&n| (n as f64) * (n as f64)).sum::<f64>() / (total * total);
    let h = if m == 2 {
        2.0 * concentration - 1.0
    } else {
        let m = m as f64;
        m / (m - 1.0) * (concentration - 1.0 / m)
    };
    Ok(h.clamp(0.0, 1.0))
}

/// Lift of `class` in the neighborhood: its relative frequency there over its prior.
pub fn elementary_force(class_counts: &[usize], priors: &[f64], class: usize) -> Result<f64> {
    let total: usize = class_counts.iter().sum();
    if total == 0 {
        return Err(Error::domain("elementary force of an empty neighborhood"));
    }
    let prior = priors[class];
    if !(prior > 0.0) {
        return Err(Error::domain(format!("class {class} is absent from the training data")));
    }
    Ok(class_counts[class] as f64 / total as f64 / prior)
}

/// Force-to-velocity law. Each trial is a single impulse on a wheel with unit
/// moment of inertia, so the velocity equals the resultant force.
pub fn angular_velocity(force: f64) -> f64 {
    force
}

/// What one factor contributes in a trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorEvidence {
    pub factor: Factor,
    /// Neighborhood size. Zero means the factor contributes nothing.
    pub neighbors: usize,
    pub weightage: f64,
    /// Elementary force per class.
    pub forces: Vec<f64>,
}

impl FactorEvidence {
    pub fn is_empty(&self) -> bool {
        self.neighbors == 0
    }

    fn from_counts(factor: Factor, counts: &[usize], priors: &[f64]) -> Result<Self> {
        let neighbors = counts.iter().sum();
        if neighbors == 0 {
            return Ok(Self { factor, neighbors, weightage: 0.0, forces: vec![0.0; counts.len()] });
        }
        let weightage = weightage(counts)?;
        let forces = (0..counts.len()).map(|j| elementary_force(counts, priors, j)).collect::<Result<_>>()?;
        Ok(Self { factor, neighbors, weightage, forces })
    }
}

/// Per-observation match masks so that each factor's neighborhood is a
/// bitset intersection.
struct ObservationIndex {
    attribute_masks: Vec<Option<BitSet>>,
    class_masks: Vec<BitSet>,
    len: usize,
}

impl ObservationIndex {
    fn new(model: &RandomWheelModel, observation: &[Value]) -> Self {
        let records = model.dataset.records();
        let len = records.len();
        let attribute_masks = observation
            .iter()
            .enumerate()
            .map(|(a, v)| {
                (!v.is_missing()).then(|| {
                    let mut mask = BitSet::empty(len);
                    for (i, r) in records.iter().enumerate() {
                        if model.matches(a, v, &r.values[a]) {
                            mask.insert(i);
                        }
                    }
                    mask
                })
            })
            .collect();
        let mut class_masks = vec![BitSet::empty(len); model.dataset.class_count()];
        for (i, r) in records.iter().enumerate() {
            class_masks[r.label].insert(i);
        }
        Self { attribute_masks, class_masks, len }
    }

    fn evidence(&self, factor: &Factor, priors: &[f64]) -> Result<FactorEvidence> {
        let mut mask = BitSet::full(self.len);
        for &a in factor.attributes() {
            match &self.attribute_masks[a] {
                Some(m) => mask.intersect_with(m),
                None => return Err(Error::Observation("factor uses a missing attribute".into())),
            }
        }
        let counts: Vec<usize> = self.class_masks.iter().map(|c| mask.intersection_count(c)).collect();
        FactorEvidence::from_counts(factor.clone(), &counts, priors)
    }
}

/// One randomized trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial_index: usize,
    evidence: Arc<[FactorEvidence]>,
    chosen: usize,
    /// Resultant force per class.
    pub forces: Vec<f64>,
    /// Angular velocity per class.
    pub velocities: Vec<f64>,
}

impl TrialResult {
    fn new(trial_index: usize, evidence: Arc<[FactorEvidence]>, chosen: usize, classes: usize) -> Self {
        let forces = resultant_forces(&evidence[..chosen], classes);
        let velocities = forces.iter().map(|&f| angular_velocity(f)).collect();
        Self { trial_index, evidence, chosen, forces, velocities }
    }

    /// A trial that used exactly `evidence`. Forces and velocities are derived.
    pub fn from_evidence(trial_index: usize, evidence: Vec<FactorEvidence>, classes: usize) -> Self {
        let chosen = evidence.len();
        Self::new(trial_index, evidence.into(), chosen, classes)
    }

    /// The factors this trial used, most important first.
    pub fn chosen_factors(&self) -> &[FactorEvidence] {
        &self.evidence[..self.chosen]
    }
}

/// `F_j = sum over non-empty factors of h * f_j`, summed in rank order.
pub fn resultant_forces(evidence: &[FactorEvidence], classes: usize) -> Vec<f64> {
    let mut forces = vec![0.0; classes];
    for e in evidence.iter().filter(|e| !e.is_empty()) {
        for (total, f) in forces.iter_mut().zip(&e.forces) {
            *total += e.weightage * f;
        }
    }
    forces
}

/// Largest number of factors a trial may use.
pub fn selection_cap(usable: usize, noise_fraction: f64) -> usize {
    ((noise_fraction * usable as f64).ceil() as usize).clamp(1, usable.max(1))
}

fn draw_factor_count(rng: &mut StreamRng, cap: usize) -> usize {
    rng.random_range(1..=cap)
}

/// Stable identity of an observation, used to derive its trial streams.
pub fn observation_id(observation: &[Value]) -> u64 {
    let canonical: Vec<String> = observation.iter().map(|v| v.to_string()).collect();
    rng::fnv1a(canonical.join(",").as_bytes())
}

/// Random stream for one trial of one observation.
pub fn trial_rng(model: &RandomWheelModel, observation_id: u64, trial_index: usize) -> StreamRng {
    rng::stream(&[rng::TAG_TRIAL, model.config.seed, observation_id, trial_index as u64])
}

/// Runs a single trial on its own, computing the neighborhoods it needs.
pub fn run_trial(
    model: &RandomWheelModel,
    observation: &[Value],
    trial_index: usize,
    rng: &mut StreamRng,
) -> Result<TrialResult> {
    model.check_observation(observation)?;
    let usable: Vec<&FactorScore> = model.usable_factors(observation).collect();
    if usable.is_empty() {
        return Err(Error::Unclassifiable);
    }
    let chosen = draw_factor_count(rng, selection_cap(usable.len(), model.config.noise_fraction));
    let index = ObservationIndex::new(model, observation);
    let evidence = usable[..chosen]
        .iter()
        .map(|s| index.evidence(&s.factor, &model.priors))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialResult::new(trial_index, evidence.into(), chosen, model.dataset.class_count()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    /// Winning class index.
    pub label: usize,
    pub label_token: String,
    /// Mean angular velocity per class over all trials.
    pub velocities: Vec<f64>,
    pub confidence: f64,
    pub trials: Vec<TrialResult>,
    /// Factors the observation could use (all attributes present).
    pub usable_factors: usize,
}

impl Recommendation {
    pub fn runner_up(&self) -> Option<usize> {
        ranked_classes(&self.velocities).get(1).copied()
    }
}

fn ranked_classes(velocities: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..velocities.len()).collect();
    // stable: equal velocities keep class order
    order.sort_by(|&a, &b| velocities[b].total_cmp(&velocities[a]));
    order
}

/// Winner (ties go to the earlier class) and its relative margin over the runner-up.
pub fn winner_and_confidence(velocities: &[f64]) -> (usize, f64) {
    let order = ranked_classes(velocities);
    let winner = order[0];
    let top = velocities[winner];
    let runner = order.get(1).map_or(0.0, |&r| velocities[r]);
    let confidence = if top > 0.0 { ((top - runner) / top).clamp(0.0, 1.0) } else { 0.0 };
    (winner, confidence)
}

/// Recommends a class for an observation, deriving trial streams from the
/// model seed and the observation's content.
pub fn recommend(model: &RandomWheelModel, observation: &[Value]) -> Result<Recommendation> {
    recommend_with_id(model, observation, observation_id(observation))
}

pub fn recommend_with_id(model: &RandomWheelModel, observation: &[Value], id: u64) -> Result<Recommendation> {
    model.check_observation(observation)?;
    let usable: Vec<&FactorScore> = model.usable_factors(observation).collect();
    if usable.is_empty() {
        return Err(Error::Unclassifiable);
    }
    let classes = model.dataset.class_count();
    let cap = selection_cap(usable.len(), model.config.noise_fraction);
    // Every trial uses a prefix of the same ranking, so the neighborhoods of
    // the first `cap` factors are computed once and shared.
    let index = ObservationIndex::new(model, observation);
    let evidence: Arc<[FactorEvidence]> = usable[..cap]
        .iter()
        .map(|s| index.evidence(&s.factor, &model.priors))
        .collect::<Result<Vec<_>>>()?
        .into();

    let trials: Vec<TrialResult> = (0..model.config.trials)
        .map(|t| {
            let chosen = draw_factor_count(&mut trial_rng(model, id, t), cap);
            TrialResult::new(t, Arc::clone(&evidence), chosen, classes)
        })
        .collect();

    let mut velocities = vec![0.0; classes];
    for trial in &trials {
        for (sum, v) in velocities.iter_mut().zip(&trial.velocities) {
            *sum += v;
        }
    }
    let count = trials.len() as f64;
    velocities.iter_mut().for_each(|v| *v /= count);

    let (label, confidence) = winner_and_confidence(&velocities);
    Ok(Recommendation {
        label,
        label_token: model.dataset.label_token(label).to_string(),
        velocities,
        confidence,
        trials,
        usable_factors: usable.len(),
    })
}
