//! Serializable views shared by the command line and the HTTP service, so
//! both surfaces emit the same documents for the same model.

use serde::{Deserialize, Serialize};

use crate::dataset::AttributeSchema;
use crate::error::Result;
use crate::explain::{aggregate_explanation, AttributionReport};
use crate::model_io::{self, MODEL_VERSION};
use crate::rng::fnv1a;
use crate::wheel::{RandomWheelModel, Recommendation, WheelConfig};

/// `v<format version>-<fingerprint of the serialized model>`.
pub fn model_version(model: &RandomWheelModel) -> Result<String> {
    let json = model_io::to_json(model)?;
    Ok(format!("v{MODEL_VERSION}-{:016x}", fnv1a(json.as_bytes())))
}

/// The first class token is the approving decision.
pub fn is_approval(label: usize) -> bool {
    label == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub attribute: String,
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationResponse {
    pub label: String,
    pub approve: bool,
    pub confidence: f64,
    /// Every attribute, largest share first.
    pub attributions: Vec<Attribution>,
    /// False when no factor pushed the winning wheel; percentages are then all 0.
    pub explanation_signal: bool,
    pub velocities: Vec<f64>,
    pub usable_factors: usize,
    pub trial_count: usize,
    pub model_version: String,
}

impl RecommendationResponse {
    pub fn new(
        recommendation: &Recommendation,
        schema: &[AttributeSchema],
        model_version: &str,
    ) -> Result<(Self, AttributionReport)> {
        let report = aggregate_explanation(recommendation, schema)?;
        let response = Self {
            label: recommendation.label_token.clone(),
            approve: is_approval(recommendation.label),
            confidence: recommendation.confidence,
            attributions: report
                .entries
                .iter()
                .map(|e| Attribution { attribute: e.attribute.clone(), percentage: e.percentage })
                .collect(),
            explanation_signal: report.has_signal,
            velocities: recommendation.velocities.clone(),
            usable_factors: recommendation.usable_factors,
            trial_count: recommendation.trials.len(),
            model_version: model_version.to_string(),
        };
        Ok((response, report))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRow {
    pub rank: usize,
    pub attributes: Vec<String>,
    pub importance: f64,
    pub default_ratio: f64,
    pub factor_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorListing {
    /// Size of the full table, before any truncation.
    pub total: usize,
    pub discarded: usize,
    pub factors: Vec<FactorRow>,
}

impl FactorListing {
    pub fn new(model: &RandomWheelModel, top: Option<usize>) -> Self {
        let table = model.factor_table();
        let schema = model.dataset().schema();
        let factors = table
            .top(top)
            .iter()
            .enumerate()
            .map(|(i, s)| FactorRow {
                rank: i + 1,
                attributes: s.factor.attributes().iter().map(|&a| schema[a].name.clone()).collect(),
                importance: s.importance,
                default_ratio: s.default_ratio,
                factor_ratio: s.factor_ratio,
            })
            .collect();
        Self { total: table.len(), discarded: table.discarded_count, factors }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model_version: String,
    pub attributes: Vec<AttributeSchema>,
    pub class_tokens: Vec<String>,
    pub approve_label: String,
    pub config: WheelConfig,
    pub records: usize,
    pub factor_count: usize,
    pub discarded_count: usize,
}

impl ModelInfo {
    pub fn new(model: &RandomWheelModel, model_version: &str) -> Self {
        let ds = model.dataset();
        Self {
            model_version: model_version.to_string(),
            attributes: ds.schema().to_vec(),
            class_tokens: ds.class_tokens().to_vec(),
            approve_label: ds.label_token(0).to_string(),
            config: model.config().clone(),
            records: ds.len(),
            factor_count: model.factor_table().len(),
            discarded_count: model.factor_table().discarded_count,
        }
    }
}
