//! Per-attribute explanation of a recommendation.
//!
//! Each factor's push on the winning wheel, `h * f_winner`, is split evenly
//! among the factor's attributes. Summing an attribute's shares over all
//! trials and normalizing gives its percentage of the winning wheel's motion.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::AttributeSchema;
use crate::error::{Error, Result};
use crate::wheel::{Recommendation, TrialResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionEntry {
    pub attribute: String,
    pub position: usize,
    /// Summed raw share over all trials.
    pub contribution: f64,
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub winner_label: String,
    /// Every attribute once, largest share first (ties by name).
    pub entries: Vec<AttributionEntry>,
    /// False when nothing pushed the winning wheel; all percentages are then 0.
    pub has_signal: bool,
}

/// Share of `attribute` in the push a trial gave wheel `winner`.
pub fn trial_contribution(trial: &TrialResult, attribute: usize, winner: usize) -> f64 {
    trial
        .chosen_factors()
        .iter()
        .filter(|e| !e.is_empty() && e.factor.contains(attribute))
        .map(|e| e.weightage * e.forces[winner] / e.factor.size() as f64)
        .sum()
}

pub fn aggregate_explanation(recommendation: &Recommendation, schema: &[AttributeSchema]) -> Result<AttributionReport> {
    if recommendation.trials.is_empty() {
        return Err(Error::domain("recommendation has no trials"));
    }
    let winner = recommendation.label;
    let raw: Vec<f64> = schema
        .iter()
        .map(|a| recommendation.trials.iter().map(|t| trial_contribution(t, a.position, winner)).sum())
        .collect();
    let total: f64 = raw.iter().sum();
    let has_signal = total > 0.0;
    let mut entries: Vec<AttributionEntry> = schema
        .iter()
        .zip(&raw)
        .map(|(a, &contribution)| AttributionEntry {
            attribute: a.name.clone(),
            position: a.position,
            contribution,
            percentage: if has_signal { 100.0 * contribution / total } else { 0.0 },
        })
        .collect();
    entries.sort_by(|a, b| b.percentage.total_cmp(&a.percentage).then_with(|| a.attribute.cmp(&b.attribute)));
    Ok(AttributionReport { winner_label: recommendation.label_token.clone(), entries, has_signal })
}

impl AttributionReport {
    /// The `n` largest entries and the summed percentage of the rest.
    pub fn top(&self, n: usize) -> (&[AttributionEntry], f64) {
        let n = n.min(self.entries.len());
        let others = self.entries[n..].iter().fold(0.0, |acc, e| acc + e.percentage);
        (&self.entries[..n], others)
    }

    /// `A09 17.7%, A11 17.4%, A15 9.1%, others 55.8%`
    pub fn summary(&self, n: usize) -> String {
        if !self.has_signal {
            return "no explanation signal".to_string();
        }
        let (top, others) = self.top(n);
        let mut out = String::new();
        for (i, e) in top.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{} {:.1}%", e.attribute, e.percentage);
        }
        if top.len() < self.entries.len() {
            let _ = write!(out, ", others {others:.1}%");
        }
        out
    }
}
