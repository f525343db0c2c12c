//! Factor enumeration and importance scoring.
//!
//! A factor is a set of attributes. Its importance is how much sorting the
//! training data by it reduces the number of label runs ("bins") compared
//! with a random ordering:
//!
//! * default ratio `A`: mean bin count over random shuffles of the whole
//!   dataset, divided by the record count;
//! * factor ratio `B`: drop records missing any of the factor's attributes,
//!   then for every ordering of the attributes repeatedly shuffle and stably
//!   sort by that ordering, count bins, average, and divide by the filtered
//!   record count;
//! * importance `A - B`. Non-positive factors are noise and are dropped.
//!
//! The shuffle before each stable sort randomizes the order of records that
//! tie on every sort key, which is what makes `B` an expectation.

use std::cmp::Ordering;
use std::fmt::Write as _;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{count_bins, AttributeKind, AttributeSchema, Dataset, Value};
use crate::error::{Error, Result};
use crate::rng;

/// A non-empty set of attribute positions, stored ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Factor(Vec<usize>);

impl Factor {
    pub fn new(mut positions: Vec<usize>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::domain("a factor needs at least one attribute"));
        }
        positions.sort_unstable();
        if positions.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain("a factor cannot repeat an attribute"));
        }
        Ok(Factor(positions))
    }

    pub fn attributes(&self) -> &[usize] {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, position: usize) -> bool {
        self.0.binary_search(&position).is_ok()
    }

    /// Attribute names joined with `+`, e.g. `A09+A11`.
    pub fn display_name(&self, schema: &[AttributeSchema]) -> String {
        self.0
            .iter()
            .map(|&p| schema.get(p).map_or_else(|| format!("#{p}"), |a| a.name.clone()))
            .join("+")
    }

    /// Ranking order among equally important factors: smaller first, then by positions.
    fn simplicity_cmp(&self, other: &Factor) -> Ordering {
        self.size().cmp(&other.size()).then_with(|| self.0.cmp(&other.0))
    }
}

impl TryFrom<Vec<usize>> for Factor {
    type Error = Error;

    fn try_from(positions: Vec<usize>) -> Result<Self> {
        Factor::new(positions)
    }
}

impl From<Factor> for Vec<usize> {
    fn from(f: Factor) -> Self {
        f.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorScore {
    pub factor: Factor,
    pub default_ratio: f64,
    pub factor_ratio: f64,
    pub importance: f64,
}

/// Informative factors, most important first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorTable {
    pub scores: Vec<FactorScore>,
    /// Factors dropped for non-positive importance or because no record had
    /// all of their attributes.
    pub discarded_count: usize,
}

impl FactorTable {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn top(&self, n: Option<usize>) -> &[FactorScore] {
        &self.scores[..n.unwrap_or(self.scores.len()).min(self.scores.len())]
    }

    /// Checks the ordering and positivity invariants.
    pub fn validate(&self, attribute_count: usize) -> Result<()> {
        if self.scores.is_empty() {
            return Err(Error::NoInformativeFactors);
        }
        for s in &self.scores {
            if !(s.importance > 0.0) {
                return Err(Error::domain("factor table holds a non-positive importance"));
            }
            if s.factor.attributes().iter().any(|&p| p >= attribute_count) {
                return Err(Error::domain("factor refers to an unknown attribute"));
            }
        }
        if self.scores.windows(2).any(|w| rank_cmp(&w[0], &w[1]) != Ordering::Less) {
            return Err(Error::domain("factor table is not in rank order"));
        }
        Ok(())
    }

    /// Two-column listing: factor attribute names and importance.
    pub fn render(&self, schema: &[AttributeSchema], top: Option<usize>) -> String {
        let rows = self.top(top);
        let width = rows
            .iter()
            .map(|s| s.factor.display_name(schema).len())
            .max()
            .unwrap_or(0)
            .max("factor".len());
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  importance", "factor");
        for s in rows {
            let _ = writeln!(out, "{:<width$}  {:.6}", s.factor.display_name(schema), s.importance);
        }
        out
    }
}

fn rank_cmp(a: &FactorScore, b: &FactorScore) -> Ordering {
    b.importance
        .total_cmp(&a.importance)
        .then_with(|| a.factor.simplicity_cmp(&b.factor))
}

/// All attribute subsets of size `1..=depth`, smaller subsets first.
pub fn enumerate_factors(attribute_count: usize, depth: usize) -> Result<Vec<Factor>> {
    if depth == 0 || depth > attribute_count {
        return Err(Error::domain(format!(
            "depth must be in 1..={attribute_count}, got {depth}"
        )));
    }
    Ok((1..=depth)
        .flat_map(|size| (0..attribute_count).combinations(size))
        .map(Factor)
        .collect())
}

/// Per-ordering shuffle count when `budget` shuffles are spread over the
/// `size!` attribute orderings of a factor.
pub fn shuffles_per_ordering(budget: usize, size: usize) -> usize {
    let orderings: usize = (1..=size).product();
    budget.div_ceil(orderings).max(1)
}

const MISSING_RANK: u32 = u32::MAX;

/// Dense sort ranks per attribute: categorical tokens lexicographic, numbers ascending.
struct SortKeys {
    ranks: Vec<Vec<u32>>,
    bits: Vec<u32>,
}

impl SortKeys {
    fn new(dataset: &Dataset) -> Self {
        let records = dataset.records();
        let mut ranks = Vec::with_capacity(dataset.attribute_count());
        let mut bits = Vec::with_capacity(dataset.attribute_count());
        for attr in dataset.schema() {
            let p = attr.position;
            let column: Vec<u32> = match attr.kind {
                AttributeKind::Categorical => {
                    let distinct: Vec<&str> =
                        records.iter().filter_map(|r| r.values[p].as_token()).sorted_unstable().dedup().collect();
                    records
                        .iter()
                        .map(|r| match &r.values[p] {
                            Value::Categorical(t) => distinct.binary_search(&t.as_str()).unwrap() as u32,
                            _ => MISSING_RANK,
                        })
                        .collect()
                }
                AttributeKind::Integer => {
                    let distinct: Vec<i64> = records
                        .iter()
                        .filter_map(|r| match r.values[p] {
                            Value::Integer(v) => Some(v),
                            _ => None,
                        })
                        .sorted_unstable()
                        .dedup()
                        .collect();
                    records
                        .iter()
                        .map(|r| match r.values[p] {
                            Value::Integer(v) => distinct.binary_search(&v).unwrap() as u32,
                            _ => MISSING_RANK,
                        })
                        .collect()
                }
                AttributeKind::Real => {
                    let mut distinct: Vec<f64> = records.iter().filter_map(|r| r.values[p].as_f64()).collect();
                    distinct.sort_unstable_by(f64::total_cmp);
                    distinct.dedup_by(|a, b| a == b);
                    records
                        .iter()
                        .map(|r| match r.values[p].as_f64() {
                            Some(v) => distinct.partition_point(|&d| d < v) as u32,
                            None => MISSING_RANK,
                        })
                        .collect()
                }
            };
            let max_rank = column.iter().copied().filter(|&r| r != MISSING_RANK).max().unwrap_or(0);
            bits.push(u32::BITS - max_rank.leading_zeros());
            ranks.push(column);
        }
        Self { ranks, bits }
    }
}

/// Shared state for scoring many factors against one dataset.
pub struct BinScorer<'a> {
    dataset: &'a Dataset,
    keys: SortKeys,
    labels: Vec<usize>,
    seed: u64,
}

impl<'a> BinScorer<'a> {
    pub fn new(dataset: &'a Dataset, seed: u64) -> Self {
        Self { dataset, keys: SortKeys::new(dataset), labels: dataset.labels().collect(), seed }
    }

    pub fn default_ratio(&self, shuffles: usize) -> Result<f64> {
        if shuffles == 0 {
            return Err(Error::domain("shuffles must be at least 1"));
        }
        let mut rng = rng::stream(&[rng::TAG_DEFAULT_BINS, self.seed]);
        let mut labels = self.labels.clone();
        let mut total = 0u64;
        for _ in 0..shuffles {
            labels.shuffle(&mut rng);
            total += count_bins(&labels)? as u64;
        }
        Ok(total as f64 / shuffles as f64 / labels.len() as f64)
    }

    /// Factor bin ratio with `shuffles` repetitions for each attribute ordering.
    pub fn factor_ratio(&self, factor: &Factor, shuffles: usize) -> Result<f64> {
        if shuffles == 0 {
            return Err(Error::domain("shuffles must be at least 1"));
        }
        if factor.attributes().iter().any(|&p| p >= self.dataset.attribute_count()) {
            return Err(Error::domain("factor refers to an unknown attribute"));
        }
        let attrs = factor.attributes();
        let kept: Vec<usize> = (0..self.dataset.len())
            .filter(|&r| attrs.iter().all(|&a| self.keys.ranks[a][r] != MISSING_RANK))
            .collect();
        if kept.is_empty() {
            return Err(Error::FactorUnusable);
        }
        let labels: Vec<usize> = kept.iter().map(|&r| self.labels[r]).collect();
        let packed_bits: u32 = attrs.iter().map(|&a| self.keys.bits[a]).sum();

        let mut rng = rng::stream(&factor_stream_parts(self.seed, factor));
        let mut order: Vec<u32> = (0..kept.len() as u32).collect();
        let mut total = 0u64;
        let mut runs = 0u64;
        for ordering in attrs.iter().copied().permutations(attrs.len()) {
            let columns: Vec<&[u32]> = ordering.iter().map(|&a| self.keys.ranks[a].as_slice()).collect();
            if packed_bits <= 64 {
                let shifts: Vec<u32> = ordering.iter().map(|&a| self.keys.bits[a]).collect();
                let sort_key: Vec<u64> = kept
                    .iter()
                    .map(|&r| {
                        columns
                            .iter()
                            .zip(&shifts)
                            .fold(0u64, |acc, (col, &shift)| (acc << shift) | u64::from(col[r]))
                    })
                    .collect();
                for _ in 0..shuffles {
                    order.shuffle(&mut rng);
                    order.sort_by_key(|&i| sort_key[i as usize]);
                    total += run_count(&order, &labels);
                    runs += 1;
                }
            } else {
                for _ in 0..shuffles {
                    order.shuffle(&mut rng);
                    order.sort_by(|&x, &y| {
                        let (x, y) = (kept[x as usize], kept[y as usize]);
                        columns.iter().map(|c| c[x].cmp(&c[y])).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
                    });
                    total += run_count(&order, &labels);
                    runs += 1;
                }
            }
        }
        Ok(total as f64 / runs as f64 / kept.len() as f64)
    }

    /// Scores a factor against an already computed default ratio, spreading
    /// `shuffle_budget` over the factor's attribute orderings.
    pub fn score(&self, factor: &Factor, default_ratio: f64, shuffle_budget: usize) -> Result<FactorScore> {
        let factor_ratio = self.factor_ratio(factor, shuffles_per_ordering(shuffle_budget, factor.size()))?;
        Ok(FactorScore {
            factor: factor.clone(),
            default_ratio,
            factor_ratio,
            importance: default_ratio - factor_ratio,
        })
    }
}

fn run_count(order: &[u32], labels: &[usize]) -> u64 {
    1 + order.windows(2).filter(|w| labels[w[0] as usize] != labels[w[1] as usize]).count() as u64
}

fn factor_stream_parts(seed: u64, factor: &Factor) -> Vec<u64> {
    let mut parts = vec![rng::TAG_FACTOR_BINS, seed];
    parts.extend(factor.attributes().iter().map(|&p| p as u64));
    parts
}

/// Mean bin count over `shuffles` random orderings, divided by the record count.
pub fn default_bin_ratio(dataset: &Dataset, shuffles: usize, seed: u64) -> Result<f64> {
    BinScorer::new(dataset, seed).default_ratio(shuffles)
}

/// Factor bin ratio with `shuffles` repetitions per attribute ordering.
pub fn factor_bin_ratio(dataset: &Dataset, factor: &Factor, shuffles: usize, seed: u64) -> Result<f64> {
    BinScorer::new(dataset, seed).factor_ratio(factor, shuffles)
}

/// Importance of one factor. `shuffles` is the budget used for the default
/// ratio and spread over the factor's orderings, exactly as
/// [`build_factor_table`] does.
pub fn score_factor(dataset: &Dataset, factor: &Factor, shuffles: usize, seed: u64) -> Result<FactorScore> {
    let scorer = BinScorer::new(dataset, seed);
    let a = scorer.default_ratio(shuffles)?;
    scorer.score(factor, a, shuffles)
}

/// Scores every factor up to `depth` and keeps the informative ones in rank order.
pub fn build_factor_table(dataset: &Dataset, depth: usize, shuffles: usize, seed: u64) -> Result<FactorTable> {
    let factors = enumerate_factors(dataset.attribute_count(), depth)?;
    let scorer = BinScorer::new(dataset, seed);
    let default_ratio = scorer.default_ratio(shuffles)?;
    let scored: Vec<Option<FactorScore>> = factors
        .par_iter()
        .map(|f| match scorer.score(f, default_ratio, shuffles) {
            Ok(s) => Ok(Some(s)),
            Err(Error::FactorUnusable) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let total = scored.len();
    let mut scores: Vec<FactorScore> = scored.into_iter().flatten().filter(|s| s.importance > 0.0).collect();
    scores.sort_by(rank_cmp);
    if scores.is_empty() {
        return Err(Error::NoInformativeFactors);
    }
    Ok(FactorTable { discarded_count: total - scores.len(), scores })
}
