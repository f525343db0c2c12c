//! Stratified cross-validation, effectiveness metrics and the confidence split.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_folds, Dataset};
use crate::error::{Error, Result};
use crate::wheel::{recommend, train, RandomWheelModel, Recommendation, WheelConfig};

/// Counts indexed `[actual][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self { counts: vec![vec![0; classes]; classes] }
    }

    pub fn from_counts(counts: Vec<Vec<usize>>) -> Result<Self> {
        let m = counts.len();
        if m == 0 || counts.iter().any(|row| row.len() != m) {
            return Err(Error::domain("confusion matrix must be square and non-empty"));
        }
        Ok(Self { counts })
    }

    pub fn record(&mut self, actual: usize, predicted: usize) {
        self.counts[actual][predicted] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(other_row) {
                *c += o;
            }
        }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, actual: usize, predicted: usize) -> usize {
        self.counts[actual][predicted]
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    fn actual_total(&self, class: usize) -> usize {
        self.counts[class].iter().sum()
    }

    fn predicted_total(&self, class: usize) -> usize {
        self.counts.iter().map(|row| row[class]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// Per-class precision averaged with actual-class support as weights.
    pub precision: f64,
    pub f_measure: f64,
    pub kappa: f64,
    pub total: usize,
    /// Classes that were never predicted; their precision counts as 0.
    pub unpredicted_classes: Vec<usize>,
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::domain("no evaluated instances"));
    }
    let n = total as f64;
    let accuracy = cm.trace() as f64 / n;

    let mut precision = 0.0;
    let mut f_measure = 0.0;
    let mut chance = 0.0;
    let mut unpredicted_classes = Vec::new();
    for c in 0..cm.classes() {
        let support = cm.actual_total(c) as f64;
        let predicted = cm.predicted_total(c) as f64;
        let hit = cm.get(c, c) as f64;
        if predicted == 0.0 {
            unpredicted_classes.push(c);
        }
        let p = if predicted > 0.0 { hit / predicted } else { 0.0 };
        let r = if support > 0.0 { hit / support } else { 0.0 };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        precision += support * p;
        f_measure += support * f;
        chance += (support / n) * (predicted / n);
    }
    let kappa = if chance >= 1.0 { 0.0 } else { (accuracy - chance) / (1.0 - chance) };
    Ok(MetricsReport { accuracy, precision: precision / n, f_measure: f_measure / n, kappa, total, unpredicted_classes })
}

/// Outcome of one held-out instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    /// Index into the evaluated dataset.
    pub index: usize,
    pub fold: usize,
    pub actual: usize,
    /// `None` when the instance was unclassifiable.
    pub predicted: Option<usize>,
    pub confidence: Option<f64>,
}

impl InstanceOutcome {
    pub fn is_correct(&self) -> bool {
        self.predicted == Some(self.actual)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidencePoint {
    pub confidence: f64,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSplit {
    pub correct_mean: Option<f64>,
    pub incorrect_mean: Option<f64>,
    pub correct_count: usize,
    pub incorrect_count: usize,
    /// Every classified instance, highest confidence first.
    pub points: Vec<ConfidencePoint>,
}

impl ConfidenceSplit {
    /// `correct_mean / incorrect_mean`, when both sides exist.
    pub fn ratio(&self) -> Option<f64> {
        match (self.correct_mean, self.incorrect_mean) {
            (Some(c), Some(i)) if i > 0.0 => Some(c / i),
            (Some(c), Some(_)) if c > 0.0 => Some(f64::INFINITY),
            _ => None,
        }
    }

    pub fn confidences(&self, correct: bool) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().filter(move |p| p.correct == correct).map(|p| p.confidence)
    }

    /// Writes `correct.csv` and `wrong.csv` into `dir`, one confidence per
    /// line in descending order.
    pub fn write_csvs(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let correct = dir.join("correct.csv");
        let wrong = dir.join("wrong.csv");
        for (path, side) in [(&correct, true), (&wrong, false)] {
            let mut text = String::new();
            for c in self.confidences(side) {
                let _ = writeln!(text, "{c}");
            }
            std::fs::write(path, text)?;
        }
        Ok((correct, wrong))
    }
}

pub fn confidence_split(ledger: &[InstanceOutcome]) -> Result<ConfidenceSplit> {
    let mut points: Vec<ConfidencePoint> = ledger
        .iter()
        .filter_map(|o| o.confidence.map(|confidence| ConfidencePoint { confidence, correct: o.is_correct() }))
        .collect();
    if points.is_empty() {
        return Err(Error::domain("confidence ledger is empty"));
    }
    points.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then(b.correct.cmp(&a.correct)));
    let mean = |side: bool| {
        let values: Vec<f64> = points.iter().filter(|p| p.correct == side).map(|p| p.confidence).collect();
        let mean = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
        (mean, values.len())
    };
    let (correct_mean, correct_count) = mean(true);
    let (incorrect_mean, incorrect_count) = mean(false);
    Ok(ConfidenceSplit { correct_mean, incorrect_mean, correct_count, incorrect_count, points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub k: usize,
    pub seed: u64,
    pub metrics: MetricsReport,
    pub confusion: ConfusionMatrix,
    pub split: ConfidenceSplit,
    /// One entry per dataset record, in dataset order.
    pub ledger: Vec<InstanceOutcome>,
    pub unclassifiable: usize,
}

pub fn cross_validate(dataset: &Dataset, config: &WheelConfig, k: usize, seed: u64) -> Result<CrossValidation> {
    cross_validate_with(dataset, config, k, seed, |_, _, _| {})
}

/// Like [`cross_validate`], calling `inspect(model, index, recommendation)`
/// for every classified held-out instance. The fold model for fold `i` is
/// trained with seed `config.seed + i`.
pub fn cross_validate_with<F>(
    dataset: &Dataset,
    config: &WheelConfig,
    k: usize,
    seed: u64,
    inspect: F,
) -> Result<CrossValidation>
where
    F: Fn(&RandomWheelModel, usize, &Recommendation) + Sync,
{
    config.validate()?;
    let folds = stratified_folds(dataset, k, seed)?;
    let per_fold: Vec<Vec<InstanceOutcome>> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let fold_config = WheelConfig { seed: config.seed.wrapping_add(fold as u64), ..config.clone() };
            let model = train(dataset.subset(&folds.train_indices(fold))?, fold_config)?;
            folds
                .test_indices(fold)
                .into_par_iter()
                .map(|index| {
                    let record = &dataset.records()[index];
                    let (predicted, confidence) = match recommend(&model, &record.values) {
                        Ok(rec) => {
                            inspect(&model, index, &rec);
                            (Some(rec.label), Some(rec.confidence))
                        }
                        Err(Error::Unclassifiable) => (None, None),
                        Err(e) => return Err(e),
                    };
                    Ok(InstanceOutcome { index, fold, actual: record.label, predicted, confidence })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut ledger: Vec<InstanceOutcome> = per_fold.into_iter().flatten().collect();
    ledger.sort_by_key(|o| o.index);
    let mut confusion = ConfusionMatrix::new(dataset.class_count());
    for o in &ledger {
        if let Some(p) = o.predicted {
            confusion.record(o.actual, p);
        }
    }
    let unclassifiable = ledger.iter().filter(|o| o.predicted.is_none()).count();
    let metrics = compute_metrics(&confusion)?;
    let split = confidence_split(&ledger)?;
    Ok(CrossValidation { k, seed, metrics, confusion, split, ledger, unclassifiable })
}

/// Published results of other classifiers on the credit approval data,
/// shown for comparison only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceResult {
    pub code: &'static str,
    pub name: &'static str,
    pub accuracy: f64,
    pub precision: f64,
    pub f_measure: f64,
    pub kappa: f64,
}

const fn reference(code: &'static str, name: &'static str, a: f64, p: f64, f: f64, k: f64) -> ReferenceResult {
    ReferenceResult { code, name, accuracy: a, precision: p, f_measure: f, kappa: k }
}

pub const REFERENCE_RESULTS: &[ReferenceResult] = &[
    reference("NB", "naive Bayes", 0.7770, 0.7930, 0.7690, 0.5340),
    reference("BN", "Bayesian network", 0.8620, 0.8640, 0.8610, 0.7186),
    reference("LR", "logistic regression", 0.8520, 0.8540, 0.8530, 0.7024),
    reference("DT", "decision tree", 0.8610, 0.8610, 0.8610, 0.7180),
    reference("SVM", "support vector machine", 0.8490, 0.8610, 0.8500, 0.7003),
    reference("kNN", "k-nearest neighbour", 0.8120, 0.8110, 0.8110, 0.6178),
    reference("ANN", "multilayer perceptron", 0.8290, 0.8290, 0.8290, 0.6529),
    reference("RF", "random forest", 0.8670, 0.8670, 0.8670, 0.7295),
    reference("DL", "deep learning", 0.8160, 0.8160, 0.8160, 0.6268),
    reference("BM", "boosting", 0.8460, 0.8470, 0.8460, 0.6894),
    reference("RW", "random wheel (published)", 0.8681, 0.8763, 0.8685, 0.7368),
];

impl CrossValidation {
    /// Aligned plain-text report with the confusion matrix, the confidence
    /// split and the reference results as a footer.
    pub fn render_text(&self, class_tokens: &[String]) -> String {
        let m = &self.metrics;
        let mut out = String::new();
        let _ = writeln!(out, "{}-fold cross-validation (fold seed {})", self.k, self.seed);
        let _ = writeln!(out);
        for (name, value) in [
            ("accuracy", m.accuracy),
            ("precision", m.precision),
            ("f-measure", m.f_measure),
            ("kappa", m.kappa),
        ] {
            let _ = writeln!(out, "{name:<16}{value:>8.4}");
        }
        let _ = writeln!(out, "{:<16}{:>8}", "evaluated", m.total);
        let _ = writeln!(out, "{:<16}{:>8}", "unclassifiable", self.unclassifiable);
        for &c in &m.unpredicted_classes {
            let _ = writeln!(out, "note: class {} was never predicted", class_tokens[c]);
        }

        let width = class_tokens.iter().map(String::len).max().unwrap_or(1).max(6);
        let _ = writeln!(out);
        let _ = write!(out, "{:<w$}", "actual\\pred", w = width + 6);
        for t in class_tokens {
            let _ = write!(out, "{t:>w$}", w = width + 2);
        }
        let _ = writeln!(out);
        for (t, row) in class_tokens.iter().zip(self.confusion.counts()) {
            let _ = write!(out, "{t:<w$}", w = width + 6);
            for c in row {
                let _ = write!(out, "{c:>w$}", w = width + 2);
            }
            let _ = writeln!(out);
        }

        let side = |mean: Option<f64>, count: usize| match mean {
            Some(v) => format!("{:.2}% over {count}", 100.0 * v),
            None => "none".to_string(),
        };
        let _ = writeln!(out);
        let _ = writeln!(out, "mean confidence");
        let _ = writeln!(out, "{:<16}{}", "  correct", side(self.split.correct_mean, self.split.correct_count));
        let _ = writeln!(out, "{:<16}{}", "  incorrect", side(self.split.incorrect_mean, self.split.incorrect_count));

        let _ = writeln!(out);
        let _ = writeln!(out, "reference results on the credit approval data (published, not recomputed)");
        let _ = writeln!(out, "{:<6}{:>10}{:>11}{:>11}{:>8}", "code", "accuracy", "precision", "f-measure", "kappa");
        for r in REFERENCE_RESULTS {
            let _ = writeln!(
                out,
                "{:<6}{:>10.4}{:>11.4}{:>11.4}{:>8.4}",
                r.code, r.accuracy, r.precision, r.f_measure, r.kappa
            );
        }
        out
    }
}
