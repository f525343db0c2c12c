//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. The credit approval criteria read `RW_CREDIT_DATA` or
//! `data/crx.data` at the workspace root.

mod common;

use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use random_wheel::dataset::{count_bins, read_dataset};
use random_wheel::eval::{cross_validate, cross_validate_with, CrossValidation};
use random_wheel::explain::{aggregate_explanation, trial_contribution};
use random_wheel::factors::{build_factor_table, default_bin_ratio, factor_bin_ratio};
use random_wheel::model_io;
use random_wheel::wheel::{elementary_force, recommend, resultant_forces, train, weightage, FactorEvidence};
use random_wheel::{AttributeKind, Dataset, Factor, TrialResult, WheelConfig};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const MAJORITY_RATE: f64 = 0.5551;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn formula_oracles() -> Verdict {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    check("h(n1=n2)=0", close(weightage(&[6, 6]).unwrap(), 0.0));
    check("h(pure)=1", close(weightage(&[9, 0]).unwrap(), 1.0));
    check("h(3,1)=0.25", close(weightage(&[3, 1]).unwrap(), 0.25));
    let priors = [0.4, 0.6];
    check("f=1 at independence", close(elementary_force(&[4, 6], &priors, 0).unwrap(), 1.0));
    check("f=0 at zero count", close(elementary_force(&[0, 5], &priors, 0).unwrap(), 0.0));
    check("f(0.8/0.4)=2", close(elementary_force(&[8, 2], &priors, 0).unwrap(), 2.0));
    let ev = |attrs: Vec<usize>, h: f64, f: f64| FactorEvidence {
        factor: Factor::new(attrs).unwrap(),
        neighbors: 5,
        weightage: h,
        forces: vec![f, 0.0],
    };
    let forces = resultant_forces(&[ev(vec![0], 0.5, 1.2), ev(vec![1], 0.2, 0.8)], 2);
    check("F=0.76", close(forces[0], 0.76));
    let trial = TrialResult::from_evidence(0, vec![ev(vec![0, 1], 0.4, 1.5), ev(vec![0, 1, 2], 0.3, 2.0)], 2);
    check("epsilon=0.5", close(trial_contribution(&trial, 0, 0), 0.5));
    let pass = failures.is_empty();
    verdict(pass, if pass { "all 9 hand cases exact to 1e-12".to_string() } else { format!("failed: {}", failures.join(", ")) })
}

fn run_scan(labels: &[u8]) -> usize {
    let mut runs = 0;
    let mut previous = None;
    for &l in labels {
        if previous != Some(l) {
            runs += 1;
            previous = Some(l);
        }
    }
    runs
}

fn bin_count_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let len = rng.random_range(1..=1000);
        let alphabet = rng.random_range(1..=4u8);
        let labels: Vec<u8> = (0..len).map(|_| rng.random_range(0..alphabet)).collect();
        if count_bins(&labels).unwrap() != run_scan(&labels) {
            mismatches += 1;
        }
    }
    let worked = ["+", "+", "-", "-", "-", "+", "-", "+", "-", "-"];
    let bins = count_bins(&worked).unwrap();
    verdict(mismatches == 0 && bins == 6, format!("{mismatches} mismatches in 10000 sequences; worked sequence has {bins} bins"))
}

fn bin_ratio_statistics() -> Verdict {
    let schema = common::schema(&[AttributeKind::Integer]);
    let balanced: String = (0..10).map(|i| format!("{i},{}\n", if i % 2 == 0 { "+" } else { "-" })).collect();
    let a = default_bin_ratio(&common::parse(&balanced, &schema), 20_000, 7).unwrap();

    let schema = common::schema(&[AttributeKind::Categorical]);
    let separable: String = (0..50).map(|i| if i % 2 == 0 { "p,+\n" } else { "q,-\n" }).collect();
    let ds = common::parse(&separable, &schema);
    let factor = Factor::new(vec![0]).unwrap();
    let ratios: Vec<f64> = (0..20).map(|seed| factor_bin_ratio(&ds, &factor, 50, seed).unwrap()).collect();
    let exact = ratios.iter().all(|&r| r == 2.0 / 50.0);
    verdict(
        (a - 0.6).abs() <= 0.02 && exact,
        format!("A = {a:.4} (closed form 0.6); separating factor ratio exactly 2/n on 20 seeds: {exact}"),
    )
}

fn credit_path() -> PathBuf {
    std::env::var_os("RW_CREDIT_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/crx.data"))
}

fn load_credit() -> Result<Dataset, String> {
    let path = credit_path();
    if !path.exists() {
        return Err(format!("blocked: data file {} not found", path.display()));
    }
    let schema = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/credit.schema");
    read_dataset(&path, &schema).map_err(|e| format!("blocked: cannot read {}: {e}", path.display()))
}

#[derive(Default)]
struct ExplanationStats {
    instances: usize,
    bad_sum: usize,
    negative: usize,
    missing_nonzero: usize,
    approvals: usize,
    approvals_with_a09: usize,
}

struct CreditRuns {
    runs: Vec<CrossValidation>,
    explanation: ExplanationStats,
}

fn credit_runs(ds: &Dataset) -> CreditRuns {
    let stats = Mutex::new(ExplanationStats::default());
    let a09 = ds.attribute("A09").map(|a| a.position);
    let approve = ds.class_index("+");
    let runs = SEEDS
        .iter()
        .map(|&seed| {
            let config = WheelConfig { seed, ..Default::default() };
            cross_validate_with(ds, &config, 10, seed, |model, index, rec| {
                let report = aggregate_explanation(rec, model.dataset().schema()).unwrap();
                let observation = &ds.records()[index].values;
                let sum: f64 = report.entries.iter().map(|e| e.percentage).sum();
                let mut s = stats.lock().unwrap();
                s.instances += 1;
                if !report.has_signal || (sum - 100.0).abs() > 1e-9 {
                    s.bad_sum += 1;
                }
                if report.entries.iter().any(|e| e.percentage < 0.0) {
                    s.negative += 1;
                }
                if report.entries.iter().any(|e| observation[e.position].is_missing() && e.percentage != 0.0) {
                    s.missing_nonzero += 1;
                }
                if Some(rec.label) == approve {
                    s.approvals += 1;
                    if report.entries.iter().take(3).any(|e| Some(e.position) == a09) {
                        s.approvals_with_a09 += 1;
                    }
                }
            })
            .expect("cross-validation failed")
        })
        .collect();
    CreditRuns { runs, explanation: stats.into_inner().unwrap() }
}

fn uci_reproduction(runs: &CreditRuns) -> Verdict {
    let pick = |f: fn(&CrossValidation) -> f64| median(runs.runs.iter().map(f).collect());
    let accuracy = pick(|c| c.metrics.accuracy);
    let kappa = pick(|c| c.metrics.kappa);
    let precision = pick(|c| c.metrics.precision);
    let f_measure = pick(|c| c.metrics.f_measure);
    let pass = accuracy >= 0.80 && kappa >= 0.60 && precision >= 0.80 && f_measure >= 0.80;
    let unclassifiable: usize = runs.runs.iter().map(|c| c.unclassifiable).sum();
    verdict(
        pass,
        format!(
            "median over {} seeds: accuracy {accuracy:.4} (>= 0.80, target 0.8681), kappa {kappa:.4} (>= 0.60, target 0.7368), \
             precision {precision:.4} (>= 0.80, target 0.8763), F {f_measure:.4} (>= 0.80, target 0.8685); unclassifiable {unclassifiable}",
            SEEDS.len()
        ),
    )
}

fn descending(path: &std::path::Path) -> (bool, usize) {
    let text = std::fs::read_to_string(path).unwrap();
    let values: Vec<f64> = text.lines().map(|l| l.parse().unwrap()).collect();
    (values.windows(2).all(|w| w[0] >= w[1]), values.len())
}

fn confidence_separation(runs: &CreditRuns) -> Verdict {
    let ratios: Vec<f64> = runs.runs.iter().map(|c| c.split.ratio().unwrap_or(f64::NAN)).collect();
    let ratio = median(ratios.clone());
    let first = &runs.runs[0].split;
    let dir = tempfile::tempdir().unwrap();
    let (correct, wrong) = first.write_csvs(dir.path()).unwrap();
    let (correct_desc, correct_n) = descending(&correct);
    let (wrong_desc, wrong_n) = descending(&wrong);
    let shape = correct_desc && wrong_desc && correct_n > wrong_n;
    verdict(
        ratio >= 1.5 && shape,
        format!(
            "median correct/incorrect confidence ratio {ratio:.3} (>= 1.5); seed {}: correct {:.4} over {correct_n}, incorrect {:.4} over {wrong_n}; csv descending and correct-heavy: {shape}",
            SEEDS[0],
            first.correct_mean.unwrap_or(f64::NAN),
            first.incorrect_mean.unwrap_or(f64::NAN),
        ),
    )
}

fn explanation_contract(ds: &Dataset, runs: &CreditRuns) -> Verdict {
    let s = &runs.explanation;
    let contract = s.bad_sum == 0 && s.negative == 0 && s.missing_nonzero == 0 && s.instances > 0;
    let table = build_factor_table(ds, 1, 100, 0).expect("singleton table");
    let a09 = ds.attribute("A09").map(|a| a.position).unwrap();
    let rank = table.scores.iter().position(|sc| sc.factor.attributes() == [a09]);
    let share = s.approvals_with_a09 as f64 / s.approvals.max(1) as f64;
    let pass = contract && rank.is_some_and(|r| r < 3) && share >= 0.30;
    verdict(
        pass,
        format!(
            "{} instances: {} bad sums, {} negative, {} nonzero missing; A09 singleton rank {}; A09 in top-3 of {:.1}% of {} approvals (>= 30%)",
            s.instances,
            s.bad_sum,
            s.negative,
            s.missing_nonzero,
            rank.map_or("none".to_string(), |r| (r + 1).to_string()),
            100.0 * share,
            s.approvals,
        ),
    )
}

fn determinism() -> Verdict {
    let ds = common::mixed(300);
    let everything = || {
        let config = WheelConfig { seed: 17, ..Default::default() };
        let model = train(ds.clone(), config.clone()).unwrap();
        let cv = cross_validate(&ds, &config, 10, 17).unwrap();
        let recs: Vec<Vec<f64>> = ds.records().iter().take(40).map(|r| recommend(&model, &r.values).unwrap().velocities).collect();
        (model_io::to_json(&model).unwrap(), serde_json::to_string(&cv).unwrap(), recs)
    };
    let pool = |threads| rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let one = pool(1).install(everything);
    let four = pool(4).install(everything);
    let again = everything();
    let same = one == four && four == again;
    verdict(same, format!("model, CV report and 40 recommendations identical for 1 thread, 4 threads and the default pool: {same}"))
}

fn null_model(ds: &Dataset) -> Verdict {
    let mut accuracies = Vec::new();
    let mut kappas = Vec::new();
    for &seed in &SEEDS {
        let mut labels: Vec<usize> = ds.labels().collect();
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled = ds.with_labels(&labels).unwrap();
        let config = WheelConfig { seed, ..Default::default() };
        match cross_validate(&shuffled, &config, 10, seed) {
            Ok(cv) => {
                accuracies.push(cv.metrics.accuracy);
                kappas.push(cv.metrics.kappa);
            }
            Err(e) => return verdict(false, format!("seed {seed}: {e}")),
        }
    }
    let accuracy = median(accuracies);
    let kappa = median(kappas);
    verdict(
        (accuracy - MAJORITY_RATE).abs() <= 0.05 && kappa.abs() <= 0.08,
        format!("median accuracy {accuracy:.4} (0.5551 +/- 0.05), kappa {kappa:.4} (|kappa| <= 0.08)"),
    )
}

fn main() {
    let mut results: Vec<(&str, Verdict, f64)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = f();
        let secs = start.elapsed().as_secs_f64();
        println!("{} {name}: {} [{secs:.1}s]", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((name, v, secs));
    };

    run("formula oracles", &mut formula_oracles);
    run("bin-count oracle", &mut bin_count_oracle);
    run("bin-ratio statistics", &mut bin_ratio_statistics);

    match load_credit() {
        Ok(ds) => {
            let start = Instant::now();
            let runs = credit_runs(&ds);
            println!("     ({} cross-validation runs on {} records in {:.1}s)", runs.runs.len(), ds.len(), start.elapsed().as_secs_f64());
            run("UCI reproduction", &mut || uci_reproduction(&runs));
            run("confidence separation", &mut || confidence_separation(&runs));
            run("explanation contract", &mut || explanation_contract(&ds, &runs));
            run("determinism", &mut determinism);
            run("null-model sanity", &mut || null_model(&ds));
        }
        Err(reason) => {
            for name in ["UCI reproduction", "confidence separation", "explanation contract"] {
                run(name, &mut || verdict(false, reason.clone()));
            }
            run("determinism", &mut determinism);
            run("null-model sanity", &mut || verdict(false, reason.clone()));
        }
    }

    let failed = results.iter().filter(|(_, v, _)| !v.pass).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

