//! `rwheel`: train, evaluate and query random wheel models.
//!
//! Exit codes: 0 success, 2 usage, validation, input or parse errors,
//! 3 domain failures (unclassifiable observation, no informative factors).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use random_wheel::api::{model_version, FactorListing, RecommendationResponse};
use random_wheel::dataset::read_dataset;
use random_wheel::eval::cross_validate;
use random_wheel::wheel::{recommend, train};
use random_wheel::{model_io, Dataset, RandomWheelModel, WheelConfig};

#[derive(Parser)]
#[command(name = "rwheel", version, about = "Random wheel classifier for mixed tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it to a file.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        wheel: WheelArgs,
        /// Where to write the model.
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified k-fold cross-validation.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        wheel: WheelArgs,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Directory for correct.csv and wrong.csv.
        #[arg(long)]
        confidence_out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Recommend a class for one or more observations.
    Recommend {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated attribute values in schema order, `?` for missing.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "input", required_unless_present = "input")]
        values: Option<String>,
        /// File with one observation per line.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Attributes to list before "others".
        #[arg(long, default_value_t = 3)]
        top: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// List the ranked factor table of a model.
    Factors {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        top: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Comma-separated records.
    #[arg(long)]
    data: PathBuf,
    /// Schema file; defaults to the data path with a `.schema` extension.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args)]
struct WheelArgs {
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    noise_fraction: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Shuffle budget per factor importance estimate.
    #[arg(long)]
    shuffles: Option<usize>,
    /// Numeric neighborhood half-width in standard deviations.
    #[arg(long)]
    window: Option<f64>,
    #[arg(long, env = "RW_SEED")]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

impl WheelArgs {
    fn config(&self) -> anyhow::Result<WheelConfig> {
        let defaults = WheelConfig::default();
        let config = WheelConfig {
            depth: self.depth.unwrap_or(defaults.depth),
            noise_fraction: self.noise_fraction.unwrap_or(defaults.noise_fraction),
            trials: self.trials.unwrap_or(defaults.trials),
            importance_shuffles: self.shuffles.unwrap_or(defaults.importance_shuffles),
            neighbor_window: self.window.unwrap_or(defaults.neighbor_window),
            seed: self.seed.unwrap_or(defaults.seed),
        };
        config.validate()?;
        Ok(config)
    }
}

impl DataArgs {
    fn load(&self) -> anyhow::Result<Dataset> {
        let schema = self.schema.clone().unwrap_or_else(|| self.data.with_extension("schema"));
        if !schema.exists() {
            bail!("schema not found: {}", schema.display());
        }
        if !self.data.exists() {
            bail!("data not found: {}", self.data.display());
        }
        read_dataset(&self.data, &schema).with_context(|| format!("reading {}", self.data.display()))
    }
}

fn load_model(path: &Path) -> anyhow::Result<RandomWheelModel> {
    model_io::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn cmd_train(data: &DataArgs, wheel: &WheelArgs, out: &Path) -> anyhow::Result<()> {
    let config = wheel.config()?;
    let dataset = data.load()?;
    let start = Instant::now();
    let model = train(dataset, config)?;
    model_io::save(&model, out).with_context(|| format!("writing {}", out.display()))?;
    let table = model.factor_table();
    println!(
        "trained on {} records: {} factors kept, {} discarded, {:.2}s; model written to {}",
        model.dataset().len(),
        table.len(),
        table.discarded_count,
        start.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

fn cmd_evaluate(
    data: &DataArgs,
    wheel: &WheelArgs,
    k: usize,
    confidence_out: Option<&Path>,
    format: Format,
) -> anyhow::Result<()> {
    let config = wheel.config()?;
    if k < 2 {
        bail!("--k must be at least 2");
    }
    let dataset = data.load()?;
    let cv = cross_validate(&dataset, &config, k, config.seed)?;
    if let Some(dir) = confidence_out {
        cv.split.write_csvs(dir).with_context(|| format!("writing confidence files to {}", dir.display()))?;
    }
    match format {
        Format::Text => print!("{}", cv.render_text(dataset.class_tokens())),
        Format::Json => print_json(&cv)?,
    }
    Ok(())
}

fn summary_line(response: &RecommendationResponse, report: &random_wheel::AttributionReport, top: usize) -> String {
    format!(
        "Recommendation: {} ({}), Confidence: {:.1}%, Top factors: {}",
        response.label,
        if response.approve { "approve" } else { "reject" },
        100.0 * response.confidence,
        report.summary(top)
    )
}

fn cmd_recommend(
    model_path: &Path,
    values: Option<&str>,
    input: Option<&Path>,
    top: usize,
    format: Format,
) -> anyhow::Result<()> {
    let model = load_model(model_path)?;
    let version = model_version(&model)?;
    let lines: Vec<(usize, String)> = match (values, input) {
        (Some(v), _) => vec![(1, v.to_string())],
        (None, Some(path)) => std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(|(i, l)| (i + 1, l.to_string()))
            .collect(),
        (None, None) => bail!("either --values or --input is required"),
    };
    let observations = lines
        .iter()
        .map(|(n, l)| model.parse_observation(l).with_context(|| format!("observation on line {n}")))
        .collect::<anyhow::Result<Vec<_>>>()?;

    let mut responses = Vec::new();
    let mut first_failure: Option<anyhow::Error> = None;
    for ((n, _), obs) in lines.iter().zip(&observations) {
        match recommend(&model, obs) {
            Ok(rec) => {
                let (response, report) = RecommendationResponse::new(&rec, model.dataset().schema(), &version)?;
                if format == Format::Text {
                    println!("{}", summary_line(&response, &report, top));
                }
                responses.push(Some(response));
            }
            Err(e) => {
                if format == Format::Text {
                    println!("Recommendation: none, {e}");
                }
                responses.push(None);
                first_failure.get_or_insert(anyhow::Error::new(e).context(format!("observation on line {n}")));
            }
        }
    }
    if format == Format::Json {
        if values.is_some() {
            print_json(&responses[0])?;
        } else {
            print_json(&responses)?;
        }
    }
    match first_failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn cmd_factors(model_path: &Path, top: Option<usize>, format: Format) -> anyhow::Result<()> {
    if top == Some(0) {
        bail!("--top must be at least 1");
    }
    let model = load_model(model_path)?;
    match format {
        Format::Text => print!("{}", model.factor_table().render(model.dataset().schema(), top)),
        Format::Json => print_json(&FactorListing::new(&model, top))?,
    }
    Ok(())
}

fn exit_code(error: &anyhow::Error) -> u8 {
    match error.downcast_ref::<random_wheel::Error>() {
        Some(e) if e.is_domain_failure() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train { data, wheel, out } => cmd_train(data, wheel, out),
        Command::Evaluate { data, wheel, k, confidence_out, format } => {
            cmd_evaluate(data, wheel, *k, confidence_out.as_deref(), *format)
        }
        Command::Recommend { model, values, input, top, format } => {
            cmd_recommend(model, values.as_deref(), input.as_deref(), *top, *format)
        }
        Command::Factors { model, top, format } => cmd_factors(model, *top, *format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
