//! `hyperrect` command-line front end.

mod config;
mod model_file;
mod table;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use hyperrect::cqhr::ReferenceDim;
use hyperrect::method::{fit_method, Method, MethodConfig, RegionPredictor};
use hyperrect::metrics::{run_permutations, run_replicated, MethodStudy, RunOptions};
use hyperrect::models::{Basis, FeatureMap};
use hyperrect::region::MiscoverageConfig;
use hyperrect::rng::seeded;
use hyperrect::simgen::ScenarioSpec;
use hyperrect::split::make_split;
use serde::Serialize;

use config::SimulationConfig;
use model_file::ModelFile;
use table::{write_rows, Table};

/// Errors split by exit code: usage problems exit 2, everything else 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(anyhow::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Run(e)
    }
}

impl From<hyperrect::Error> for CliError {
    fn from(e: hyperrect::Error) -> Self {
        CliError::Run(e.into())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "hyperrect",
    version,
    about = "Conformal hyperrectangular prediction regions for multi-target regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo study on a built-in or configured scenario.
    Simulate(SimulateArgs),
    /// Draw one dataset from a scenario and write it as CSV.
    Generate(GenerateArgs),
    /// Fit a predictor on a CSV file and save it.
    Fit(FitArgs),
    /// Predict boxes for the rows of a CSV file.
    Predict(PredictArgs),
    /// Repeated random splits of one CSV file into fit and test rows.
    Permute(PermuteArgs),
}

fn parse_reference(s: &str) -> Result<ReferenceDim, String> {
    if s == "min-variability" {
        return Ok(ReferenceDim::MinVariability);
    }
    s.parse()
        .map(ReferenceDim::Index)
        .map_err(|_| format!("expected a 0-based dimension index or min-variability, got {s:?}"))
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: hyperrect::Error| e.to_string())
}

#[derive(Args)]
struct ScenarioArgs {
    /// Built-in scenario name.
    #[arg(long, conflicts_with = "config")]
    builtin: Option<String>,
    /// Variant of a built-in scenario, e.g. `hetero` or `r2-hetero`.
    #[arg(long)]
    variant: Option<String>,
    /// JSON or TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ScenarioArgs {
    fn load(&self) -> CliResult<SimulationConfig> {
        match (&self.builtin, &self.config) {
            (Some(name), None) => Ok(SimulationConfig::for_builtin(name, self.variant.clone())),
            (None, Some(path)) => {
                let mut cfg = SimulationConfig::load(path)?;
                if self.variant.is_some() {
                    cfg.variant = self.variant.clone();
                }
                Ok(cfg)
            }
            _ => Err(CliError::usage("give --builtin or --config")),
        }
    }
}

#[derive(Args)]
struct MethodArgs {
    /// Nominal miscoverage level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Reference dimension (0-based) or `min-variability`.
    #[arg(long, value_parser = parse_reference)]
    reference_dim: Option<ReferenceDim>,
    /// First-fold coverage of the CHR methods (default 1 - alpha).
    #[arg(long)]
    initial_coverage: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Methods, comma separated.
    #[arg(long = "method", value_delimiter = ',', value_parser = parse_method)]
    methods: Vec<Method>,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long)]
    replicates: Option<usize>,
    /// Test points per replicate.
    #[arg(long)]
    ntest: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Rows to draw (default: the scenario's fit and test sizes).
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisKind {
    Linear,
    Quadratic,
}

impl BasisKind {
    fn basis(self, d: usize) -> Basis {
        Basis::Shared(match self {
            BasisKind::Linear => FeatureMap::linear(d),
            BasisKind::Quadratic => FeatureMap::quadratic(d),
        })
    }
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Response columns, comma separated; every other column is a covariate.
    #[arg(long, value_delimiter = ',', required = true)]
    targets: Vec<String>,
    /// Covariate expansion shared by all targets.
    #[arg(long, value_enum, default_value_t = BasisKind::Linear)]
    basis: BasisKind,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = parse_method, default_value = "cqhr")]
    method: Method,
    #[command(flatten)]
    options: MethodArgs,
    /// Fractions of rows for (train, cal1, cal2).
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.25,0.25")]
    split: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    model_out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV holding at least the model's covariate columns.
    #[arg(long)]
    data: PathBuf,
    /// Output CSV (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PermuteArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long = "method", value_delimiter = ',', value_parser = parse_method, default_value = "cqhr")]
    methods: Vec<Method>,
    #[command(flatten)]
    options: MethodArgs,
    /// Rows for (train, cal1, cal2); the rest are test rows.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

fn method_configs(methods: &[Method], options: &MethodArgs) -> CliResult<Vec<MethodConfig>> {
    let alpha = options.alpha.unwrap_or(0.1);
    MiscoverageConfig::new(alpha).map_err(|e| CliError::usage(e.to_string()))?;
    Ok(methods
        .iter()
        .map(|&method| MethodConfig {
            method,
            alpha,
            reference: options.reference_dim.unwrap_or_default(),
            initial_coverage: options.initial_coverage,
        })
        .collect())
}

/// Contents of `aggregate.json`.
#[derive(Serialize)]
struct StudyOutput<'a> {
    schema_version: u32,
    source: &'a str,
    seed: u64,
    replicates: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_test: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sizes: Option<[usize; 3]>,
    targets: &'a [String],
    methods: Vec<MethodOutput<'a>>,
}

#[derive(Serialize)]
struct MethodOutput<'a> {
    method: String,
    config: &'a MethodConfig,
    #[serde(flatten)]
    aggregate: &'a hyperrect::metrics::Aggregate,
}

fn write_replicates(path: &Path, targets: &[String], studies: &[MethodStudy]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let mut header: Vec<String> = [
        "method",
        "replicate",
        "n_test",
        "coverage",
        "balance",
        "mean_volume",
        "unbounded",
    ]
    .map(String::from)
    .to_vec();
    header.extend(targets.iter().map(|t| format!("marginal_{t}")));
    header.extend(targets.iter().map(|t| format!("length_{t}")));
    w.write_record(&header)?;
    for s in studies {
        for (r, rep) in s.reports.iter().enumerate() {
            let mut row = vec![
                s.config.method.to_string(),
                r.to_string(),
                rep.n_test.to_string(),
                rep.coverage.to_string(),
                rep.balance.to_string(),
                rep.mean_volume.to_string(),
                rep.unbounded.to_string(),
            ];
            row.extend(rep.marginal_coverage.iter().map(f64::to_string));
            row.extend(rep.mean_lengths.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn print_summary(studies: &[MethodStudy]) {
    for s in studies {
        let a = &s.aggregate;
        let marg: Vec<String> = a.marginal_coverage.iter().map(|m| format!("{:.4}", m.mean)).collect();
        println!(
            "{:<10} coverage {:.4} (se {:.4})  volume {:.4}  balance {:.4}  marginals [{}]",
            s.config.method,
            a.coverage.mean,
            a.coverage.se,
            a.mean_volume.mean,
            a.balance.mean,
            marg.join(", ")
        );
        if a.unbounded_replicates > 0 {
            println!("{:<10} {} replicates had unbounded boxes", "", a.unbounded_replicates);
        }
    }
}

fn target_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("y{j}")).collect()
}

fn simulate(args: SimulateArgs) -> CliResult {
    let mut cfg = args.scenario.load()?;
    if !args.methods.is_empty() {
        cfg.methods = args.methods;
    }
    if let Some(a) = args.method.alpha {
        cfg.alpha = a;
    }
    if let Some(r) = args.method.reference_dim {
        cfg.reference = r;
    }
    if args.method.initial_coverage.is_some() {
        cfg.initial_coverage = args.method.initial_coverage;
    }
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    if let Some(n) = args.ntest {
        cfg.n_test = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    MiscoverageConfig::new(cfg.alpha).map_err(|e| CliError::usage(e.to_string()))?;
    if cfg.replicates == 0 || cfg.n_test == 0 {
        return Err(CliError::usage("replicates and ntest must be positive"));
    }
    let spec = cfg.resolve_scenario()?;
    let opts = RunOptions {
        replicates: cfg.replicates,
        n_test: cfg.n_test,
        seed: cfg.seed,
        jobs: args.jobs,
    };
    let studies = run_replicated(&spec, &cfg.method_configs(), &opts)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let targets = target_names(spec.p());
    write_replicates(&args.out.join("replicates.csv"), &targets, &studies)?;
    write_json(
        &args.out.join("aggregate.json"),
        &study_output(&spec.name, &opts, Some(cfg.n_test), None, &targets, &studies),
    )?;
    write_json(&args.out.join("config.json"), &cfg)?;
    println!(
        "{}: {} replicates x {} test points",
        spec.name, cfg.replicates, cfg.n_test
    );
    print_summary(&studies);
    Ok(())
}

fn study_output<'a>(
    source: &'a str,
    opts: &RunOptions,
    n_test: Option<usize>,
    sizes: Option<[usize; 3]>,
    targets: &'a [String],
    studies: &'a [MethodStudy],
) -> StudyOutput<'a> {
    StudyOutput {
        schema_version: config::SCHEMA_VERSION,
        source,
        seed: opts.seed,
        replicates: opts.replicates,
        n_test,
        sizes,
        targets,
        methods: studies
            .iter()
            .map(|s| MethodOutput {
                method: s.config.method.to_string(),
                config: &s.config,
                aggregate: &s.aggregate,
            })
            .collect(),
    }
}

fn open_output(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn generate(args: GenerateArgs) -> CliResult {
    let cfg = args.scenario.load()?;
    let spec: ScenarioSpec = cfg.resolve_scenario()?;
    let n = args.rows.unwrap_or(spec.sizes.fit_rows() + spec.sizes.test);
    if n == 0 {
        return Err(CliError::usage("rows must be positive"));
    }
    let data = spec.sample(n, &mut seeded(args.seed.unwrap_or(spec.seed), 0))?;
    let mut headers: Vec<String> = (1..=spec.d()).map(|k| format!("x{k}")).collect();
    headers.extend(target_names(spec.p()));
    let rows = data
        .x()
        .iter_rows()
        .zip(data.y().iter_rows())
        .map(|(x, y)| x.iter().chain(y).copied().collect());
    write_rows(open_output(&args.out)?, &headers, rows)?;
    Ok(())
}

fn fit(args: FitArgs) -> CliResult {
    let fractions: [f64; 3] = args
        .split
        .as_slice()
        .try_into()
        .map_err(|_| CliError::usage("--split takes three fractions"))?;
    let cfg = method_configs(&[args.method], &args.options)?.remove(0);
    let table = Table::read_path(&args.data.data)?;
    let (data, covariates) = table.dataset(&args.data.targets)?;
    let split = make_split(data.len(), fractions, args.seed)?;
    let basis = args.data.basis.basis(data.n_covariates());
    let predictor = fit_method(&cfg, &data, &split, &basis)?;
    for w in predictor.warnings() {
        eprintln!("warning: {w}");
    }
    let model = ModelFile::new(cfg, args.seed, split.sizes(), covariates, args.data.targets, predictor);
    model.save(&args.model_out)?;
    let [a, b, c] = split.sizes();
    println!(
        "fitted {} on {a} training rows and {} calibration rows; model written to {}",
        cfg.method,
        b + c,
        args.model_out.display()
    );
    Ok(())
}

fn predict(args: PredictArgs) -> CliResult {
    let model = ModelFile::load(&args.model)?;
    let table = Table::read_path(&args.data)?;
    let x = table.select(&model.covariates).context("model schema mismatch")?;
    let mut headers = Vec::new();
    for t in &model.targets {
        headers.push(format!("{t}_lo"));
        headers.push(format!("{t}_hi"));
    }
    let rows = x
        .iter_rows()
        .map(|row| {
            let r = model.predictor.predict(row)?;
            Ok(r.lo().iter().zip(r.hi()).flat_map(|(l, h)| [*l, *h]).collect())
        })
        .collect::<hyperrect::Result<Vec<Vec<f64>>>>()?;
    write_rows(open_output(&args.out)?, &headers, rows)?;
    Ok(())
}

fn permute(args: PermuteArgs) -> CliResult {
    let sizes: [usize; 3] = args
        .sizes
        .as_slice()
        .try_into()
        .map_err(|_| CliError::usage("--sizes takes three row counts"))?;
    if args.permutations == 0 {
        return Err(CliError::usage("permutations must be positive"));
    }
    let methods = method_configs(&args.methods, &args.options)?;
    let table = Table::read_path(&args.data.data)?;
    let (data, _) = table.dataset(&args.data.targets)?;
    let basis = args.data.basis.basis(data.n_covariates());
    let opts = RunOptions {
        replicates: args.permutations,
        n_test: 0,
        seed: args.seed,
        jobs: args.jobs,
    };
    let studies = run_permutations(&data, &basis, sizes, &methods, &opts)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let targets = &args.data.targets;
    write_replicates(&args.out.join("replicates.csv"), targets, &studies)?;
    let source = args.data.data.display().to_string();
    write_json(
        &args.out.join("aggregate.json"),
        &study_output(&source, &opts, None, Some(sizes), targets, &studies),
    )?;
    println!(
        "{source}: {} permutations, test rows {}",
        args.permutations,
        data.len() - sizes.iter().sum::<usize>()
    );
    print_summary(&studies);
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Generate(a) => generate(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Permute(a) => permute(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
