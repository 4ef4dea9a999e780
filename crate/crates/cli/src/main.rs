//! Command-line driver: generate instances, verify and measure them, replay the
//! pipeline, sweep over scales and fit box-counting exponents.

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use furst::generators::{generate, FurstInstance, GeneratorKind};
use furst::pipeline::{run_pipeline, PipelineParams, PipelineTrace, DEFAULT_EPS, STAGES};
use furst::statistics::{exponent_fit, instance_statistics, write_csv, ExponentFit};
use furst::{Error, Scale};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "furst", version, about = "Exact-counting workbench for discretized Furstenberg sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate instances into per-run directories.
    Generate(ConfigArgs),
    /// Reload an instance directory and recheck its invariants.
    Verify { dir: PathBuf },
    /// Pair counts, stabbing numbers and the pairwise-intersection bound of an instance.
    Stats {
        dir: PathBuf,
        /// Also write the diagnostic rows as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Replay the incidence pipeline.
    Pipeline {
        #[command(subcommand)]
        command: PipelineCommand,
    },
    /// Generate, measure and run the pipeline over every (k, seed) of a config.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Skip the pipeline and only record instance statistics.
        #[arg(long)]
        no_pipeline: bool,
    },
    /// Fit `log₂|E|` against `k` from a sweep CSV and compare with the known bounds.
    Fit {
        csv: PathBuf,
        /// Write the fit as JSON here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PipelineCommand {
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 0.4)]
    alpha: f64,
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    #[arg(long, default_value_t = 8)]
    k: u32,
    #[arg(long, default_value = "cantor_target")]
    generator: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
    /// Overrides the measured γ.
    #[arg(long)]
    gamma: Option<f64>,
    /// Run on a previously generated instance instead of generating one.
    #[arg(long, conflicts_with_all = ["alpha", "beta", "k", "generator"])]
    instance: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// Either a JSON config file or the same fields as flags.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    k_min: Option<u32>,
    #[arg(long)]
    k_max: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineOverrides {
    eps: Option<f64>,
    gamma: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentConfig {
    generator: GeneratorKind,
    alpha: f64,
    beta: f64,
    k_min: u32,
    k_max: u32,
    seeds: Vec<u64>,
    #[serde(default)]
    pipeline: PipelineOverrides,
    out: PathBuf,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), Error> {
        for k in [self.k_min, self.k_max] {
            Scale::new(k)?;
        }
        if self.k_min > self.k_max {
            return Err(Error::InvalidParameter(format!("k_min {} exceeds k_max {}", self.k_min, self.k_max)));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("at least one seed is required".into()));
        }
        if self.generator == GeneratorKind::Custom {
            return Err(Error::InvalidParameter("custom instances cannot be generated".into()));
        }
        Ok(())
    }

    fn runs(&self) -> Vec<(u32, u64)> {
        (self.k_min..=self.k_max).flat_map(|k| self.seeds.iter().map(move |&s| (k, s))).collect()
    }

    fn run_dir(&self, k: u32, seed: u64) -> PathBuf {
        self.out.join(format!("{}_k{k:02}_s{seed}", self.generator))
    }
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Degenerate(anyhow::Error),
    Invariant(anyhow::Error),
    Other(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Config(_) => 2,
            Failure::Degenerate(_) => 3,
            Failure::Invariant(_) => 4,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let class = e.chain().find_map(|c| c.downcast_ref::<Error>()).map(|c| match c {
            Error::Degenerate(_) => 3,
            Error::InvariantViolation(_) => 4,
            Error::Io(_) => 1,
            _ => 2,
        });
        if e.chain().any(|c| c.downcast_ref::<serde_json::Error>().is_some() || c.downcast_ref::<csv::Error>().is_some()) {
            return Failure::Config(e);
        }
        match class {
            Some(2) => Failure::Config(e),
            Some(3) => Failure::Degenerate(e),
            Some(4) => Failure::Invariant(e),
            _ => Failure::Other(e),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::new(e).into()
    }
}

type CliResult<T> = Result<T, Failure>;

fn config_error(msg: String) -> Failure {
    Failure::Config(anyhow::anyhow!(msg))
}

fn load_config(args: &ConfigArgs) -> CliResult<ExperimentConfig> {
    let cfg = if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(out) = &args.out {
            cfg.out = out.clone();
        }
        cfg
    } else {
        let missing = |name: &str| config_error(format!("--{name} is required without --config"));
        ExperimentConfig {
            generator: args.generator.as_deref().ok_or_else(|| missing("generator"))?.parse()?,
            alpha: args.alpha.ok_or_else(|| missing("alpha"))?,
            beta: args.beta.ok_or_else(|| missing("beta"))?,
            k_min: args.k_min.ok_or_else(|| missing("k-min"))?,
            k_max: args.k_max.or(args.k_min).ok_or_else(|| missing("k-max"))?,
            seeds: args.seeds.clone().unwrap_or_else(|| vec![0]),
            pipeline: PipelineOverrides::default(),
            out: args.out.clone().ok_or_else(|| missing("out"))?,
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Other(e.into()))?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_generate(args: &ConfigArgs) -> CliResult<()> {
    let cfg = load_config(args)?;
    std::fs::create_dir_all(&cfg.out).context("creating output directory")?;
    write_json(&cfg.out.join("config.json"), &cfg)?;
    for (k, seed) in cfg.runs() {
        let inst = generate(cfg.generator, cfg.alpha, cfg.beta, Scale::new(k)?, seed)?;
        let dir = cfg.run_dir(k, seed);
        inst.write_dir(&dir)?;
        println!("{}: {} lines, {} cells", dir.display(), inst.len(), inst.e_union.len());
    }
    Ok(())
}

fn cmd_verify(dir: &Path) -> CliResult<()> {
    let inst = FurstInstance::read_dir(dir)?;
    println!("{}", serde_json::to_string_pretty(&inst.invariants).map_err(|e| Failure::Other(e.into()))?);
    if !inst.invariants.holds() {
        return Err(Error::InvariantViolation(format!("{} fails its invariants", dir.display())).into());
    }
    Ok(())
}

fn cmd_stats(dir: &Path, csv_path: Option<&Path>) -> CliResult<()> {
    let inst = FurstInstance::read_dir(dir)?;
    let stats = instance_statistics(&inst)?;
    println!("{}", serde_json::to_string_pretty(&stats).map_err(|e| Failure::Other(e.into()))?);
    if let Some(path) = csv_path {
        write_csv(path, &stats.rows())?;
    }
    Ok(())
}

fn params_for(inst: &FurstInstance, eps: f64, gamma: Option<f64>) -> CliResult<PipelineParams> {
    Ok(match gamma {
        Some(g) => PipelineParams::new(inst.alpha, g, eps)?,
        None => PipelineParams::for_instance(inst, eps)?,
    })
}

fn cmd_pipeline_run(args: &RunArgs) -> CliResult<()> {
    let inst = match &args.instance {
        Some(dir) => FurstInstance::read_dir(dir)?,
        None => generate(args.generator.parse()?, args.alpha, args.beta, Scale::new(args.k)?, args.seed)?,
    };
    let params = params_for(&inst, args.eps, args.gamma)?;
    let trace = run_pipeline(&inst, &params, args.seed)?;
    trace.write_artifacts(&args.out)?;
    report_trace(&trace);
    Ok(())
}

fn report_trace(trace: &PipelineTrace) {
    println!("{:<28} {:>14} {:>14} {:>12}", "stage", "measured", "predicted", "ratio");
    for s in &trace.stages {
        println!("{:<28} {:>14.6e} {:>14.6e} {:>12.4e}", s.stage, s.measured, s.predicted, s.ratio);
    }
    let acc = &trace.accounting;
    println!(
        "certified |E| >= {:.6e} (actual {:.6e}, sound: {}), gamma measured {:.4}",
        acc.certified_bound, acc.e_measure, acc.sound, acc.gamma_measured
    );
}

/// One row of the sweep table. Stage ratios follow in the order of [`STAGES`].
#[derive(Clone, Debug, Serialize, Deserialize)]
struct SweepRow {
    generator: String,
    alpha: f64,
    beta: f64,
    k: u32,
    seed: u64,
    e_cells: u64,
    e_measure: f64,
    gamma_measured: f64,
    appendix_ratio: f64,
    /// `ok`, `degenerate:<stage>`, `skipped` or `skipped:alpha>1/2`.
    pipeline: String,
    certified_bound: Option<f64>,
}

fn sweep_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "generator",
        "alpha",
        "beta",
        "k",
        "seed",
        "e_cells",
        "e_measure",
        "gamma_measured",
        "appendix_ratio",
        "pipeline",
        "certified_bound",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(STAGES.iter().map(|s| format!("ratio_{s}")));
    h
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

fn sweep_one(cfg: &ExperimentConfig, k: u32, seed: u64, no_pipeline: bool) -> CliResult<Vec<String>> {
    let inst = generate(cfg.generator, cfg.alpha, cfg.beta, Scale::new(k)?, seed)?;
    let stats = instance_statistics(&inst)?;
    let dir = cfg.run_dir(k, seed);
    std::fs::create_dir_all(&dir).context("creating run directory")?;
    write_json(&dir.join("stats.json"), &stats)?;
    let mut ratios: Vec<Option<f64>> = vec![None; STAGES.len()];
    let (status, certified) = if no_pipeline {
        ("skipped".to_string(), None)
    } else if !(inst.alpha > 0.0 && inst.alpha <= 0.5) {
        ("skipped:alpha>1/2".to_string(), None)
    } else {
        let eps = cfg.pipeline.eps.unwrap_or(DEFAULT_EPS);
        let params = params_for(&inst, eps, cfg.pipeline.gamma)?;
        match run_pipeline(&inst, &params, seed) {
            Ok(trace) => {
                trace.write_artifacts(&dir.join("pipeline"))?;
                for s in &trace.stages {
                    if let Some(n) = STAGES.iter().position(|&name| name == s.stage) {
                        ratios[n] = Some(s.ratio);
                    }
                }
                ("ok".to_string(), Some(trace.accounting.certified_bound))
            }
            Err(Error::Degenerate(stage)) => (format!("degenerate:{stage}"), None),
            Err(e) => return Err(e.into()),
        }
    };
    let row = SweepRow {
        generator: cfg.generator.to_string(),
        alpha: cfg.alpha,
        beta: cfg.beta,
        k,
        seed,
        e_cells: inst.e_union.len(),
        e_measure: inst.e_measure(),
        gamma_measured: stats.pairs.gamma_measured,
        appendix_ratio: stats.appendix.ratio,
        pipeline: status,
        certified_bound: certified,
    };
    let mut rec = vec![
        row.generator,
        row.alpha.to_string(),
        row.beta.to_string(),
        row.k.to_string(),
        row.seed.to_string(),
        row.e_cells.to_string(),
        format!("{:e}", row.e_measure),
        row.gamma_measured.to_string(),
        row.appendix_ratio.to_string(),
        row.pipeline,
        fmt_opt(row.certified_bound),
    ];
    rec.extend(ratios.into_iter().map(fmt_opt));
    Ok(rec)
}

fn cmd_sweep(args: &ConfigArgs, no_pipeline: bool) -> CliResult<()> {
    use rayon::prelude::*;
    let cfg = load_config(args)?;
    std::fs::create_dir_all(&cfg.out).context("creating output directory")?;
    write_json(&cfg.out.join("config.json"), &cfg)?;
    let rows: Vec<Vec<String>> =
        cfg.runs().par_iter().map(|&(k, seed)| sweep_one(&cfg, k, seed, no_pipeline)).collect::<CliResult<_>>()?;
    let path = cfg.out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).context("creating sweep.csv")?;
    w.write_record(sweep_header()).context("writing sweep.csv")?;
    for r in &rows {
        w.write_record(r).context("writing sweep.csv")?;
    }
    w.flush().context("writing sweep.csv")?;
    println!("wrote {} rows to {}", rows.len(), path.display());
    match fit_csv(&path) {
        Ok(report) => {
            write_json(&cfg.out.join("fit.json"), &report)?;
            println!("fitted dimension {:.4}", report.fit.dimension);
        }
        Err(Failure::Config(e)) => eprintln!("fit skipped: {e:#}"),
        Err(e) => return Err(e),
    }
    Ok(())
}

/// Lower bounds for the Furstenberg problem, evaluated at the sweep's `(α, β)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct BoundRow {
    name: String,
    value: f64,
    fitted_minus_bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct FitReport {
    alpha: f64,
    beta: f64,
    fit: ExponentFit,
    bounds: Vec<BoundRow>,
}

#[derive(Deserialize)]
struct FitInput {
    alpha: f64,
    beta: f64,
    k: u32,
    e_measure: f64,
}

fn fit_csv(path: &Path) -> CliResult<FitReport> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut runs = Vec::new();
    let mut ab = None;
    for (n, rec) in rdr.deserialize::<FitInput>().enumerate() {
        let rec = rec.with_context(|| format!("{} row {}", path.display(), n + 1))?;
        match ab {
            None => ab = Some((rec.alpha, rec.beta)),
            Some(p) if p != (rec.alpha, rec.beta) => {
                return Err(config_error(format!("row {} mixes exponents {p:?} and {:?}", n + 1, (rec.alpha, rec.beta))))
            }
            _ => {}
        }
        runs.push((Scale::new(rec.k)?, rec.e_measure));
    }
    let (alpha, beta) = ab.ok_or_else(|| config_error(format!("{} has no rows", path.display())))?;
    let fit = exponent_fit(&runs)?;
    let d = fit.dimension;
    let bounds = [
        ("max(2a+b-1, a+b/2)", (2.0 * alpha + beta - 1.0).max(alpha + beta / 2.0)),
        ("a+min(b,a)", alpha + beta.min(alpha)),
        ("2a", 2.0 * alpha),
    ]
    .into_iter()
    .map(|(name, value)| BoundRow { name: name.into(), value, fitted_minus_bound: d - value })
    .collect();
    Ok(FitReport { alpha, beta, fit, bounds })
}

fn cmd_fit(path: &Path, out: Option<&Path>) -> CliResult<()> {
    let report = fit_csv(path)?;
    println!(
        "dimension {:.4} (slope {:.4}, rms residual {:.4}, {} samples)",
        report.fit.dimension,
        report.fit.slope,
        report.fit.residual,
        report.fit.samples.len()
    );
    for b in &report.bounds {
        println!("  {:<20} {:>8.4}  fitted - bound = {:+.4}", b.name, b.value, b.fitted_minus_bound);
    }
    if let Some(out) = out {
        write_json(out, &report)?;
    }
    Ok(())
}

fn init_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("FURST_THREADS") {
        let n: usize = v.parse().map_err(|_| config_error(format!("FURST_THREADS must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(config_error("FURST_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Other(e.into()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads()?;
    match &cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Verify { dir } => cmd_verify(dir),
        Command::Stats { dir, csv } => cmd_stats(dir, csv.as_deref()),
        Command::Pipeline { command: PipelineCommand::Run(args) } => cmd_pipeline_run(args),
        Command::Sweep { config, no_pipeline } => cmd_sweep(config, *no_pipeline),
        Command::Fit { csv, out } => cmd_fit(csv, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.code();
            let (Failure::Config(e) | Failure::Degenerate(e) | Failure::Invariant(e) | Failure::Other(e)) = f;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
