//! Command-line front end: fitting, pooling, simulation studies, and
//! bundled dataset access, with a reproducibility manifest next to every
//! file output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use corrtab::estimator::{Estimator, FitConfig};
use corrtab::model::QuadratureSpec;
use corrtab::report::fit_table_set;
use corrtab::sampler::SamplerConfig;
use corrtab::simulation::{
    correlation_study, performance_study, CorrelationStudyResult, GeneratorConfig,
    PerformanceStudyResult,
};
use corrtab::table::parse_table_set;
use corrtab::{datasets, Error};

#[derive(Parser)]
#[command(
    name = "corrtab",
    version,
    about = "Latent-variable analysis of 2x2 table sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the latent-variable model to each table of a set and pool.
    Fit(FitArgs),
    /// Run a simulation study.
    #[command(subcommand)]
    Simulate(StudyCommand),
    /// List or export the bundled datasets.
    #[command(subcommand)]
    Datasets(DatasetsCommand),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Table,
    Json,
    Csv,
}

#[derive(Args)]
struct FitArgs {
    /// Input file with header trial,y1,n1,y2,n2.
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Retained Metropolis-Hastings draws per chain.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 2_000)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Degenerate-cell correction.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-3)]
    sigma2_floor: f64,
    /// Two-sided test size.
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long, value_enum, default_value_t = Estimator::Mh)]
    estimator: Estimator,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
    /// Skip the combined (pooled) row.
    #[arg(long)]
    no_pool: bool,
    /// Write the report here instead of stdout; also writes
    /// <output>.manifest.json.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum StudyCommand {
    /// Distribution of the cross-table rate correlation.
    Correlation(CorrelationArgs),
    /// Estimation and testing performance with pooling.
    Performance(PerformanceArgs),
}

#[derive(Args)]
struct GeneratorArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    alpha1: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha2: f64,
    /// Latent standard deviation.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Arm-1 sizes, one per table.
    #[arg(long, value_delimiter = ',', default_values_t = [20u64, 10, 30, 5, 15])]
    n1: Vec<u64>,
    /// Arm-2 sizes, one per table.
    #[arg(long, value_delimiter = ',', default_values_t = [6u64, 20, 15, 25, 10])]
    n2: Vec<u64>,
}

#[derive(Args)]
struct CorrelationArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    /// Output prefix for <prefix>.csv, <prefix>.summary.json and the
    /// manifest.
    #[arg(short, long, default_value = "correlation_study")]
    output: PathBuf,
}

#[derive(Args)]
struct PerformanceArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 2_000)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-3)]
    sigma2_floor: f64,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long, value_enum, default_value_t = Estimator::Mh)]
    estimator: Estimator,
    #[arg(short, long, default_value = "performance_study")]
    output: PathBuf,
}

#[derive(Subcommand)]
enum DatasetsCommand {
    /// Print the bundled dataset names.
    List,
    /// Write the named dataset to stdout, byte-exact.
    Export { name: String },
}

#[derive(Serialize)]
struct RunManifest {
    command: Vec<String>,
    config: serde_json::Value,
    seed: u64,
    input_digest: Option<String>,
    tool_version: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Fit(args) => run_fit(args),
        Command::Simulate(StudyCommand::Correlation(args)) => run_correlation(args),
        Command::Simulate(StudyCommand::Performance(args)) => run_performance(args),
        Command::Datasets(DatasetsCommand::List) => {
            for (name, _) in datasets::builtin() {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Datasets(DatasetsCommand::Export { name }) => match datasets::get(&name) {
            Some(csv) => {
                print!("{csv}");
                Ok(ExitCode::SUCCESS)
            }
            None => {
                eprintln!("error: unknown dataset '{name}'");
                Ok(ExitCode::from(2))
            }
        },
    }
}

fn fit_config(args: &FitArgs) -> FitConfig {
    FitConfig {
        epsilon: args.epsilon,
        max_iters: args.max_iters,
        tol: args.tol,
        sigma2_floor: args.sigma2_floor,
        estimator: args.estimator,
        sampler: SamplerConfig {
            samples_m: args.samples,
            burn_in: args.burnin,
            thin: args.thin,
            seed: args.seed,
            ..SamplerConfig::default()
        },
        quadrature: QuadratureSpec::default(),
        level: args.level,
    }
}

fn run_fit(args: FitArgs) -> Result<ExitCode, Error> {
    let bytes = fs::read(&args.input)?;
    let text = String::from_utf8_lossy(&bytes);
    let name = args
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".to_string());
    let set = parse_table_set(&text, name)?;
    let cfg = fit_config(&args);
    cfg.validate()?;
    let report = fit_table_set(&set, &cfg, !args.no_pool)?;

    let rendered = match args.format {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Table => report.to_text(),
        OutputFormat::Csv => report.to_csv(),
    };
    if let Some(path) = &args.output {
        fs::write(path, &rendered)?;
        let manifest = RunManifest {
            command: std::env::args().collect(),
            config: serde_json::json!({
                "input": args.input,
                "fit": cfg,
                "format": format_name(args.format),
                "no_pool": args.no_pool,
            }),
            seed: args.seed,
            input_digest: Some(sha256_hex(&bytes)),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        write_manifest(path, &manifest)?;
    } else {
        print!("{rendered}");
    }

    if report.any_non_converged() {
        eprintln!("warning: some fits did not converge within --max-iters");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn generator_config(args: &GeneratorArgs, reps: usize) -> GeneratorConfig {
    GeneratorConfig {
        alpha1: args.alpha1,
        alpha2: args.alpha2,
        sigma: args.sigma,
        n1: args.n1.clone(),
        n2: args.n2.clone(),
        replications: reps,
        seed: args.seed,
    }
}

fn run_correlation(args: CorrelationArgs) -> Result<ExitCode, Error> {
    let cfg = generator_config(&args.generator, args.reps);
    let result = correlation_study(&cfg)?;

    fs::write(data_path(&args.output), correlation_csv(&result))?;
    let summary = serde_json::json!({
        "replications": cfg.replications,
        "retained": result.correlations.len(),
        "dropped": result.dropped,
        "quantiles": result.quantiles,
        "histogram": result.histogram,
    });
    fs::write(summary_path(&args.output), pretty(&summary))?;
    let manifest = RunManifest {
        command: std::env::args().collect(),
        config: serde_json::to_value(&cfg).expect("config serializes"),
        seed: cfg.seed,
        input_digest: None,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_manifest(&args.output, &manifest)?;
    println!(
        "correlation study: {} replications, {} dropped, q95 = {:.4}",
        cfg.replications, result.dropped, result.quantiles["0.95"]
    );
    Ok(ExitCode::SUCCESS)
}

fn run_performance(args: PerformanceArgs) -> Result<ExitCode, Error> {
    let cfg = generator_config(&args.generator, args.reps);
    let fit = FitConfig {
        epsilon: args.epsilon,
        max_iters: args.max_iters,
        tol: args.tol,
        sigma2_floor: args.sigma2_floor,
        estimator: args.estimator,
        sampler: SamplerConfig {
            samples_m: args.samples,
            burn_in: args.burnin,
            thin: args.thin,
            seed: args.generator.seed,
            ..SamplerConfig::default()
        },
        quadrature: QuadratureSpec::default(),
        level: args.level,
    };
    fit.validate()?;
    let result = performance_study(&cfg, &fit)?;

    fs::write(data_path(&args.output), performance_csv(&result))?;
    fs::write(
        summary_path(&args.output),
        pretty(&serde_json::to_value(&result.summary).expect("summary serializes")),
    )?;
    let manifest = RunManifest {
        command: std::env::args().collect(),
        config: serde_json::json!({ "generator": cfg, "fit": fit }),
        seed: cfg.seed,
        input_digest: None,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_manifest(&args.output, &manifest)?;
    println!(
        "performance study: {} replications, mean pooled pi = ({:.4}, {:.4}), rejection rate {:.4}",
        result.summary.replications,
        result.summary.mean_pooled_pi1,
        result.summary.mean_pooled_pi2,
        result.summary.rejection_rate
    );
    Ok(ExitCode::SUCCESS)
}

fn correlation_csv(result: &CorrelationStudyResult) -> String {
    let mut out = String::from("replication,correlation\n");
    for (rep, corr) in result.per_replication.iter().enumerate() {
        match corr {
            Some(c) => {
                let _ = writeln!(out, "{rep},{c}");
            }
            None => {
                let _ = writeln!(out, "{rep},");
            }
        }
    }
    out
}

fn performance_csv(result: &PerformanceStudyResult) -> String {
    let mut out = String::from(
        "replication,alpha1_hat,alpha2_hat,pi1_hat,pi2_hat,log_or,se_log_or,t_stat,reject\n",
    );
    for (rep, r) in result.replications.iter().enumerate() {
        let p = &r.pooled;
        let _ = writeln!(
            out,
            "{rep},{},{},{},{},{},{},{},{}",
            p.alpha1_hat,
            p.alpha2_hat,
            p.pi1_hat,
            p.pi2_hat,
            p.log_or,
            p.se_log_or,
            p.t_stat,
            u8::from(p.reject),
        );
    }
    out
}

fn data_path(prefix: &Path) -> PathBuf {
    with_suffix(prefix, ".csv")
}

fn summary_path(prefix: &Path) -> PathBuf {
    with_suffix(prefix, ".summary.json")
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_manifest(output: &Path, manifest: &RunManifest) -> Result<(), Error> {
    let path = with_suffix(output, ".manifest.json");
    fs::write(
        path,
        pretty(&serde_json::to_value(manifest).expect("manifest serializes")),
    )?;
    Ok(())
}

fn pretty(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json renders");
    s.push('\n');
    s
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

fn format_name(f: OutputFormat) -> &'static str {
    match f {
        OutputFormat::Table => "table",
        OutputFormat::Json => "json",
        OutputFormat::Csv => "csv",
    }
}
