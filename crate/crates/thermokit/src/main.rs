//! Thin command-line front end over the library: `run` executes the
//! full pipeline, `compare` the method x embedding harness, `phantom`
//! writes a synthetic cohort to disk, and `jse-mc` runs the spiked-model
//! Monte Carlo. Exit codes: 0 success, 2 configuration error, 3 stage
//! failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use thermokit::embedding::EmbeddingKind;
use thermokit::factorize::Method;
use thermokit::jse::run_spiked_trials;
use thermokit::pipeline::{
    comparison_methods, run_comparison, run_pipeline, write_phantom_cohort, InputSpec,
    PhantomTemplate, PipelineConfig,
};
use thermokit::Error;

#[derive(Parser)]
#[command(name = "thermokit", version, about = "Dynamic-thermography analysis pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON configuration file; built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-path override, e.g. --set classifier.folds=10 or
    /// --set embedding.kind=gaussian. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write its artifacts.
    Run(ConfigArgs),
    /// Run the factorization x embedding comparison table.
    Compare {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated factorization methods (default: the 7-method table).
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
        /// Comma-separated embeddings (default: gaussian,bell,weibull).
        #[arg(long, value_delimiter = ',')]
        embeddings: Vec<String>,
    },
    /// Generate a phantom cohort to disk (healthy/ and abnormal/ subdirs).
    Phantom {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 30)]
        healthy: usize,
        #[arg(long, default_value_t = 30)]
        abnormal: usize,
    },
    /// Spiked-model Monte Carlo for the eigenvector shrinkage.
    JseMc {
        #[arg(long, default_value_t = 200)]
        p: usize,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 5.0)]
        strength: f64,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional directory for per-trial CSV and aggregate JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// 2 for configuration problems, 3 for anything that failed mid-run.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::PipelineConfig(_) | Error::Json(_) => 2,
        _ => 3,
    }
}

fn set_by_path(root: &mut serde_json::Value, path: &str, value: serde_json::Value) -> Result<(), String> {
    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        if seg.is_empty() {
            return Err(format!("empty segment in key `{path}`"));
        }
        let map = node
            .as_object_mut()
            .ok_or_else(|| format!("`{path}`: `{seg}` is not an object"))?;
        if i == segments.len() - 1 {
            map.insert((*seg).to_string(), value);
            return Ok(());
        }
        node = map
            .entry((*seg).to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    unreachable!()
}

fn load_config(args: &ConfigArgs) -> Result<PipelineConfig, Error> {
    let mut value = match &args.config {
        Some(path) => serde_json::from_slice(&fs::read(path)?)?,
        None => serde_json::to_value(PipelineConfig::default())?,
    };
    for entry in &args.set {
        let (key, raw) = entry
            .split_once('=')
            .ok_or_else(|| Error::PipelineConfig(format!("--set needs KEY=VALUE, got `{entry}`")))?;
        // Bare words become strings so `--set embedding.kind=weibull` works.
        let parsed = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        set_by_path(&mut value, key, parsed).map_err(Error::PipelineConfig)?;
    }
    let mut cfg: PipelineConfig = serde_json::from_value(value)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(jobs) = args.jobs {
        // Ignore the error if a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    Ok(cfg)
}

fn parse_method(name: &str) -> Result<Method, Error> {
    Method::ALL
        .iter()
        .copied()
        .find(|m| m.name() == name)
        .ok_or_else(|| Error::PipelineConfig(format!("unknown method `{name}`")))
}

fn parse_embedding(name: &str) -> Result<EmbeddingKind, Error> {
    EmbeddingKind::ALL
        .iter()
        .copied()
        .find(|k| k.name() == name)
        .ok_or_else(|| Error::PipelineConfig(format!("unknown embedding `{name}`")))
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Run(args) => {
            let cfg = load_config(&args)?;
            let outcome = run_pipeline(&cfg)?;
            println!(
                "accuracy_median={:.4} kappa_median={:.4} auc={:.4}",
                outcome.report.accuracy_median,
                outcome.report.kappa_median,
                outcome.report.auc
            );
            println!("report: {}", outcome.report_path.display());
            println!("manifest: {}", outcome.manifest_path.display());
        }
        Command::Compare {
            cfg: args,
            methods,
            embeddings,
        } => {
            let cfg = load_config(&args)?;
            let methods = if methods.is_empty() {
                comparison_methods()
            } else {
                methods
                    .iter()
                    .map(|m| parse_method(m))
                    .collect::<Result<_, _>>()?
            };
            let embeddings = if embeddings.is_empty() {
                EmbeddingKind::ALL.to_vec()
            } else {
                embeddings
                    .iter()
                    .map(|e| parse_embedding(e))
                    .collect::<Result<_, _>>()?
            };
            let (rows, path) = run_comparison(&cfg, &methods, &embeddings)?;
            println!("{} cells written to {}", rows.len(), path.display());
        }
        Command::Phantom {
            cfg: args,
            healthy,
            abnormal,
        } => {
            let cfg = load_config(&args)?;
            let template = match &cfg.input {
                InputSpec::PhantomCohort { template, .. } => template.clone(),
                InputSpec::Directory { .. } => PhantomTemplate::default(),
            };
            let written =
                write_phantom_cohort(healthy, abnormal, &template, cfg.master_seed, &cfg.output_dir)?;
            println!(
                "{} sequences written under {}",
                written.len(),
                cfg.output_dir.display()
            );
        }
        Command::JseMc {
            p,
            n,
            strength,
            trials,
            seed,
            out,
        } => {
            let (records, aggregate) = run_spiked_trials(p, n, strength, trials, seed)?;
            println!("{}", serde_json::to_string_pretty(&aggregate)?);
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                let mut csv = String::from("seed,angle_sample,angle_jse\n");
                for r in &records {
                    csv.push_str(&format!("{},{},{}\n", r.seed, r.angle_sample, r.angle_jse));
                }
                fs::write(dir.join("trials.csv"), csv)?;
                fs::write(
                    dir.join("aggregate.json"),
                    serde_json::to_vec_pretty(&aggregate)?,
                )?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(exit_code_for(&err))
        }
    }
}
