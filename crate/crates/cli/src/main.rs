use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ppmbench::bench::{emit_reports, run_matrix, BenchError, BenchmarkConfig, RunStatus};
use ppmbench::eventlog::{augment_eoc, compute_stats, parse_csv, CsvSchema, EventLog};
use ppmbench::inference::{DecodeConfig, Strategy};
use ppmbench::metrics::{evaluate_protocol, RemainingPathway, Tasks};
use ppmbench::models::{
    gradcheck_architecture, train, Architecture, MarkovConfig, MlpInput, ModelSpec, CHECKED_ARCHITECTURES,
};
use ppmbench::nnkernel::CellKind;
use ppmbench::splitting::{temporal_split, SplitFractions, SplitLog};
use ppmbench::AnyModel;

/// Overrides the output directory when `--out` is not given.
const OUT_ENV: &str = "PPMBENCH_OUT";
const GRADCHECK_GATE: f64 = 1e-4;
const MANIFEST_FILE: &str = "split_manifest.csv";

/// Benchmark toolbox for next-activity, suffix and remaining-time prediction
/// on event logs.
#[derive(Parser, Debug)]
#[command(name = "ppmbench", version, about)]
struct Cli {
    /// Seed for training and sampling (overrides the config's master seed)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Parallel benchmark cells
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print log statistics
    Stats {
        log: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        /// Print a CSV row instead of the aligned table
        #[arg(long)]
        csv: bool,
    },
    /// Split a log chronologically and write the case manifest
    Split {
        log: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        #[command(flatten)]
        fractions: FractionArgs,
    },
    /// Train one model on the train part of a log and save a checkpoint
    Train {
        log: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        #[command(flatten)]
        fractions: FractionArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Evaluate a checkpoint on the test part of a log
    Evaluate {
        log: PathBuf,
        /// Checkpoint directory written by `train`
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        #[command(flatten)]
        fractions: FractionArgs,
        /// Split manifest to reuse instead of re-splitting
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = StrategyArg::Argmax)]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 3)]
        beam_width: usize,
        #[arg(long, value_enum, default_value_t = PathwayArg::Recursive)]
        remaining: PathwayArg,
    },
    /// Run a benchmark matrix from a TOML config
    Benchmark { config: PathBuf },
    /// Check backpropagation against finite differences for an architecture
    Gradcheck {
        /// One of mlp, rnn, lstm, gru, autoencoder
        arch: String,
    },
}

#[derive(Args, Debug)]
struct SchemaArgs {
    #[arg(long, default_value = "case_id")]
    case_id: String,
    #[arg(long, default_value = "activity")]
    activity: String,
    #[arg(long, default_value = "timestamp")]
    timestamp: String,
    /// chrono format string for the timestamp column
    #[arg(long)]
    timestamp_format: Option<String>,
}

impl SchemaArgs {
    fn schema(&self) -> CsvSchema {
        CsvSchema {
            timestamp_format: self.timestamp_format.clone(),
            ..CsvSchema::new(&self.case_id, &self.activity, &self.timestamp)
        }
    }
}

#[derive(Args, Debug)]
struct FractionArgs {
    #[arg(long = "train-fraction", default_value_t = 0.64)]
    train: f64,
    #[arg(long = "val-fraction", default_value_t = 0.16)]
    val: f64,
}

impl FractionArgs {
    fn fractions(&self) -> SplitFractions {
        SplitFractions {
            train: self.train,
            val: self.val,
        }
    }
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model spec as TOML (the fields of a benchmark `[[models]]` entry)
    #[arg(long, conflicts_with = "kind")]
    model: Option<PathBuf>,
    /// Built-in model with default hyperparameters
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Hidden width for mlp and recurrent kinds
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KindArg {
    Markov,
    Mlp,
    Rnn,
    Lstm,
    Gru,
    Autoencoder,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum StrategyArg {
    Argmax,
    Random,
    Beam,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PathwayArg {
    Recursive,
    Direct,
}

/// Errors that should exit with status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn out_dir(cli: &Cli) -> Option<PathBuf> {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

fn default_out(cli: &Cli) -> PathBuf {
    out_dir(cli).unwrap_or_else(|| PathBuf::from("ppmbench-out"))
}

fn read_log(path: &Path, schema: &SchemaArgs) -> Result<EventLog> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_csv(BufReader::new(file), &schema.schema()).with_context(|| format!("reading {}", path.display()))
}

fn split_log(path: &Path, schema: &SchemaArgs, fractions: &FractionArgs) -> Result<SplitLog> {
    let log = augment_eoc(&read_log(path, schema)?)?;
    temporal_split(&log, fractions.fractions()).map_err(|e| usage(e.to_string()))
}

fn write_manifest(split: &SplitLog, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(MANIFEST_FILE);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    split.write_manifest(file)?;
    Ok(path)
}

fn model_spec(args: &ModelArgs, seed: Option<u64>) -> Result<ModelSpec> {
    let mut spec = match (&args.model, args.kind) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str::<ModelSpec>(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        (None, Some(kind)) => {
            let hidden = args.hidden.unwrap_or(64);
            let recurrent = |cell| Architecture::Recurrent {
                cell,
                hidden,
                layers: 2,
                embedding_dim: 8,
            };
            ModelSpec::new(match kind {
                KindArg::Markov => Architecture::Markov(MarkovConfig::default()),
                KindArg::Mlp => Architecture::Mlp {
                    hidden: vec![hidden],
                    input: MlpInput::PrefixesPadded,
                },
                KindArg::Rnn => recurrent(CellKind::Rnn),
                KindArg::Lstm => recurrent(CellKind::Lstm),
                KindArg::Gru => recurrent(CellKind::Gru),
                // Every autoencoder field has a serde default.
                KindArg::Autoencoder => toml::from_str("kind = \"autoencoder\"")?,
            })
        }
        (None, None) => return Err(usage("train needs --model <FILE> or --kind <KIND>")),
    };
    if let Some(e) = args.epochs {
        spec.training.epochs = e;
    }
    if let Some(s) = seed {
        spec.training.seed = s;
    }
    spec.validate().map_err(|e| usage(e.to_string()))?;
    Ok(spec)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Stats { log, schema, csv } => {
            let stats = compute_stats(&read_log(log, schema)?)?;
            print!("{}", if *csv { stats.to_csv() } else { stats.to_table() });
        }
        Command::Split { log, schema, fractions } => {
            let split = split_log(log, schema, fractions)?;
            let path = write_manifest(&split, &default_out(cli))?;
            println!(
                "train {} / validation {} / test {} traces",
                split.train.num_traces(),
                split.validation.num_traces(),
                split.test.num_traces()
            );
            println!("manifest {} (sha256 {})", path.display(), split.manifest_hash());
        }
        Command::Train {
            log,
            schema,
            fractions,
            model,
        } => {
            let spec = model_spec(model, cli.seed)?;
            let split = split_log(log, schema, fractions)?;
            let out = default_out(cli);
            write_manifest(&split, &out)?;
            let mut m = AnyModel::from_spec(&spec).map_err(|e| usage(e.to_string()))?;
            let report = train(&mut m, &split)?;
            let ckpt = out.join("model");
            m.save(&ckpt)?;
            match report.best_val_loss() {
                Some(l) => println!(
                    "{}: best validation loss {l:.6} at epoch {} of {}",
                    spec.kind_name(),
                    report.best_epoch + 1,
                    report.val_losses.len()
                ),
                None => println!("{}: fitted", spec.kind_name()),
            }
            println!("checkpoint {}", ckpt.display());
        }
        Command::Evaluate {
            log,
            checkpoint,
            schema,
            fractions,
            manifest,
            strategy,
            beam_width,
            remaining,
        } => {
            let model = AnyModel::load(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            let split = match manifest {
                Some(path) => {
                    let full = augment_eoc(&read_log(log, schema)?)?;
                    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                    SplitLog::from_manifest(&full, file)?
                }
                None => split_log(log, schema, fractions)?,
            };
            let decode = DecodeConfig {
                strategy: match strategy {
                    StrategyArg::Argmax => Strategy::Argmax,
                    StrategyArg::Random => Strategy::Random,
                    StrategyArg::Beam => Strategy::Beam,
                },
                beam_width: *beam_width,
                seed: cli.seed.unwrap_or(0),
                ..Default::default()
            };
            if *beam_width == 0 {
                return Err(usage("--beam-width must be >= 1"));
            }
            let tasks = Tasks {
                remaining: Some(match remaining {
                    PathwayArg::Recursive => RemainingPathway::Recursive,
                    PathwayArg::Direct => RemainingPathway::Direct,
                }),
                ..Default::default()
            };
            let report = evaluate_protocol(&model, &split.test, &decode, &tasks)?;
            for (task, metric, value, n) in report.rows() {
                println!("{task:<16} {metric:<14} {value:>10.4}  (n={n})");
            }
        }
        Command::Benchmark { config } => {
            let mut cfg = BenchmarkConfig::load(config).map_err(bench_error)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(j) = cli.jobs {
                cfg.jobs = j;
            }
            if let Some(o) = out_dir(cli) {
                cfg.out = std::env::current_dir()?.join(o);
            }
            let record = run_matrix(&cfg).map_err(bench_error)?;
            let files = emit_reports(&record, &record.out_dir)?;
            for c in record.failed_cells() {
                eprintln!(
                    "cell {} / {} failed: {}",
                    c.dataset,
                    c.model,
                    c.error.as_deref().unwrap_or("")
                );
            }
            let ok = record.cells.iter().filter(|c| c.ok()).count();
            println!(
                "{ok}/{} cells succeeded in {:.1}s",
                record.cells.len(),
                record.wall_clock_secs
            );
            for f in files {
                println!("wrote {}", f.display());
            }
            if record.status == RunStatus::Partial {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Gradcheck { arch } => {
            if !CHECKED_ARCHITECTURES.contains(&arch.as_str()) {
                return Err(usage(format!(
                    "unknown architecture {arch:?}; expected one of {}",
                    CHECKED_ARCHITECTURES.join(", ")
                )));
            }
            let err = gradcheck_architecture(arch, cli.seed.unwrap_or(0))?;
            let verdict = if err < GRADCHECK_GATE { "PASS" } else { "FAIL" };
            println!("{arch}: max relative error {err:.3e} ({verdict}, gate {GRADCHECK_GATE:e})");
            if err >= GRADCHECK_GATE {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn bench_error(e: BenchError) -> anyhow::Error {
    match e {
        BenchError::Config(m) => usage(m),
        other => other.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
