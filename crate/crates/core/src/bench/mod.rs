//! Config-driven benchmark matrix: every model on every dataset, one shared
//! split per dataset, reports as CSV, Markdown and JSON.

mod config;
mod report;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{BenchmarkConfig, DatasetConfig, ModelEntry, SyntheticLog, TaskSelection, CONFIG_VERSION};
pub use report::{emit_reports, metric_rows, MetricRow, METRICS_FILE, RECORD_FILE, REPORT_FILE};

use crate::encoding::PetriNet;
use crate::eventlog::{augment_eoc, compute_stats, deterministic_log, parse_csv, EventLog, LogStats};
use crate::inference::DecodeConfig;
use crate::metrics::{evaluate_protocol, MetricsReport, RemainingPathway, Tasks};
use crate::models::{AnyModel, ModelSpec, Predictor, TrainReport};
use crate::splitting::{make_prefix_samples, temporal_split, SplitLog};

pub const TOOLBOX_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialisation: {0}")]
    Serde(#[from] serde_json::Error),
}

impl BenchError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub name: String,
    /// Statistics of the raw log, before the end marker is added.
    pub stats: Option<LogStats>,
    pub manifest_hash: Option<String>,
    pub manifest_path: Option<PathBuf>,
    pub train_traces: usize,
    pub validation_traces: usize,
    pub test_traces: usize,
    pub test_prefixes: usize,
    pub petri_net_places: Option<usize>,
    pub error: Option<String>,
}

/// Metrics for one decode config, or for the direct remaining-time head
/// when `decode` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub decode: Option<String>,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub dataset: String,
    pub model: String,
    pub kind: String,
    pub index: usize,
    pub seed: u64,
    pub manifest_hash: Option<String>,
    pub train: Option<TrainReport>,
    pub evaluations: Vec<Evaluation>,
    pub checkpoint: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub error: Option<String>,
    pub wall_clock_secs: f64,
}

impl CellRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub toolbox_version: String,
    pub seed: u64,
    pub status: RunStatus,
    pub datasets: Vec<DatasetRecord>,
    pub cells: Vec<CellRecord>,
    pub out_dir: PathBuf,
    pub wall_clock_secs: f64,
}

impl RunRecord {
    pub fn failed_cells(&self) -> impl Iterator<Item = &CellRecord> {
        self.cells.iter().filter(|c| !c.ok())
    }
}

struct Prepared {
    record: DatasetRecord,
    split: Option<Arc<SplitLog>>,
}

fn load_dataset(cfg: &BenchmarkConfig, d: &DatasetConfig) -> Result<EventLog, String> {
    match (&d.path, &d.synthetic) {
        (Some(p), _) => {
            let path = cfg.resolve(p);
            let file = std::fs::File::open(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_csv(std::io::BufReader::new(file), &d.schema).map_err(|e| e.to_string())
        }
        (None, Some(s)) => {
            let acts: Vec<&str> = s.activities.iter().map(String::as_str).collect();
            deterministic_log(&acts, s.traces, s.gap_secs).map_err(|e| e.to_string())
        }
        (None, None) => Err("no source".into()),
    }
}

fn load_net(path: &Path) -> Result<PetriNet, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let net = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        PetriNet::from_json(&text)
    } else {
        PetriNet::from_pnml(&text)
    };
    net.map_err(|e| e.to_string())
}

fn prepare(cfg: &BenchmarkConfig, d: &DatasetConfig, out: &Path) -> Prepared {
    let mut record = DatasetRecord {
        name: d.name.clone(),
        stats: None,
        manifest_hash: None,
        manifest_path: None,
        train_traces: 0,
        validation_traces: 0,
        test_traces: 0,
        test_prefixes: 0,
        petri_net_places: None,
        error: None,
    };
    let result = (|| -> Result<SplitLog, String> {
        if let Some(net) = &d.petri_net {
            record.petri_net_places = Some(load_net(&cfg.resolve(net))?.num_places());
        }
        let raw = load_dataset(cfg, d)?;
        record.stats = Some(compute_stats(&raw).map_err(|e| e.to_string())?);
        let log = augment_eoc(&raw).map_err(|e| e.to_string())?;
        let split = temporal_split(&log, cfg.split).map_err(|e| e.to_string())?;
        let dir = out.join("splits");
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let path = dir.join(format!("{}.csv", d.name));
        let file = std::fs::File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        split.write_manifest(file).map_err(|e| e.to_string())?;
        record.manifest_hash = Some(split.manifest_hash());
        record.manifest_path = Some(path);
        record.train_traces = split.train.num_traces();
        record.validation_traces = split.validation.num_traces();
        record.test_traces = split.test.num_traces();
        record.test_prefixes = make_prefix_samples(&split.test, 1).len();
        Ok(split)
    })();
    match result {
        Ok(split) => Prepared {
            record,
            split: Some(Arc::new(split)),
        },
        Err(e) => {
            record.error = Some(e);
            Prepared { record, split: None }
        }
    }
}

/// Protocol task sets for one cell: one per decode config, then the direct
/// remaining-time head. Decode-independent tasks run only in the first.
fn task_plan(sel: &TaskSelection, decode: &[DecodeConfig]) -> Vec<(Option<DecodeConfig>, Tasks)> {
    let recursive = sel.remaining.contains(&RemainingPathway::Recursive);
    let mut plan: Vec<(Option<DecodeConfig>, Tasks)> = decode
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let tasks = Tasks {
                next_activity: sel.next_activity && i == 0,
                next_time: sel.next_time && i == 0,
                suffix: sel.suffix,
                remaining: recursive.then_some(RemainingPathway::Recursive),
                comparison: sel.comparison,
            };
            (Some(*d), tasks)
        })
        .collect();
    if sel.remaining.contains(&RemainingPathway::Direct) {
        let tasks = Tasks {
            next_activity: false,
            next_time: false,
            suffix: false,
            remaining: Some(RemainingPathway::Direct),
            comparison: sel.comparison,
        };
        plan.push((None, tasks));
    }
    plan
}

struct CellJob<'a> {
    index: usize,
    dataset: &'a Prepared,
    model: &'a ModelEntry,
}

fn run_cell(cfg: &BenchmarkConfig, job: &CellJob<'_>, out: &Path) -> CellRecord {
    let started = Instant::now();
    let seed = cfg.seed ^ job.index as u64;
    let mut cell = CellRecord {
        dataset: job.dataset.record.name.clone(),
        model: job.model.name.clone(),
        kind: job.model.spec.kind_name().to_owned(),
        index: job.index,
        seed,
        manifest_hash: None,
        train: None,
        evaluations: Vec::new(),
        checkpoint: None,
        predictions: None,
        error: None,
        wall_clock_secs: 0.0,
    };
    let result = (|| -> Result<(), String> {
        let split = match &job.dataset.split {
            Some(s) => s,
            None => {
                return Err(format!(
                    "dataset unavailable: {}",
                    job.dataset.record.error.as_deref().unwrap_or("?")
                ))
            }
        };
        let hash = split.manifest_hash();
        assert_eq!(
            Some(&hash),
            job.dataset.record.manifest_hash.as_ref(),
            "cell consumed a different split than the one written"
        );
        cell.manifest_hash = Some(hash);

        let mut spec: ModelSpec = job.model.spec.clone();
        spec.training.seed = seed;
        let mut model = AnyModel::from_spec(&spec).map_err(|e| e.to_string())?;
        let report = crate::models::train(&mut model, split).map_err(|e| e.to_string())?;
        cell.train = Some(report);

        let stem = format!("{}__{}", cell.dataset, cell.model);
        let ckpt = out.join("checkpoints").join(&stem);
        model.save(&ckpt).map_err(|e| e.to_string())?;
        cell.checkpoint = Some(ckpt);

        for (decode, tasks) in task_plan(&cfg.tasks, &cfg.decode) {
            let d = decode.map(|d| DecodeConfig {
                seed: d.seed ^ seed,
                ..d
            });
            let report =
                evaluate_protocol(&model, &split.test, &d.unwrap_or_default(), &tasks).map_err(|e| e.to_string())?;
            cell.evaluations.push(Evaluation {
                decode: decode.map(|d| d.label()),
                report,
            });
        }

        let pred_path = out.join("predictions").join(format!("{stem}.csv"));
        write_predictions(&model, &split.test, &pred_path)?;
        cell.predictions = Some(pred_path);
        Ok(())
    })();
    cell.error = result.err();
    cell.wall_clock_secs = started.elapsed().as_secs_f64();
    cell
}

/// Next-activity and next-time predictions for every test prefix.
fn write_predictions(model: &AnyModel, test: &EventLog, path: &Path) -> Result<(), String> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| e.to_string())?;
    w.write_record([
        "case_id",
        "k",
        "next_activity",
        "predicted",
        "probability",
        "next_delta_secs",
        "predicted_delta_secs",
    ])
    .map_err(|e| e.to_string())?;
    let vocab = model.vocab();
    for s in make_prefix_samples(test, 1) {
        let p = model.predict(&s.prefix).map_err(|e| e.to_string())?;
        let best = p.argmax();
        w.write_record([
            s.case_id.clone(),
            s.k().to_string(),
            s.next_activity.clone(),
            vocab.label(best).unwrap_or_default().to_owned(),
            p.probs[best].to_string(),
            s.next_time_delta.to_string(),
            p.next_delta.map(|d| d.to_string()).unwrap_or_default(),
        ])
        .map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), BenchError> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

/// Runs every (dataset, model) cell of a validated config.
///
/// Each dataset is parsed, end-marked and split once; all of its cells share
/// that split. Cell `i` (dataset-major) trains with seed `config.seed ^ i`.
/// Cell results are written to `out/cells/` as they finish. A failing cell
/// is recorded and the run is marked partial.
pub fn run_matrix(cfg: &BenchmarkConfig) -> Result<RunRecord, BenchError> {
    cfg.validate()?;
    let started = Instant::now();
    let out = cfg.out_dir();
    let cells_dir = out.join("cells");
    std::fs::create_dir_all(&cells_dir).map_err(|e| BenchError::io(&cells_dir, e))?;

    let prepared: Vec<Prepared> = cfg.datasets.iter().map(|d| prepare(cfg, d, &out)).collect();
    let jobs: Vec<CellJob<'_>> = prepared
        .iter()
        .flat_map(|p| cfg.models.iter().map(move |m| (p, m)))
        .enumerate()
        .map(|(index, (dataset, model))| CellJob { index, dataset, model })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let cells: Vec<CellRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let cell = run_cell(cfg, job, &out);
                let path = cells_dir.join(format!("{}__{}.json", cell.dataset, cell.model));
                write_json(&path, &cell).map(|_| cell)
            })
            .collect::<Result<_, _>>()
    })?;

    let status = if cells.iter().all(CellRecord::ok) {
        RunStatus::Complete
    } else {
        RunStatus::Partial
    };
    Ok(RunRecord {
        config_hash: cfg.hash(),
        toolbox_version: TOOLBOX_VERSION.to_owned(),
        seed: cfg.seed,
        status,
        datasets: prepared.into_iter().map(|p| p.record).collect(),
        cells,
        out_dir: out,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}
