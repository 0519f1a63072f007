use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{write_json, BenchError, RunRecord};

pub const METRICS_FILE: &str = "metrics.csv";
pub const REPORT_FILE: &str = "report.md";
pub const RECORD_FILE: &str = "run_record.json";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub dataset: String,
    pub model: String,
    pub task: String,
    pub metric: String,
    pub value: f64,
    pub n_samples: usize,
}

/// One row per reported metric of every successful cell, sorted by
/// dataset, model, task and metric.
///
/// Decode-dependent tasks are labelled `suffix:<decode>` and
/// `remaining_time:<decode>`; the direct head is `remaining_time:direct`.
pub fn metric_rows(record: &RunRecord) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    for cell in record.cells.iter().filter(|c| c.ok()) {
        for ev in &cell.evaluations {
            for (task, metric, value, n) in ev.report.rows() {
                let task = match (task, ev.decode.as_deref()) {
                    ("suffix" | "remaining_time", Some(d)) => format!("{task}:{d}"),
                    ("remaining_time", None) => "remaining_time:direct".to_owned(),
                    _ => task.to_owned(),
                };
                rows.push(MetricRow {
                    dataset: cell.dataset.clone(),
                    model: cell.model.clone(),
                    task,
                    metric: metric.to_owned(),
                    value,
                    n_samples: n,
                });
            }
        }
    }
    rows.sort_by(|a, b| (&a.dataset, &a.model, &a.task, &a.metric).cmp(&(&b.dataset, &b.model, &b.task, &b.metric)));
    rows
}

fn higher_is_better(metric: &str) -> bool {
    matches!(metric, "accuracy" | "dl_similarity")
}

fn metrics_csv(rows: &[MetricRow]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dataset", "model", "task", "metric", "value", "n_samples"])?;
    for r in rows {
        w.write_record([
            r.dataset.as_str(),
            &r.model,
            &r.task,
            &r.metric,
            &r.value.to_string(),
            &r.n_samples.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

fn markdown(record: &RunRecord, rows: &[MetricRow]) -> String {
    let datasets: Vec<&str> = record.datasets.iter().map(|d| d.name.as_str()).collect();
    let mut models: Vec<&str> = Vec::new();
    for c in &record.cells {
        if !models.contains(&c.model.as_str()) {
            models.push(&c.model);
        }
    }
    let mut sections: Vec<(&str, &str)> = rows.iter().map(|r| (r.task.as_str(), r.metric.as_str())).collect();
    sections.sort();
    sections.dedup();

    let mut md = String::new();
    let _ = writeln!(md, "# Benchmark results\n");
    let _ = writeln!(
        md,
        "Config `{}`, toolbox {}, status {:?}. Best value per dataset in bold.\n",
        &record.config_hash[..12.min(record.config_hash.len())],
        record.toolbox_version,
        record.status
    );
    for (task, metric) in sections {
        let lookup = |ds: &str, m: &str| {
            rows.iter()
                .find(|r| r.dataset == ds && r.model == m && r.task == task && r.metric == metric)
                .map(|r| r.value)
        };
        let best: Vec<Option<f64>> = datasets
            .iter()
            .map(|ds| {
                let vals = models.iter().filter_map(|m| lookup(ds, m));
                if higher_is_better(metric) {
                    vals.reduce(f64::max)
                } else {
                    vals.reduce(f64::min)
                }
            })
            .collect();
        let _ = writeln!(md, "## {task} / {metric}\n");
        let _ = writeln!(md, "| model | {} |", datasets.join(" | "));
        let _ = writeln!(md, "|---{}|", "|---:".repeat(datasets.len()));
        for m in &models {
            let cells: Vec<String> = datasets
                .iter()
                .zip(&best)
                .map(|(ds, b)| match lookup(ds, m) {
                    Some(v) if Some(v) == *b => format!("**{v:.4}**"),
                    Some(v) => format!("{v:.4}"),
                    None => "n/a".to_owned(),
                })
                .collect();
            let _ = writeln!(md, "| {m} | {} |", cells.join(" | "));
        }
        md.push('\n');
    }
    let failed: Vec<_> = record.failed_cells().collect();
    if !failed.is_empty() {
        let _ = writeln!(md, "## Failed cells\n");
        for c in failed {
            let _ = writeln!(
                md,
                "- {} / {}: {}",
                c.dataset,
                c.model,
                c.error.as_deref().unwrap_or("")
            );
        }
    }
    md
}

/// Writes `metrics.csv`, `report.md` and `run_record.json` into `dir`.
///
/// The CSV carries no timings, so equal runs give byte-identical files.
pub fn emit_reports(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let rows = metric_rows(record);
    let csv_path = dir.join(METRICS_FILE);
    let bytes = metrics_csv(&rows).map_err(|e| BenchError::Config(e.to_string()))?;
    std::fs::write(&csv_path, bytes).map_err(|e| BenchError::io(&csv_path, e))?;
    let md_path = dir.join(REPORT_FILE);
    std::fs::write(&md_path, markdown(record, &rows)).map_err(|e| BenchError::io(&md_path, e))?;
    let json_path = dir.join(RECORD_FILE);
    write_json(&json_path, record)?;
    Ok(vec![csv_path, md_path, json_path])
}
