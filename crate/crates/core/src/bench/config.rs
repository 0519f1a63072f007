use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::BenchError;
use crate::eventlog::CsvSchema;
use crate::inference::{DecodeConfig, Strategy};
use crate::metrics::{RemainingPathway, SuffixComparison};
use crate::models::ModelSpec;
use crate::splitting::SplitFractions;

/// Current config dialect version.
pub const CONFIG_VERSION: u32 = 1;

/// A benchmark matrix, read from TOML.
///
/// Relative paths are resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub version: u32,
    /// Master seed; cell `i` trains with `seed ^ i`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Cells run concurrently on this many threads.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub split: SplitFractions,
    #[serde(default)]
    pub datasets: Vec<DatasetConfig>,
    #[serde(default)]
    pub models: Vec<ModelEntry>,
    #[serde(default = "default_decode")]
    pub decode: Vec<DecodeConfig>,
    #[serde(default)]
    pub tasks: TaskSelection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

fn default_jobs() -> usize {
    1
}

fn default_decode() -> Vec<DecodeConfig> {
    vec![DecodeConfig::argmax()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    /// Event-log CSV. Exactly one of `path` and `synthetic` is set.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticLog>,
    #[serde(default)]
    pub schema: CsvSchema,
    /// PNML or JSON net, checked and summarised in the run record.
    #[serde(default)]
    pub petri_net: Option<PathBuf>,
}

/// Every trace runs the same activity chain with fixed gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticLog {
    pub activities: Vec<String>,
    pub traces: usize,
    #[serde(default = "one_day")]
    pub gap_secs: f64,
}

fn one_day() -> f64 {
    86_400.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub name: String,
    #[serde(flatten)]
    pub spec: ModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSelection {
    pub next_activity: bool,
    pub next_time: bool,
    pub suffix: bool,
    pub remaining: Vec<RemainingPathway>,
    pub comparison: SuffixComparison,
}

impl Default for TaskSelection {
    fn default() -> Self {
        TaskSelection {
            next_activity: true,
            next_time: true,
            suffix: true,
            remaining: vec![RemainingPathway::Recursive, RemainingPathway::Direct],
            comparison: SuffixComparison::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, BenchError> {
        let mut cfg: BenchmarkConfig = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        if self.datasets.is_empty() {
            return bad("no datasets configured".into());
        }
        if self.models.is_empty() {
            return bad("no models configured".into());
        }
        if self.decode.is_empty() {
            return bad("no decode configs".into());
        }
        if self.jobs == 0 {
            return bad("jobs must be >= 1".into());
        }
        let SplitFractions { train, val } = self.split;
        if !(train > 0.0 && val > 0.0 && train + val < 1.0) {
            return bad(format!("invalid split fractions ({train}, {val})"));
        }
        unique(self.datasets.iter().map(|d| d.name.as_str()), "dataset")?;
        unique(self.models.iter().map(|m| m.name.as_str()), "model")?;
        for d in &self.datasets {
            valid_name(&d.name)?;
            match (&d.path, &d.synthetic) {
                (Some(p), None) => self.require_file(p)?,
                (None, Some(s)) => {
                    if s.activities.is_empty() || s.traces == 0 || !(s.gap_secs >= 0.0) {
                        return bad(format!(
                            "dataset {:?}: synthetic log needs activities, traces and gap >= 0",
                            d.name
                        ));
                    }
                }
                _ => return bad(format!("dataset {:?}: set exactly one of path and synthetic", d.name)),
            }
            if let Some(net) = &d.petri_net {
                self.require_file(net)?;
            }
        }
        for m in &self.models {
            valid_name(&m.name)?;
            m.spec
                .validate()
                .map_err(|e| BenchError::Config(format!("model {:?}: {e}", m.name)))?;
        }
        let mut labels = HashSet::new();
        for d in &self.decode {
            if d.strategy == Strategy::Beam && d.beam_width == 0 {
                return bad("beam_width must be >= 1".into());
            }
            if d.max_len == Some(0) {
                return bad("decode max_len must be >= 1".into());
            }
            if !labels.insert(d.label()) {
                return bad(format!("decode config {:?} listed twice", d.label()));
            }
        }
        Ok(())
    }

    fn require_file(&self, p: &Path) -> Result<(), BenchError> {
        let full = self.resolve(p);
        if full.is_file() {
            Ok(())
        } else {
            Err(BenchError::Config(format!("file not found: {}", full.display())))
        }
    }

    /// Hex SHA-256 of the config as key-sorted JSON. `out` and `jobs` are
    /// left out since they do not affect results.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("out");
            obj.remove("jobs");
        }
        let mut text = String::new();
        canonical(&v, &mut text);
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

fn unique<'a>(names: impl Iterator<Item = &'a str>, what: &str) -> Result<(), BenchError> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(BenchError::Config(format!("duplicate {what} name {n:?}")));
        }
    }
    Ok(())
}

/// Names become file names, so keep them to a portable character set.
fn valid_name(name: &str) -> Result<(), BenchError> {
    let ok = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
    if ok && !name.starts_with('.') {
        Ok(())
    } else {
        Err(BenchError::Config(format!(
            "name {name:?} must be non-empty and use only ASCII letters, digits, '-', '_' or '.'"
        )))
    }
}

fn canonical(v: &serde_json::Value, out: &mut String) {
    use serde_json::Value;
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                canonical(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                canonical(item, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}
