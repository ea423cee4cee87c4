//! Files of a run directory and the report rendered from them.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use latent_ilp::cluster::CentroidSet;
use latent_ilp::kb::BodyAtomSpace;
use latent_ilp::logic::{Atom, PredicateTable};
use latent_ilp::network::NetworkParams;
use latent_ilp::pipeline::InstanceOutcome;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Mode;

pub const CHECKPOINT_VERSION: u32 = 1;

pub const CONFIG_TOML: &str = "config.toml";
pub const CONFIG_JSON: &str = "config.json";
pub const DATASET_HASH: &str = "dataset.sha256";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const RULES: &str = "rules.txt";
pub const METRICS: &str = "metrics.json";
pub const HISTORY: &str = "history.csv";
pub const REPORT: &str = "report.md";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything needed to re-extract rules from the best run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_sha256: String,
    pub dataset_sha256: String,
    pub mode: Mode,
    pub seed: u64,
    pub params: NetworkParams,
    pub centroids: Option<CentroidSet>,
    pub space: BodyAtomSpace,
    pub head: Atom,
    pub preds: PredicateTable,
    /// Instance runs keep their cluster assignments for later naming.
    pub instance: Option<InstanceOutcome>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// Test accuracy of instance runs.
    pub accuracy: Option<f64>,
    /// Precision over clustered training facts of sequence runs.
    pub cluster_precision: Option<f64>,
    pub secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub task: String,
    pub mode: Mode,
    pub config_sha256: String,
    pub dataset_sha256: String,
    pub embeddings_sha256: Option<String>,
    pub best: RunSummary,
    pub runs: Vec<RunSummary>,
    pub secs: f64,
    pub budget_exhausted: bool,
    pub rules: Vec<String>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let c: Checkpoint = read_json(path)?;
    if c.version != CHECKPOINT_VERSION {
        bail!("checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})", c.version);
    }
    Ok(c)
}

fn cell(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.2}"))
}

/// One row per run directory: task, best precision and recall (accuracy for
/// instance tasks), run count and wall clock.
pub fn render_report(rows: &[Metrics]) -> String {
    let mut s = String::from("| Task | Mode | Best seed | Precision | Recall | Accuracy | Runs | RT (s) |\n");
    s.push_str("|---|---|---|---|---|---|---|---|\n");
    for m in rows {
        let b = &m.best;
        let _ = writeln!(
            s,
            "| {} | {:?} | {} | {} | {} | {} | {} | {:.2}{} |",
            m.task,
            m.mode,
            b.seed,
            cell(b.precision.or(b.cluster_precision)),
            cell(b.recall),
            cell(b.accuracy),
            m.runs.len(),
            m.secs,
            if m.budget_exhausted { " (budget)" } else { "" }
        );
    }
    for m in rows {
        let _ = writeln!(s, "\n{} rules:\n", m.task);
        if m.rules.is_empty() {
            s.push_str("    (none)\n");
        }
        for r in &m.rules {
            let _ = writeln!(s, "    {r}");
        }
    }
    s
}
