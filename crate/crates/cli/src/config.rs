//! Run configuration: per-mode defaults, overlaid by a TOML or JSON file,
//! overlaid by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use latent_ilp::datasets::{Parity, TaskName, TaskSpec};
use latent_ilp::invent::HttpTranslatorConfig;
use latent_ilp::pipeline::RunConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Constants are symbols.
    Symbolic,
    /// Constants are embedded images in a relational world.
    Sequence,
    /// Relation-free labelled instances of embedded objects.
    Instance,
}

impl Mode {
    pub fn of(task: TaskName) -> Mode {
        if task.is_relational() {
            Mode::Symbolic
        } else if task.kandinsky_pattern().is_some() {
            Mode::Instance
        } else {
            Mode::Sequence
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TranslatorKind {
    None,
    /// Offline namer that reads object features.
    Mock,
    Http,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslatorSettings {
    pub kind: TranslatorKind,
    /// The token itself is only ever read from the environment variable
    /// named in `http.token_env`.
    pub http: HttpTranslatorConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub task: TaskName,
    pub mode: Mode,
    /// Dataset size; `None` keeps the task default.
    pub size: Option<usize>,
    /// Seed of the dataset generator and of the toy encoder.
    pub data_seed: u64,
    pub parity: Option<Parity>,
    /// Embeddings sidecar replacing the toy encoder.
    pub embeddings: Option<PathBuf>,
    pub translator: TranslatorSettings,
    pub run: RunConfig,
}

impl Config {
    pub fn defaults(task: TaskName) -> Config {
        let mode = Mode::of(task);
        let run = match mode {
            Mode::Symbolic => RunConfig::default(),
            Mode::Sequence => RunConfig::sequence(),
            Mode::Instance => RunConfig::kandinsky(),
        };
        Config {
            task,
            mode,
            size: None,
            data_seed: 0,
            parity: None,
            embeddings: None,
            translator: TranslatorSettings {
                kind: if mode == Mode::Instance { TranslatorKind::Mock } else { TranslatorKind::None },
                http: HttpTranslatorConfig::default(),
            },
            run,
        }
    }

    pub fn spec(&self) -> TaskSpec {
        TaskSpec { name: self.task, size: self.size, seed: self.data_seed, parity: self.parity }
    }

    /// Checks every precondition the pipeline would otherwise hit mid-run.
    pub fn validate(&self) -> Result<()> {
        if self.mode != Mode::of(self.task) {
            bail!("task {} runs in {:?} mode, not {:?}", self.task, Mode::of(self.task), self.mode);
        }
        self.spec().validate()?;
        self.run.network.validate()?;
        if self.run.runs == 0 {
            bail!("runs must be at least 1");
        }
        if !(self.run.budget_secs > 0.0) {
            bail!("budget_secs must be positive");
        }
        if self.run.network.epochs == 0 {
            bail!("epochs must be positive");
        }
        if let Some(d) = self.run.variables {
            if d < 2 {
                bail!("at least two variables are needed, got {d}");
            }
        }
        if self.mode != Mode::Symbolic && self.run.cluster.k < 2 {
            bail!("at least two clusters are needed, got {}", self.run.cluster.k);
        }
        for &t in &self.run.extra_thresholds {
            if !(t > 0.0 && t < 1.0) {
                bail!("extra threshold {t} outside (0,1)");
            }
        }
        if self.embeddings.is_some() && self.mode == Mode::Symbolic {
            bail!("symbolic tasks take no embeddings");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}

/// Reads a whole or partial config. The task is taken from the file unless
/// `task` is given; the file's keys then overlay that task's defaults.
pub fn load(path: Option<&Path>, task: Option<TaskName>) -> Result<Config> {
    let overlay: Value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            if p.extension().is_some_and(|e| e == "json") {
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            } else {
                let t: toml::Value = toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
                serde_json::to_value(t)?
            }
        }
        None => Value::Object(Default::default()),
    };
    let task = match task {
        Some(t) => t,
        None => match overlay.get("task").and_then(Value::as_str) {
            Some(s) => s.parse()?,
            None => bail!("no task given on the command line or in the config"),
        },
    };
    let mut base = serde_json::to_value(Config::defaults(task))?;
    merge(&mut base, overlay);
    base["task"] = serde_json::to_value(task)?;
    Ok(serde_json::from_value(base)?)
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
