//! Batch front end: `gen`, `train`, `extract`, `eval`, `invent`, `report`.
//!
//! Exit codes: 1 other I/O, 2 configuration, 3 data, 4 training,
//! 5 evaluation.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use latent_ilp::datasets::{Parity, TaskName};
use latent_ilp::par::ExecMode;

use commands::Output;
use config::{Config, TranslatorKind};

pub const OTHER: u8 = 1;
pub const CONFIG: u8 = 2;
pub const DATA: u8 = 3;
pub const TRAINING: u8 = 4;
pub const EVALUATION: u8 = 5;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub err: anyhow::Error,
}

impl Failure {
    pub fn new(code: u8, err: anyhow::Error) -> Self {
        Failure { code, err }
    }
}

/// Tags an error with the exit code of the stage it happened in.
pub trait Stage<T> {
    fn at(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Stage<T> for Result<T, E> {
    fn at(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure::new(code, e.into()))
    }
}

#[derive(Parser)]
#[command(name = "latent-ilp", version, about = "Learn first-order rules from relational, embedded and instance data")]
struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset and print its hash.
    Gen {
        #[command(flatten)]
        data: DataArgs,
        /// Directory for the dataset files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the best of several seeded runs and write a run directory.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: TrainOpts,
        #[arg(long)]
        run_dir: PathBuf,
        /// Write the first training batch of a symbolic task as CSV.
        #[arg(long)]
        dump_batch: Option<PathBuf>,
    },
    /// Read rules off a checkpoint at a given threshold.
    Extract {
        /// A checkpoint file or the run directory holding one.
        checkpoint: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        /// Further thresholds whose bodies are added.
        #[arg(long, value_delimiter = ',')]
        extra: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a rules file on a task's test data or on a facts file.
    Eval {
        /// One rule per line, `head :- body, ...`.
        rules: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Use the task configuration of a run directory.
        #[arg(long, conflicts_with_all = ["task", "facts"])]
        run_dir: Option<PathBuf>,
        /// Facts file; its positives are what the rules must derive.
        #[arg(long, conflicts_with = "task")]
        facts: Option<PathBuf>,
    },
    /// Name the placeholders of an instance run and generalise its rules.
    Invent {
        run_dir: PathBuf,
        #[command(flatten)]
        translator: TranslatorOpts,
    },
    /// Print the recall table of one or more run directories.
    Report { run_dirs: Vec<PathBuf> },
}

#[derive(Args)]
struct DataArgs {
    /// TOML or JSON configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<TaskName>,
    #[arg(long)]
    size: Option<usize>,
    /// Seed of the dataset generator.
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long, value_parser = parse_parity)]
    parity: Option<Parity>,
    /// Embeddings sidecar (JSON lines of `{id, vector}`).
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Args)]
struct TrainOpts {
    #[arg(long)]
    runs: Option<usize>,
    /// Seed of the first run; run `i` uses `seed + i`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long)]
    rule_lr: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    variables: Option<usize>,
    #[arg(long)]
    clusters: Option<usize>,
    /// Wall-clock budget for all runs, in seconds.
    #[arg(long)]
    budget_secs: Option<f64>,
    /// Disable data-parallel batches.
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    translator: TranslatorOpts,
}

#[derive(Args)]
struct TranslatorOpts {
    #[arg(long, value_enum)]
    translator: Option<TranslatorKind>,
    #[arg(long)]
    translator_url: Option<String>,
    #[arg(long)]
    translator_model: Option<String>,
    /// Environment variable holding the translator's bearer token.
    #[arg(long)]
    translator_token_env: Option<String>,
}

impl TranslatorOpts {
    fn apply(&self, s: &mut config::TranslatorSettings) {
        if let Some(k) = self.translator {
            s.kind = k;
        }
        if let Some(u) = &self.translator_url {
            s.http.url = u.clone();
        }
        if let Some(m) = &self.translator_model {
            s.http.model = m.clone();
        }
        if let Some(e) = &self.translator_token_env {
            s.http.token_env = e.clone();
        }
    }

    fn is_set(&self) -> bool {
        self.translator.is_some() || self.translator_url.is_some() || self.translator_model.is_some() || self.translator_token_env.is_some()
    }
}

fn parse_parity(s: &str) -> Result<Parity, String> {
    match s {
        "odd" | "odd_index" => Ok(Parity::OddIndex),
        "even" | "even_index" => Ok(Parity::EvenIndex),
        _ => Err(format!("expected odd or even, got `{s}`")),
    }
}

impl DataArgs {
    fn resolve(&self) -> Result<Config, Failure> {
        let mut c = config::load(self.config.as_deref(), self.task).at(CONFIG)?;
        if self.size.is_some() {
            c.size = self.size;
        }
        if let Some(s) = self.data_seed {
            c.data_seed = s;
        }
        if self.parity.is_some() {
            c.parity = self.parity;
        }
        if self.embeddings.is_some() {
            c.embeddings = self.embeddings.clone();
        }
        Ok(c)
    }
}

impl TrainOpts {
    fn apply(&self, c: &mut Config) {
        let n = &mut c.run.network;
        if let Some(v) = self.seed {
            n.seed = v;
        }
        if let Some(v) = self.epochs {
            n.epochs = v;
        }
        if let Some(v) = self.lambda {
            n.lambda = v;
        }
        if let Some(v) = self.rule_lr {
            n.rule_lr = v;
        }
        if let Some(v) = self.threshold {
            n.extract_threshold = v;
        }
        if self.sequential {
            n.exec = ExecMode::Sequential;
        }
        if let Some(v) = self.runs {
            c.run.runs = v;
        }
        if let Some(v) = self.budget_secs {
            c.run.budget_secs = v;
        }
        if self.variables.is_some() {
            c.run.variables = self.variables;
        }
        if let Some(v) = self.clusters {
            c.run.cluster.k = v;
        }
        self.translator.apply(&mut c.translator);
    }
}

fn run(cli: Cli) -> Result<Output, Failure> {
    match cli.cmd {
        Command::Gen { data, out } => commands::gen(commands::GenArgs { cfg: data.resolve()?, out }),
        Command::Train { data, opts, run_dir, dump_batch } => {
            let mut cfg = data.resolve()?;
            opts.apply(&mut cfg);
            commands::train(commands::TrainArgs { cfg, run_dir, dump_batch })
        }
        Command::Extract { checkpoint, threshold, extra, out } => {
            let checkpoint = if checkpoint.is_dir() { checkpoint.join(artifacts::CHECKPOINT) } else { checkpoint };
            commands::extract(commands::ExtractArgs { checkpoint, threshold, extra, out })
        }
        Command::Eval { rules, data, run_dir, facts } => {
            let cfg = match (&run_dir, &facts) {
                (Some(d), _) => {
                    let mut c: Config = artifacts::read_json(&d.join(artifacts::CONFIG_JSON)).at(CONFIG)?;
                    if data.embeddings.is_some() {
                        c.embeddings = data.embeddings.clone();
                    }
                    Some(c)
                }
                (None, Some(_)) => None,
                (None, None) => Some(data.resolve()?),
            };
            commands::eval(commands::EvalArgs { rules, cfg, facts })
        }
        Command::Invent { run_dir, translator } => {
            let settings = if translator.is_set() {
                let c: Config = artifacts::read_json(&run_dir.join(artifacts::CONFIG_JSON)).at(CONFIG)?;
                let mut s = c.translator;
                if translator.translator.is_none() && s.kind == TranslatorKind::None {
                    s.kind = TranslatorKind::Http;
                }
                translator.apply(&mut s);
                Some(s)
            } else {
                None
            };
            commands::invent(commands::InventArgs { run_dir, translator: settings })
        }
        Command::Report { run_dirs } => commands::report(&run_dirs),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli) {
        Ok(out) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&out.json).expect("serializable"));
            } else {
                print!("{}", out.text);
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            if json {
                println!("{}", serde_json::json!({ "error": format!("{:#}", f.err), "code": f.code }));
            }
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
