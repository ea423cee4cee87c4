use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use latent_ilp::datasets::{gen_task, kandinsky, read_sidecar, write_sidecar, Dataset, EmbeddingRecord, IlpTask, MnistTask};
use latent_ilp::invent::{evaluate_invented, invented_accuracy, HttpTranslator, MockTranslator, Translator};
use latent_ilp::kb::{make_training_batch, sample_substitutions, Neighbours};
use latent_ilp::logic::{evaluate_rules, parse_rules, ConstantTable, FactBase, LogicProgram, PredicateTable};
use latent_ilp::pipeline::{
    extract_all, head_atom, run_instances, run_sequence, run_symbolic, BestOf, InstanceData, InstanceOutcome, RunOutcome,
    SequenceOutcome, SymbolicSetup, SequenceSetup,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::artifacts::*;
use crate::config::{Config, Mode, TranslatorKind, TranslatorSettings};
use crate::{Failure, Stage, CONFIG, DATA, EVALUATION, OTHER, TRAINING};

/// What a command prints: a JSON value for `--json`, text otherwise.
pub struct Output {
    pub json: Value,
    pub text: String,
}

pub enum Loaded {
    Relational(IlpTask),
    Sequence(MnistTask),
    Instance(InstanceData),
}

pub struct LoadedData {
    pub data: Loaded,
    pub dataset_sha256: String,
    pub embeddings_sha256: Option<String>,
}

fn read_embeddings(path: &Path) -> Result<(Vec<EmbeddingRecord>, String)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let records = read_sidecar(BufReader::new(&bytes[..]))?;
    Ok((records, sha256_hex(&bytes)))
}

pub fn load_data(cfg: &Config) -> Result<LoadedData> {
    let dataset = gen_task(&cfg.spec())?;
    let dataset_sha256 = sha256_hex(dataset.serialize().as_bytes());
    let emb = cfg.embeddings.as_deref().map(read_embeddings).transpose()?;
    let embeddings_sha256 = emb.as_ref().map(|(_, h)| h.clone());
    let data = match dataset {
        Dataset::Relational(t) => Loaded::Relational(t),
        Dataset::Sequence(t) => match &emb {
            // Training and held-out images have distinct ids, so one file
            // carries both.
            Some((recs, _)) => Loaded::Sequence(t.with_embeddings(recs, recs)?),
            None => Loaded::Sequence(t),
        },
        Dataset::Kandinsky(set) => {
            let data = InstanceData::from_set(&set, cfg.run.cluster.encoder_noise, cfg.data_seed);
            let data = match &emb {
                Some((recs, _)) => data.with_embeddings(recs)?,
                None => data,
            };
            Loaded::Instance(data)
        }
    };
    Ok(LoadedData { data, dataset_sha256, embeddings_sha256 })
}

pub fn translator(s: &TranslatorSettings) -> Option<Box<dyn Translator>> {
    match s.kind {
        TranslatorKind::None => None,
        TranslatorKind::Mock => Some(Box::new(MockTranslator::new())),
        TranslatorKind::Http => Some(Box::new(HttpTranslator::new(s.http.clone()))),
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display())).at(OTHER)
}

// ---- gen

pub struct GenArgs {
    pub cfg: Config,
    pub out: Option<PathBuf>,
}

pub fn gen(a: GenArgs) -> Result<Output, Failure> {
    a.cfg.validate().at(CONFIG)?;
    let dataset = gen_task(&a.cfg.spec()).at(DATA)?;
    let text = dataset.serialize();
    let hash = sha256_hex(text.as_bytes());
    let mut files = vec!["dataset.txt", DATASET_HASH, "spec.json"];
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).at(OTHER)?;
        write(&dir.join("dataset.txt"), &text)?;
        write(&dir.join(DATASET_HASH), &format!("{hash}\n"))?;
        write_json(&dir.join("spec.json"), &a.cfg.spec()).at(OTHER)?;
        let sidecar = |records: Vec<EmbeddingRecord>| -> Result<(), Failure> {
            let f = File::create(dir.join("embeddings.jsonl")).at(OTHER)?;
            write_sidecar(std::io::BufWriter::new(f), &records).at(OTHER)
        };
        match &dataset {
            Dataset::Relational(t) => {
                write(&dir.join("gold.txt"), &format!("{}\n", t.gold.trim_end()))?;
                files.push("gold.txt");
            }
            Dataset::Sequence(t) => {
                let (mut train, test) = t.embedding_records();
                train.extend(test);
                sidecar(train)?;
                files.push("embeddings.jsonl");
            }
            Dataset::Kandinsky(set) => {
                write(&dir.join("train.jsonl"), &kandinsky::to_jsonl(&set.train))?;
                write(&dir.join("test.jsonl"), &kandinsky::to_jsonl(&set.test))?;
                let data = InstanceData::from_set(set, a.cfg.run.cluster.encoder_noise, a.cfg.data_seed);
                sidecar(data.embedding_records())?;
                files.extend(["train.jsonl", "test.jsonl", "embeddings.jsonl"]);
            }
        }
    } else {
        files.clear();
    }
    Ok(Output {
        json: json!({ "task": a.cfg.task, "dataset_sha256": hash, "files": files }),
        text: format!("{} {hash}\n", a.cfg.task),
    })
}

// ---- train

pub struct TrainArgs {
    pub cfg: Config,
    pub run_dir: PathBuf,
    pub dump_batch: Option<PathBuf>,
}

fn summary_of_symbolic(r: &RunOutcome) -> RunSummary {
    RunSummary {
        seed: r.seed,
        precision: r.metrics.map(|m| m.precision),
        recall: r.metrics.map(|m| m.recall),
        secs: r.secs,
        ..Default::default()
    }
}

fn summary_of_sequence(r: &SequenceOutcome) -> RunSummary {
    RunSummary {
        seed: r.seed,
        precision: r.image_metrics.map(|m| m.precision),
        recall: r.image_metrics.map(|m| m.recall),
        cluster_precision: r.cluster_precision,
        secs: r.secs,
        ..Default::default()
    }
}

fn summary_of_instance(r: &InstanceOutcome) -> RunSummary {
    let m = r.invention.as_ref().and_then(|i| i.test_metrics);
    RunSummary {
        seed: r.seed,
        precision: m.map(|m| m.precision),
        recall: m.map(|m| m.recall),
        accuracy: Some(r.final_test_accuracy()),
        secs: r.secs,
        ..Default::default()
    }
}

fn best<T>(res: &BestOf<T>) -> Result<&T, Failure> {
    res.best_run().ok_or_else(|| Failure::new(TRAINING, anyhow!("no run finished within the budget")))
}

fn lines(p: &LogicProgram, preds: &PredicateTable, consts: &ConstantTable) -> Vec<String> {
    p.to_text(preds, consts).lines().map(str::to_string).collect()
}

fn dump_batch(cfg: &Config, task: &IlpTask, path: &Path) -> Result<()> {
    let setup = SymbolicSetup::new(task, cfg.run.variables)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.network.seed);
    let sub = sample_substitutions(
        &task.train,
        &Neighbours::new(&task.train),
        setup.d,
        task.target,
        cfg.run.network.batch,
        &cfg.run.sampler,
        &mut rng,
    )?;
    let (x, y) = make_training_batch(&sub, &setup.space, &setup.kb);
    let mut s: Vec<String> = setup
        .space
        .atoms
        .iter()
        .map(|a| format!("\"{}\"", a.display(&task.train.preds, &task.train.constants)))
        .collect();
    s.push("y".into());
    let mut out = s.join(",") + "\n";
    for (row, label) in x.rows().into_iter().zip(y.iter()) {
        let mut cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        cells.push(format!("{label}"));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn train(a: TrainArgs) -> Result<Output, Failure> {
    let cfg = &a.cfg;
    cfg.validate().at(CONFIG)?;
    if a.dump_batch.is_some() && cfg.mode != Mode::Symbolic {
        return Err(Failure::new(CONFIG, anyhow!("--dump-batch is only available for symbolic tasks")));
    }
    let loaded = load_data(cfg).at(DATA)?;
    let dir = &a.run_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).at(OTHER)?;

    let config_json = serde_json::to_string_pretty(cfg).at(OTHER)?;
    let config_sha256 = sha256_hex(config_json.as_bytes());
    write(&dir.join(CONFIG_TOML), &cfg.to_toml().at(OTHER)?)?;
    write(&dir.join(CONFIG_JSON), &(config_json + "\n"))?;
    write(&dir.join(DATASET_HASH), &format!("{}\n", loaded.dataset_sha256))?;

    let checkpoint = |seed, params, centroids, space, head, preds, instance| Checkpoint {
        version: CHECKPOINT_VERSION,
        config_sha256: config_sha256.clone(),
        dataset_sha256: loaded.dataset_sha256.clone(),
        mode: cfg.mode,
        seed,
        params,
        centroids,
        space,
        head,
        preds,
        instance,
    };
    let metrics = |best: RunSummary, runs: Vec<RunSummary>, secs, budget_exhausted, rules| Metrics {
        task: cfg.task.to_string(),
        mode: cfg.mode,
        config_sha256: config_sha256.clone(),
        dataset_sha256: loaded.dataset_sha256.clone(),
        embeddings_sha256: loaded.embeddings_sha256.clone(),
        best,
        runs,
        secs,
        budget_exhausted,
        rules,
    };

    let (ckpt, m, history) = match &loaded.data {
        Loaded::Relational(task) => {
            if let Some(p) = &a.dump_batch {
                dump_batch(cfg, task, p).at(DATA)?;
            }
            let res = run_symbolic(task, &cfg.run).at(TRAINING)?;
            let b = best(&res)?;
            let setup = SymbolicSetup::new(task, cfg.run.variables).at(TRAINING)?;
            let arity = task.train.preds.get(task.target).arity;
            let rules = lines(&b.program, &task.train.preds, &task.train.constants);
            let ck = checkpoint(b.seed, b.params.clone(), None, setup.space, head_atom(task.target, arity), task.train.preds.clone(), None);
            let m = metrics(summary_of_symbolic(b), res.runs.iter().map(summary_of_symbolic).collect(), res.secs, res.budget_exhausted, rules);
            (ck, m, b.history.to_csv())
        }
        Loaded::Sequence(task) => {
            let res = run_sequence(task, &cfg.run).at(TRAINING)?;
            let b = best(&res)?;
            let setup = SequenceSetup::new(task, &cfg.run).at(TRAINING)?;
            let (preds, consts) = (&task.train.preds, &task.train.constants);
            write(&dir.join("cluster_rules.txt"), &b.cluster_program.to_text(preds, consts))?;
            let ck = checkpoint(
                b.seed,
                b.params.clone(),
                Some(b.centroids.clone()),
                setup.space,
                head_atom(task.target, 1),
                preds.clone(),
                None,
            );
            let m = metrics(
                summary_of_sequence(b),
                res.runs.iter().map(summary_of_sequence).collect(),
                res.secs,
                res.budget_exhausted,
                lines(&b.program, preds, consts),
            );
            (ck, m, b.history.to_csv())
        }
        Loaded::Instance(data) => {
            let t = translator(&cfg.translator);
            let res = run_instances(data, &cfg.run, t.as_deref()).at(TRAINING)?;
            let b = best(&res)?;
            let consts = ConstantTable::default();
            let rules = match &b.invention {
                Some(inv) => {
                    write_json(&dir.join("invention.json"), inv).at(OTHER)?;
                    lines(&inv.program, &inv.preds, &consts)
                }
                None => lines(&b.program, &b.preds, &consts),
            };
            let head = latent_ilp::logic::Atom::new(b.preds.id("positive").expect("target declared"), vec![latent_ilp::logic::Term::Var(0)]);
            let ck = checkpoint(
                b.seed,
                b.params.clone(),
                Some(b.centroids.clone()),
                b.space.clone(),
                head,
                b.preds.clone(),
                Some(b.clone()),
            );
            let m = metrics(summary_of_instance(b), res.runs.iter().map(summary_of_instance).collect(), res.secs, res.budget_exhausted, rules);
            (ck, m, b.history.to_csv())
        }
    };

    write_json(&dir.join(CHECKPOINT), &ckpt).at(OTHER)?;
    write(&dir.join(RULES), &rules_text(&m.rules))?;
    write_json(&dir.join(METRICS), &m).at(OTHER)?;
    write(&dir.join(HISTORY), &history)?;
    let report = render_report(std::slice::from_ref(&m));
    write(&dir.join(REPORT), &report)?;
    Ok(Output { json: serde_json::to_value(&m).at(OTHER)?, text: report })
}

fn rules_text(rules: &[String]) -> String {
    rules.iter().map(|r| format!("{r}\n")).collect()
}

// ---- extract

pub struct ExtractArgs {
    pub checkpoint: PathBuf,
    pub threshold: Option<f64>,
    pub extra: Vec<f64>,
    pub out: Option<PathBuf>,
}

pub fn extract(a: ExtractArgs) -> Result<Output, Failure> {
    let ck = read_checkpoint(&a.checkpoint).at(DATA)?;
    let threshold = a.threshold.unwrap_or(latent_ilp::network::NetworkConfig::default().extract_threshold);
    if !(threshold > 0.0 && threshold < 1.0) || a.extra.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(Failure::new(CONFIG, anyhow!("thresholds must lie in (0,1)")));
    }
    if ck.params.n_inputs() != ck.space.n() {
        return Err(Failure::new(DATA, anyhow!("checkpoint weights do not match its atom space")));
    }
    let program = extract_all(&ck.params, &ck.space, &ck.head, threshold, &a.extra);
    let rules = lines(&program, &ck.preds, &ConstantTable::default());
    if let Some(p) = &a.out {
        write(p, &rules_text(&rules))?;
    }
    Ok(Output { json: json!({ "threshold": threshold, "rules": rules }), text: rules_text(&rules) })
}

// ---- eval

pub struct EvalArgs {
    pub rules: PathBuf,
    /// Either a task configuration or a facts file.
    pub cfg: Option<Config>,
    pub facts: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvalResult {
    precision: f64,
    recall: f64,
    derived: usize,
    accuracy: Option<f64>,
}

fn parse_into(text: &str, fb: &mut FactBase) -> Result<LogicProgram, Failure> {
    parse_rules(text, &mut fb.preds, &mut fb.constants).at(DATA)
}

pub fn eval(a: EvalArgs) -> Result<Output, Failure> {
    let text = std::fs::read_to_string(&a.rules).with_context(|| format!("reading {}", a.rules.display())).at(DATA)?;
    let result = match (&a.cfg, &a.facts) {
        (_, Some(path)) => {
            // Positives of the file are what the rules must derive from
            // the background alone.
            let facts = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).at(DATA)?;
            let mut fb = FactBase::parse(&facts).at(DATA)?;
            let program = parse_into(&text, &mut fb)?;
            let truth = std::mem::take(&mut fb.positives);
            let m = evaluate_rules(&program, &fb, &truth).at(EVALUATION)?;
            EvalResult { precision: m.precision, recall: m.recall, derived: m.derived_count, accuracy: None }
        }
        (Some(cfg), None) => {
            cfg.validate().at(CONFIG)?;
            match load_data(cfg).at(DATA)?.data {
                Loaded::Relational(t) => eval_world(&text, t.test, &t.test_positives)?,
                Loaded::Sequence(t) => eval_world(&text, t.test, &t.test_positives)?,
                Loaded::Instance(data) => {
                    let mut preds = PredicateTable::new();
                    let program = parse_rules(&text, &mut preds, &mut ConstantTable::default()).at(DATA)?;
                    let m = evaluate_invented(&program, &preds, &data.test_objects, &data.test_labels).at(EVALUATION)?;
                    let acc = invented_accuracy(&program, &preds, &data.test_objects, &data.test_labels).at(EVALUATION)?;
                    EvalResult { precision: m.precision, recall: m.recall, derived: m.derived_count, accuracy: Some(acc) }
                }
            }
        }
        (None, None) => return Err(Failure::new(CONFIG, anyhow!("eval needs a task, a run directory or a facts file"))),
    };
    let mut text = format!("precision {:.4}\nrecall {:.4}\n", result.precision, result.recall);
    if let Some(acc) = result.accuracy {
        text.push_str(&format!("accuracy {acc:.4}\n"));
    }
    Ok(Output { json: serde_json::to_value(&result).at(OTHER)?, text })
}

fn eval_world(text: &str, mut fb: FactBase, truth: &std::collections::BTreeSet<latent_ilp::logic::GroundAtom>) -> Result<EvalResult, Failure> {
    let program = parse_into(text, &mut fb)?;
    let m = evaluate_rules(&program, &fb, truth).at(EVALUATION)?;
    Ok(EvalResult { precision: m.precision, recall: m.recall, derived: m.derived_count, accuracy: None })
}

// ---- invent

pub struct InventArgs {
    pub run_dir: PathBuf,
    pub translator: Option<TranslatorSettings>,
}

pub fn invent(a: InventArgs) -> Result<Output, Failure> {
    let mut cfg: Config = read_json(&a.run_dir.join(CONFIG_JSON)).at(CONFIG)?;
    if let Some(t) = a.translator {
        cfg.translator = t;
    }
    if cfg.mode != Mode::Instance {
        return Err(Failure::new(CONFIG, anyhow!("naming placeholders needs an instance task, not {}", cfg.task)));
    }
    let ck = read_checkpoint(&a.run_dir.join(CHECKPOINT)).at(DATA)?;
    let outcome = ck.instance.ok_or_else(|| Failure::new(DATA, anyhow!("checkpoint holds no instance run")))?;
    let Loaded::Instance(data) = load_data(&cfg).at(DATA)?.data else { unreachable!("mode checked") };
    let t = translator(&cfg.translator).ok_or_else(|| Failure::new(CONFIG, anyhow!("no translator configured")))?;
    let inv = outcome.invent(&data, t.as_ref()).at(EVALUATION)?;
    if !inv.bundle.entries.is_empty() && inv.bundle.entries.iter().all(|e| e.name.is_none()) {
        return Err(Failure::new(EVALUATION, anyhow!("the translator named no placeholder")));
    }
    write_json(&a.run_dir.join("invention.json"), &inv).at(OTHER)?;
    let rules = lines(&inv.program, &inv.preds, &ConstantTable::default());
    write(&a.run_dir.join("invented_rules.txt"), &rules_text(&rules))?;
    let names: Vec<Value> = inv
        .bundle
        .entries
        .iter()
        .map(|e| json!({ "placeholder": e.placeholder, "name": e.name }))
        .collect();
    let mut text = String::new();
    for e in &inv.bundle.entries {
        text.push_str(&format!("{} -> {}\n", e.placeholder, e.name.as_deref().unwrap_or("?")));
    }
    text.push_str(&rules_text(&rules));
    text.push_str(&format!("test accuracy {:.4}\n", inv.test_accuracy));
    Ok(Output {
        json: json!({ "names": names, "rules": rules, "train_accuracy": inv.train_accuracy, "test_accuracy": inv.test_accuracy }),
        text,
    })
}

// ---- report

pub fn report(dirs: &[PathBuf]) -> Result<Output, Failure> {
    if dirs.is_empty() {
        return Err(Failure::new(CONFIG, anyhow!("report needs at least one run directory")));
    }
    let rows: Vec<Metrics> = dirs.iter().map(|d| read_json(&d.join(METRICS))).collect::<Result<_>>().at(DATA)?;
    Ok(Output { json: serde_json::to_value(&rows).at(OTHER)?, text: render_report(&rows) })
}
