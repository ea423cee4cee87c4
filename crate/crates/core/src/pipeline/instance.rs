use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{extract_all, prepare_centroids, Ranked, RunConfig};
use crate::cluster::{hard_assign, sort_by_population, CentroidSet, EmbeddingSource, EmbeddingTable};
use crate::datasets::{EmbeddingRecord, FeatureEncoder, KandinskySet, ObjectRecord};
use crate::error::{Error, Result};
use crate::kb::{enumerate_placeholder_atoms, make_instance_batch, BodyAtomSpace, InstanceKb};
use crate::invent::{
    collect_evidence, evaluable_part, evaluate_invented, generalize_program, invented_accuracy, predict_invented, translate,
    SemanticsBundle, Translator,
};
use crate::logic::{Atom, LogicProgram, Metrics, PredicateKind, PredicateTable, Rule, Term};
use crate::network::{train, ClusterTerm, History, NetworkConfig, NetworkParams};

/// Encoded objects of a labelled instance set.
#[derive(Clone, Debug)]
pub struct InstanceData {
    pub train: Vec<Vec<Vec<f64>>>,
    pub train_labels: Vec<bool>,
    pub test: Vec<Vec<Vec<f64>>>,
    pub test_labels: Vec<bool>,
    /// Object features, used only to describe evidence to a translator and
    /// to evaluate named predicates.
    pub train_objects: Vec<Vec<ObjectRecord>>,
    pub test_objects: Vec<Vec<ObjectRecord>>,
}

impl InstanceData {
    pub fn from_set(set: &KandinskySet, noise: f64, seed: u64) -> Self {
        let enc = FeatureEncoder::new(noise);
        InstanceData {
            train: enc.encode_all(&set.train, seed),
            train_labels: set.train.iter().map(|i| i.label).collect(),
            test: enc.encode_all(&set.test, seed.wrapping_add(0x7e57)),
            test_labels: set.test.iter().map(|i| i.label).collect(),
            train_objects: set.train.iter().map(|i| i.objects.clone()).collect(),
            test_objects: set.test.iter().map(|i| i.objects.clone()).collect(),
        }
    }

    /// Sidecar id of object `o` of instance `i`, `split` being `train` or
    /// `test`.
    pub fn object_id(split: &str, i: usize, o: usize) -> String {
        format!("{split}/{i}/{o}")
    }

    pub fn embedding_records(&self) -> Vec<EmbeddingRecord> {
        let mut out = Vec::new();
        for (split, set) in [("train", &self.train), ("test", &self.test)] {
            for (i, inst) in set.iter().enumerate() {
                for (o, v) in inst.iter().enumerate() {
                    out.push(EmbeddingRecord { id: Self::object_id(split, i, o), vector: v.clone() });
                }
            }
        }
        out
    }

    /// Replaces every object embedding by the sidecar record with its id.
    pub fn with_embeddings(mut self, records: &[EmbeddingRecord]) -> Result<Self> {
        let by_id: HashMap<&str, &Vec<f64>> = records.iter().map(|r| (r.id.as_str(), &r.vector)).collect();
        let mut dim = None;
        for (split, set) in [("train", &mut self.train), ("test", &mut self.test)] {
            for (i, inst) in set.iter_mut().enumerate() {
                for (o, v) in inst.iter_mut().enumerate() {
                    let id = Self::object_id(split, i, o);
                    let rec = by_id.get(id.as_str()).ok_or(Error::MissingEmbedding(id))?;
                    let expected = *dim.get_or_insert(rec.len());
                    if rec.len() != expected {
                        return Err(Error::DimensionMismatch { expected, found: rec.len() });
                    }
                    *v = (*rec).clone();
                }
            }
        }
        Ok(self)
    }
}

/// Whether every cluster named by the rule body occurs in `present`.
/// Variable `v` stands for cluster `v - 1`.
pub fn rule_fires(rule: &Rule, present: &BTreeSet<usize>) -> bool {
    rule.body
        .iter()
        .all(|a| a.vars().iter().all(|&v| v >= 1 && present.contains(&(v - 1))))
}

fn predict(program: &LogicProgram, present: &BTreeSet<usize>) -> bool {
    program.rules.iter().any(|r| rule_fires(r, present))
}

pub fn instance_accuracy(program: &LogicProgram, kb: &InstanceKb, labels: &[bool]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = kb.present.iter().zip(labels).filter(|(p, &l)| predict(program, p) == l).count();
    hits as f64 / labels.len() as f64
}

/// Greedy forward selection over per-instance firing patterns: repeatedly
/// adds the rule that most raises training accuracy, stopping when no rule
/// helps. Ties go to the earlier rule. Returns sorted rule indices.
pub fn greedy_select(fires: &[Vec<bool>], labels: &[bool]) -> Vec<usize> {
    let mut covered = vec![false; labels.len()];
    let mut chosen = Vec::new();
    loop {
        let mut best: Option<(i64, usize)> = None;
        for (ri, f) in fires.iter().enumerate() {
            if chosen.contains(&ri) {
                continue;
            }
            let gain: i64 = f
                .iter()
                .zip(&covered)
                .zip(labels)
                .filter(|((&fi, &c), _)| fi && !c)
                .map(|(_, &l)| if l { 1 } else { -1 })
                .sum();
            if gain > 0 && best.map_or(true, |(g, _)| gain > g) {
                best = Some((gain, ri));
            }
        }
        let Some((_, ri)) = best else { break };
        chosen.push(ri);
        for (c, &f) in covered.iter_mut().zip(&fires[ri]) {
            *c |= f;
        }
    }
    chosen.sort_unstable();
    chosen
}

pub fn select_rules(candidates: &LogicProgram, kb: &InstanceKb, labels: &[bool]) -> LogicProgram {
    let fires: Vec<Vec<bool>> = candidates
        .rules
        .iter()
        .map(|r| kb.present.iter().map(|p| !r.body.is_empty() && rule_fires(r, p)).collect())
        .collect();
    let chosen = greedy_select(&fires, labels);
    LogicProgram::new(chosen.into_iter().map(|i| candidates.rules[i].clone()).collect())
}

/// The constrained program after naming and generalisation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Invention {
    pub bundle: SemanticsBundle,
    pub preds: PredicateTable,
    /// Every generalised rule, including ones whose names cannot be evaluated.
    pub generalized: LogicProgram,
    /// Evaluable generalised rules chosen on the training instances.
    pub program: LogicProgram,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub test_metrics: Option<Metrics>,
}

fn invent(
    program: &LogicProgram,
    preds: &PredicateTable,
    train_assign: &[Vec<usize>],
    data: &InstanceData,
    translator: &dyn Translator,
    seed: u64,
) -> Result<Invention> {
    let assign: Vec<usize> = train_assign.iter().flatten().copied().collect();
    let objects: Vec<ObjectRecord> = data.train_objects.iter().flatten().copied().collect();
    let mut bundle = collect_evidence(program, preds, &assign, &objects, seed)?;
    translate(&mut bundle, translator, &objects);
    let (gpreds, generalized) = generalize_program(program, preds, &bundle)?;
    let usable = evaluable_part(&generalized, &gpreds);
    let fires: Vec<Vec<bool>> = usable
        .rules
        .iter()
        .map(|r| predict_invented(&LogicProgram::new(vec![r.clone()]), &gpreds, &data.train_objects))
        .collect::<Result<_>>()?;
    let chosen = greedy_select(&fires, &data.train_labels);
    let selected = LogicProgram::new(chosen.into_iter().map(|i| usable.rules[i].clone()).collect());
    let test_metrics = match evaluate_invented(&selected, &gpreds, &data.test_objects, &data.test_labels) {
        Ok(m) => Some(m),
        Err(Error::UnsatisfiedBodies) | Err(Error::EmptyTestPositives) => None,
        Err(e) => return Err(e),
    };
    Ok(Invention {
        train_accuracy: invented_accuracy(&selected, &gpreds, &data.train_objects, &data.train_labels)?,
        test_accuracy: invented_accuracy(&selected, &gpreds, &data.test_objects, &data.test_labels)?,
        test_metrics,
        bundle,
        preds: gpreds,
        generalized,
        program: selected,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub seed: u64,
    /// Target `positive/1` followed by one placeholder per body atom.
    pub preds: PredicateTable,
    pub space: BodyAtomSpace,
    pub extracted: LogicProgram,
    /// Constrained program: variable `v` is bound to cluster `v - 1`.
    pub program: LogicProgram,
    pub centroids: CentroidSet,
    /// Cluster of each object, per training instance.
    pub train_assign: Vec<Vec<usize>>,
    pub test_assign: Vec<Vec<usize>>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub invention: Option<Invention>,
    pub params: NetworkParams,
    pub history: History,
    pub secs: f64,
}

impl InstanceOutcome {
    /// Names and generalises the constrained program of a finished run.
    pub fn invent(&self, data: &InstanceData, translator: &dyn Translator) -> Result<Invention> {
        invent(&self.program, &self.preds, &self.train_assign, data, translator, self.seed)
    }

    /// Test accuracy of the final classifier: the generalised program when
    /// one was built, the constrained one otherwise.
    pub fn final_test_accuracy(&self) -> f64 {
        self.invention.as_ref().map_or(self.test_accuracy, |i| i.test_accuracy)
    }

    pub fn final_train_accuracy(&self) -> f64 {
        self.invention.as_ref().map_or(self.train_accuracy, |i| i.train_accuracy)
    }
}

impl Ranked for InstanceOutcome {
    fn seed(&self) -> u64 {
        self.seed
    }

    fn score(&self) -> (bool, f64, f64) {
        let t = self.final_test_accuracy();
        (t == 1.0, t, self.final_train_accuracy())
    }

    fn is_perfect(&self) -> bool {
        self.final_test_accuracy() == 1.0
    }
}

pub struct InstanceSetup<'a> {
    pub data: &'a InstanceData,
    pub table: EmbeddingTable,
}

fn assign_instances(objects: &[Vec<Vec<f64>>], c: &CentroidSet) -> Vec<Vec<usize>> {
    objects
        .iter()
        .map(|inst| inst.iter().map(|e| hard_assign(ndarray::ArrayView1::from(e.as_slice()), c)).collect())
        .collect()
}

impl<'a> InstanceSetup<'a> {
    pub fn new(data: &'a InstanceData, _cfg: &RunConfig) -> Result<Self> {
        let rows: Vec<Vec<f64>> = data.train.iter().flatten().cloned().collect();
        if rows.is_empty() {
            return Err(Error::Config("no training objects".into()));
        }
        Ok(InstanceSetup {
            data,
            table: EmbeddingTable::from_rows(&rows, EmbeddingSource::ToyEncoder)?,
        })
    }

    pub fn run(&self, cfg: &RunConfig, seed: u64, translator: Option<&dyn Translator>) -> Result<InstanceOutcome> {
        let start = Instant::now();
        let net = NetworkConfig { seed, ..cfg.network.clone() };
        let centroids = prepare_centroids(&self.table, cfg, seed)?;
        // The emptiest cluster becomes variable 1, which has no singleton atom.
        let centroids = sort_by_population(&self.table, &centroids);
        let k = centroids.k();

        let mut preds = PredicateTable::new();
        let target = preds.declare("positive", 1, PredicateKind::Target)?;
        let space = enumerate_placeholder_atoms(&mut preds, k)?;
        let mut params = NetworkParams::init(space.n(), &net)?;

        let data = self.data;
        let mut source = |_: usize, c: Option<&CentroidSet>| -> Result<(Array2<f64>, Array1<f64>)> {
            let c = c.ok_or_else(|| Error::Config("instance training needs centroids".into()))?;
            let kb = InstanceKb::build(&assign_instances(&data.train, c), k);
            Ok(make_instance_batch(&kb, &data.train_labels, &space))
        };
        let term = ClusterTerm {
            table: &self.table,
            centroids,
        };
        let (history, centroids) = train(&mut params, &mut source, Some(term), &net)?;
        let centroids = centroids.expect("cluster term was given");

        let train_assign = assign_instances(&data.train, &centroids);
        let test_assign = assign_instances(&data.test, &centroids);
        let train_kb = InstanceKb::build(&train_assign, k);
        let test_kb = InstanceKb::build(&test_assign, k);
        let head = Atom::new(target, vec![Term::Var(0)]);
        let extracted = extract_all(&params, &space, &head, net.extract_threshold, &cfg.extra_thresholds);
        let program = if cfg.keep_all {
            extracted.clone()
        } else {
            select_rules(&extracted, &train_kb, &data.train_labels)
        };
        let invention = match translator {
            Some(t) => Some(invent(&program, &preds, &train_assign, data, t, seed)?),
            None => None,
        };
        Ok(InstanceOutcome {
            seed,
            invention,
            train_accuracy: instance_accuracy(&program, &train_kb, &data.train_labels),
            test_accuracy: instance_accuracy(&program, &test_kb, &data.test_labels),
            preds,
            space,
            extracted,
            program,
            centroids,
            train_assign,
            test_assign,
            params,
            history,
            secs: start.elapsed().as_secs_f64(),
        })
    }
}
