use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{extract_all, filter_exact, prefer_specific, head_atom, prepare_centroids, Ranked, RunConfig};
use crate::cluster::{hard_assign_all, CentroidSet, EmbeddingSource, EmbeddingTable};
use crate::datasets::{MnistTask, Parity};
use crate::error::{Error, Result};
use crate::kb::{enumerate_body_atoms, make_training_batch, sample_substitutions, BodyAtomSpace, Neighbours, RelationalKb};
use crate::logic::{evaluate_rules, ConstId, FactBase, GroundAtom, LogicProgram, Metrics, RuleScorer};
use crate::network::{train, ClusterTerm, History, NetworkConfig, NetworkParams};

/// The fact base seen through a clustering: constant `c<i>` stands for
/// cluster `i`, and every fact is rewritten argument by argument.
pub fn cluster_fact_base(fb: &FactBase, assign: &[usize], k: usize) -> FactBase {
    let mut out = FactBase::new();
    out.preds = fb.preds.clone();
    for i in 0..k {
        out.constants.intern(&format!("c{i}"));
    }
    let map = |a: &GroundAtom| {
        let args: Vec<ConstId> = a.args().iter().map(|&c| assign[c as usize] as ConstId).collect();
        GroundAtom::new(a.pred, &args)
    };
    out.background = fb.background.iter().map(map).collect();
    out.positives = fb.positives.iter().map(map).collect();
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SequenceOutcome {
    pub seed: u64,
    pub parity: Parity,
    pub extracted: LogicProgram,
    /// Rules exact on the training images.
    pub program: LogicProgram,
    /// Rules exact once the training images are merged into clusters.
    pub cluster_program: LogicProgram,
    /// On the held-out image sequence.
    pub image_metrics: Option<Metrics>,
    /// Precision of the kept rules over the clustered training facts.
    pub cluster_precision: Option<f64>,
    pub assignment: Vec<usize>,
    pub centroids: CentroidSet,
    pub params: NetworkParams,
    pub history: History,
    pub secs: f64,
}

impl Ranked for SequenceOutcome {
    fn seed(&self) -> u64 {
        self.seed
    }

    fn score(&self) -> (bool, f64, f64) {
        match (self.parity, self.image_metrics) {
            (Parity::OddIndex, Some(m)) => (m.precision == 1.0, m.recall, m.precision),
            (Parity::OddIndex, None) => (false, 0.0, 0.0),
            // Even-position rules only hold once images are merged into
            // clusters, so they are ranked at that level.
            (Parity::EvenIndex, _) => {
                let p = self.cluster_precision.unwrap_or(0.0);
                (p == 1.0, self.cluster_program.len() as f64, p)
            }
        }
    }

    fn is_perfect(&self) -> bool {
        match self.parity {
            Parity::OddIndex => self.image_metrics.is_some_and(|m| m.precision == 1.0 && m.recall == 1.0),
            Parity::EvenIndex => false,
        }
    }
}

pub struct SequenceSetup<'a> {
    pub task: &'a MnistTask,
    pub table: EmbeddingTable,
    pub space: BodyAtomSpace,
    pub neighbours: Neighbours,
    pub scorer: RuleScorer,
    pub d: usize,
}

impl<'a> SequenceSetup<'a> {
    pub fn new(task: &'a MnistTask, cfg: &RunConfig) -> Result<Self> {
        let d = cfg.variables.unwrap_or(task.variables);
        Ok(SequenceSetup {
            task,
            table: EmbeddingTable::from_rows(&task.train_embeddings, EmbeddingSource::ToyEncoder)?,
            space: enumerate_body_atoms(&task.train.preds, d, task.target)?,
            neighbours: Neighbours::new(&task.train),
            scorer: RuleScorer::new(&task.train),
            d,
        })
    }

    pub fn run(&self, cfg: &RunConfig, seed: u64) -> Result<SequenceOutcome> {
        let start = Instant::now();
        let net = NetworkConfig { seed, ..cfg.network.clone() };
        let centroids = prepare_centroids(&self.table, cfg, seed)?;
        let k = centroids.k();
        let mut params = NetworkParams::init(self.space.n(), &net)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ba7c);
        let fb = &self.task.train;
        let table = &self.table;
        let mut source = |_: usize, c: Option<&CentroidSet>| -> Result<(Array2<f64>, Array1<f64>)> {
            let c = c.ok_or_else(|| Error::Config("sequence training needs centroids".into()))?;
            let kb = RelationalKb::build(fb, &hard_assign_all(table, c))?;
            let sub = sample_substitutions(fb, &self.neighbours, self.d, self.task.target, net.batch, &cfg.sampler, &mut rng)?;
            Ok(make_training_batch(&sub, &self.space, &kb))
        };
        let term = ClusterTerm { table, centroids };
        let (history, centroids) = train(&mut params, &mut source, Some(term), &net)?;
        let centroids = centroids.expect("cluster term was given");
        let assignment = hard_assign_all(table, &centroids);
        let clustered = cluster_fact_base(fb, &assignment, k);
        let cluster_scorer = RuleScorer::new(&clustered);

        let head = head_atom(self.task.target, 1);
        let extracted = extract_all(&params, &self.space, &head, net.extract_threshold, &cfg.extra_thresholds);
        let program = if cfg.keep_all {
            extracted.clone()
        } else {
            prefer_specific(&filter_exact(&extracted, &self.scorer), &self.scorer)
        };
        let cluster_program = filter_exact(&extracted, &cluster_scorer);
        let image_metrics = match evaluate_rules(&program, &self.task.test, &self.task.test_positives) {
            Ok(m) => Some(m),
            Err(Error::UnsatisfiedBodies) => None,
            Err(e) => return Err(e),
        };
        let cluster_precision = match evaluate_rules(&cluster_program, &clustered, &clustered.positives) {
            Ok(m) => Some(m.precision),
            Err(Error::UnsatisfiedBodies) | Err(Error::EmptyTestPositives) => None,
            Err(e) => return Err(e),
        };
        Ok(SequenceOutcome {
            seed,
            parity: self.task.parity,
            extracted,
            program,
            cluster_program,
            image_metrics,
            cluster_precision,
            assignment,
            centroids,
            params,
            history,
            secs: start.elapsed().as_secs_f64(),
        })
    }
}
