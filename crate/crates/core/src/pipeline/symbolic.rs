use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{extract_all, filter_exact, head_atom, Ranked, RunConfig};
use crate::cluster::CentroidSet;
use crate::datasets::IlpTask;
use crate::error::{Error, Result};
use crate::kb::{enumerate_body_atoms, make_training_batch, sample_substitutions, BodyAtomSpace, Neighbours, RelationalKb};
use crate::logic::{evaluate_rules, LogicProgram, Metrics, RuleScorer};
use crate::network::{train, History, NetworkConfig, NetworkParams};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunOutcome {
    pub seed: u64,
    /// Rules as extracted, before filtering.
    pub extracted: LogicProgram,
    pub program: LogicProgram,
    pub metrics: Option<Metrics>,
    pub history: History,
    pub params: NetworkParams,
    pub secs: f64,
}

impl Ranked for RunOutcome {
    fn seed(&self) -> u64 {
        self.seed
    }

    fn score(&self) -> (bool, f64, f64) {
        match self.metrics {
            Some(m) => (m.precision == 1.0, m.recall, m.precision),
            None => (false, 0.0, 0.0),
        }
    }

    fn is_perfect(&self) -> bool {
        self.metrics.is_some_and(|m| m.precision == 1.0 && m.recall == 1.0)
    }
}

/// Everything a symbolic run needs that does not depend on the seed.
pub struct SymbolicSetup<'a> {
    pub task: &'a IlpTask,
    pub space: BodyAtomSpace,
    pub kb: RelationalKb,
    pub neighbours: Neighbours,
    pub scorer: RuleScorer,
    pub d: usize,
}

impl<'a> SymbolicSetup<'a> {
    pub fn new(task: &'a IlpTask, variables: Option<usize>) -> Result<Self> {
        let d = variables.unwrap_or(task.variables);
        let space = enumerate_body_atoms(&task.train.preds, d, task.target)?;
        Ok(SymbolicSetup {
            task,
            space,
            kb: RelationalKb::symbolic(&task.train),
            neighbours: Neighbours::new(&task.train),
            scorer: RuleScorer::new(&task.train),
            d,
        })
    }

    pub fn run(&self, cfg: &RunConfig, seed: u64) -> Result<RunOutcome> {
        let start = Instant::now();
        let net = NetworkConfig { seed, ..cfg.network.clone() };
        let mut params = NetworkParams::init(self.space.n(), &net)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ba7c);
        let fb = &self.task.train;
        let mut source = |_: usize, _: Option<&CentroidSet>| -> Result<(Array2<f64>, Array1<f64>)> {
            let sub = sample_substitutions(fb, &self.neighbours, self.d, self.task.target, net.batch, &cfg.sampler, &mut rng)?;
            Ok(make_training_batch(&sub, &self.space, &self.kb))
        };
        let (history, _) = train(&mut params, &mut source, None, &net)?;
        let arity = fb.preds.get(self.task.target).arity;
        let head = head_atom(self.task.target, arity);
        let extracted = extract_all(&params, &self.space, &head, net.extract_threshold, &cfg.extra_thresholds);
        let program = if cfg.keep_all { extracted.clone() } else { filter_exact(&extracted, &self.scorer) };
        let metrics = match evaluate_rules(&program, &self.task.test, &self.task.test_positives) {
            Ok(m) => Some(m),
            Err(Error::UnsatisfiedBodies) => None,
            Err(e) => return Err(e),
        };
        Ok(RunOutcome {
            seed,
            extracted,
            program,
            metrics,
            history,
            params,
            secs: start.elapsed().as_secs_f64(),
        })
    }
}
