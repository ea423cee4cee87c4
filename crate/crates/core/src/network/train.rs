use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{backward, forward_batch, AdamW, NetworkConfig, NetworkParams};
use crate::cluster::{cluster_grad_with, cluster_loss_with, CentroidSet, EmbeddingTable};
use crate::error::{Error, Result};

/// Supplies a fresh `(X, y)` batch every epoch. The current centroids are
/// passed in so that sources backed by a latent knowledge base can rebuild
/// their lookups after a centroid step.
pub trait BatchSource {
    fn next_batch(&mut self, epoch: usize, centroids: Option<&CentroidSet>) -> Result<(Array2<f64>, Array1<f64>)>;
}

impl<F> BatchSource for F
where
    F: FnMut(usize, Option<&CentroidSet>) -> Result<(Array2<f64>, Array1<f64>)>,
{
    fn next_batch(&mut self, epoch: usize, centroids: Option<&CentroidSet>) -> Result<(Array2<f64>, Array1<f64>)> {
        self(epoch, centroids)
    }
}

/// Embeddings and centroids trained jointly with the rule network.
#[derive(Clone, Debug)]
pub struct ClusterTerm<'a> {
    pub table: &'a EmbeddingTable,
    pub centroids: CentroidSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// `mse + λ · cluster`.
    pub h: f64,
    pub mse: f64,
    /// Clustering loss per embedding.
    pub cluster: f64,
    pub acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
    pub stopped_early: bool,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,H,mse,cluster,acc\n");
        for r in &self.records {
            s.push_str(&format!("{},{},{},{},{}\n", r.epoch, r.h, r.mse, r.cluster, r.acc));
        }
        s
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

fn accuracy(pred: &Array1<f64>, y: &Array1<f64>) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let hits = pred.iter().zip(y).filter(|(p, t)| (**p > 0.5) == (**t > 0.5)).count();
    hits as f64 / y.len() as f64
}

/// One AdamW step on the rule matrices and, when a clustering term is given
/// and `λ > 0`, one gradient step on the centroids, per epoch.
pub fn train<S: BatchSource + ?Sized>(
    params: &mut NetworkParams,
    source: &mut S,
    mut cluster: Option<ClusterTerm<'_>>,
    cfg: &NetworkConfig,
) -> Result<(History, Option<CentroidSet>)> {
    cfg.validate()?;
    let mut opt = AdamW::new(cfg.rule_lr, cfg.weight_decay, &params.raw);
    let mut hist = History::default();
    let mut calm = 0;
    for epoch in 0..cfg.epochs {
        let (x, y) = source.next_batch(epoch, cluster.as_ref().map(|c| &c.centroids))?;
        if x.ncols() != params.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: params.n_inputs(),
                found: x.ncols(),
            });
        }
        let (grads, mse) = backward(x.view(), y.view(), params, cfg);
        let pred = forward_batch(x.view(), params, cfg);
        let mut cl = 0.0;
        if let Some(term) = cluster.as_mut() {
            let n = term.table.len().max(1) as f64;
            cl = cluster_loss_with(term.table, &term.centroids, cfg.exec) / n;
            if cfg.lambda > 0.0 {
                let g = cluster_grad_with(term.table, &term.centroids, cfg.exec);
                term.centroids.centers.scaled_add(-cfg.centroid_lr * cfg.lambda / n, &g);
            }
        }
        let h = mse + cfg.lambda * cl;
        if !h.is_finite() || grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::Diverged {
                epoch,
                detail: format!("loss {h}, mse {mse}, cluster {cl}"),
            });
        }
        opt.step(&mut params.raw, &grads);
        if !params.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: "non-finite rule weights after the optimiser step".into(),
            });
        }
        hist.records.push(EpochRecord {
            epoch,
            h,
            mse,
            cluster: cl,
            acc: accuracy(&pred, &y),
        });
        if mse < cfg.early_stop_mse {
            calm += 1;
            if calm >= cfg.early_stop_patience {
                hist.stopped_early = true;
                break;
            }
        } else {
            calm = 0;
        }
    }
    Ok((hist, cluster.map(|c| c.centroids)))
}
