//! The temporal digit-sequence task in symbolic form.
//!
//! Images are constants `img1, img2, ...` whose (hidden) labels follow
//! `0,5,1,5,2,5,...`: odd positions count up, even positions are always 5.
//! Relations are `succ` (label successor), `start` (first image) and
//! `before_n` (precedes by exactly `n` positions, `n = 1..=10`). Each image
//! also gets a toy embedding, a noisy one-hot of its label, so the pipeline
//! must recover the digit classes by clustering.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::EmbeddingRecord;
use crate::cluster::EmbeddingTable;
use crate::error::{Error, Result};
use crate::logic::{FactBase, GroundAtom, PredId, PredicateKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    EvenIndex,
    OddIndex,
}

pub const MAX_GAP: usize = 10;
pub const EMBED_NOISE: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct MnistTask {
    pub parity: Parity,
    pub train: FactBase,
    /// Held-out 20-image sequence over fresh image constants; its positives
    /// hold the seed (the last target image).
    pub test: FactBase,
    pub test_positives: BTreeSet<GroundAtom>,
    pub target: PredId,
    pub train_labels: Vec<usize>,
    pub test_labels: Vec<usize>,
    /// Embedding per constant id of `train` / `test`.
    pub train_embeddings: Vec<Vec<f64>>,
    pub test_embeddings: Vec<Vec<f64>>,
    pub variables: usize,
}

/// Label at 1-based position `i`.
pub fn label_at(i: usize) -> usize {
    if i % 2 == 1 {
        ((i - 1) / 2) % 10
    } else {
        5
    }
}

fn is_target(i: usize, parity: Parity) -> bool {
    match parity {
        Parity::EvenIndex => i % 2 == 0,
        Parity::OddIndex => i % 2 == 1,
    }
}

fn sequence(len: usize, parity: Parity, prefix: &str) -> (FactBase, Vec<usize>) {
    let mut fb = FactBase::new();
    for p in ["succ", "start"] {
        let arity = if p == "start" { 1 } else { 2 };
        fb.preds.declare(p, arity, PredicateKind::Known).expect("valid");
    }
    for n in 1..=MAX_GAP {
        fb.preds.declare(&format!("before_{n}"), 2, PredicateKind::Known).expect("valid");
    }
    fb.preds.declare("target", 1, PredicateKind::Target).expect("valid");
    let names: Vec<String> = (1..=len).map(|i| format!("{prefix}{i}")).collect();
    for n in &names {
        fb.constants.intern(n);
    }
    fb.add_background("start", &[&names[0]]).expect("valid");
    for i in 1..=len {
        for j in 1..=len {
            if label_at(j) == label_at(i) + 1 {
                fb.add_background("succ", &[&names[i - 1], &names[j - 1]]).expect("valid");
            }
            if j > i && j - i <= MAX_GAP {
                fb.add_background(&format!("before_{}", j - i), &[&names[i - 1], &names[j - 1]])
                    .expect("valid");
            }
        }
        if is_target(i, parity) {
            fb.add_positive("target", &[&names[i - 1]]).expect("valid");
        } else {
            fb.add_negative("target", &[&names[i - 1]]).expect("valid");
        }
    }
    let labels = (1..=len).map(label_at).collect();
    (fb, labels)
}

fn embed(labels: &[usize], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let noise = Normal::new(0.0, EMBED_NOISE).expect("valid sd");
    labels
        .iter()
        .map(|&l| (0..10).map(|k| if k == l { 1.0 } else { 0.0 } + noise.sample(rng)).collect())
        .collect()
}

pub fn gen_mnist_sequence(prefix_len: usize, parity: Parity, seed: u64) -> Result<MnistTask> {
    if prefix_len < 4 {
        return Err(Error::Config(format!("sequence prefix must be at least 4, got {prefix_len}")));
    }
    let (train, train_labels) = sequence(prefix_len, parity, "img");
    // One full cycle of the counting digits, so label successors never wrap.
    let test_len = 20;
    let (mut test, test_labels) = sequence(test_len, parity, "tst");
    let target = train.preds.id("target").expect("declared");
    let test_positives = std::mem::take(&mut test.positives);
    test.negatives.clear();
    // The rules of this task chain towards later images, so the last target
    // image is the seed.
    let last = test_positives.iter().max_by_key(|a| a.args[0]).copied().expect("nonempty");
    test.positives.insert(last);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train_embeddings = embed(&train_labels, &mut rng);
    let test_embeddings = embed(&test_labels, &mut rng);
    Ok(MnistTask {
        parity,
        train,
        test,
        test_positives,
        target,
        train_labels,
        test_labels,
        train_embeddings,
        test_embeddings,
        variables: 2,
    })
}

impl MnistTask {
    /// Sidecar records for the training and held-out images, keyed by
    /// image constant.
    pub fn embedding_records(&self) -> (Vec<EmbeddingRecord>, Vec<EmbeddingRecord>) {
        let recs = |fb: &FactBase, rows: &[Vec<f64>]| {
            fb.constants
                .names()
                .iter()
                .zip(rows)
                .map(|(id, v)| EmbeddingRecord { id: id.clone(), vector: v.clone() })
                .collect()
        };
        (recs(&self.train, &self.train_embeddings), recs(&self.test, &self.test_embeddings))
    }

    /// Replaces the toy embeddings by external ones, matched by image id.
    pub fn with_embeddings(mut self, train: &[EmbeddingRecord], test: &[EmbeddingRecord]) -> Result<Self> {
        let a = EmbeddingTable::from_records(train, &self.train.constants)?;
        let b = EmbeddingTable::from_records(test, &self.test.constants)?;
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
        }
        let rows = |t: &EmbeddingTable| t.vectors.rows().into_iter().map(|r| r.to_vec()).collect();
        self.train_embeddings = rows(&a);
        self.test_embeddings = rows(&b);
        Ok(self)
    }
}
