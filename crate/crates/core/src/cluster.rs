//! Differentiable clustering of constant embeddings.
//!
//! Soft weights `G_i(e) = softmax_i(-α f(e, c_i))` with `f` the squared
//! Euclidean distance. The clustering loss is `Σ_e Σ_i f(e, c_i) G_i(e)`;
//! its gradient with respect to a centre is
//! `Σ_e G_j (1 - α (f_j - L_e)) · 2 (c_j - e)` where `L_e = Σ_i f_i G_i`.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::EmbeddingRecord;
use crate::error::{Error, Result};
use crate::logic::ConstantTable;
use crate::par::{map_chunks, ExecMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    IdentitySymbolic,
    ToyEncoder,
    ExternalFile,
}

/// One embedding row per constant id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub vectors: Array2<f64>,
    pub source: EmbeddingSource,
}

impl EmbeddingTable {
    pub fn new(vectors: Array2<f64>, source: EmbeddingSource) -> Result<Self> {
        if vectors.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("embedding table"));
        }
        Ok(EmbeddingTable { vectors, source })
    }

    /// Distinct one-hot vector per constant.
    pub fn identity(n: usize) -> Self {
        EmbeddingTable {
            vectors: Array2::eye(n),
            source: EmbeddingSource::IdentitySymbolic,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], source: EmbeddingSource) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut m = Array2::zeros((rows.len(), dim));
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            m.row_mut(i).assign(&ArrayView1::from(r.as_slice()));
        }
        Self::new(m, source)
    }

    /// Orders sidecar records by the constant table; every constant needs a
    /// record, extra records are ignored.
    pub fn from_records(records: &[EmbeddingRecord], constants: &ConstantTable) -> Result<Self> {
        let by_id: std::collections::HashMap<&str, &Vec<f64>> =
            records.iter().map(|r| (r.id.as_str(), &r.vector)).collect();
        let mut rows = Vec::with_capacity(constants.len());
        for name in constants.names() {
            let v = by_id.get(name.as_str()).ok_or_else(|| Error::MissingEmbedding(name.clone()))?;
            rows.push((*v).clone());
        }
        Self::from_rows(&rows, EmbeddingSource::ExternalFile)
    }

    pub fn to_records(&self, constants: &ConstantTable) -> Vec<EmbeddingRecord> {
        constants
            .names()
            .iter()
            .zip(self.vectors.rows())
            .map(|(n, v)| EmbeddingRecord {
                id: n.clone(),
                vector: v.to_vec(),
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(i)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentroidSet {
    /// `K × dim`.
    pub centers: Array2<f64>,
    pub alpha: f64,
}

impl CentroidSet {
    pub fn new(centers: Array2<f64>, alpha: f64) -> Result<Self> {
        if centers.nrows() == 0 {
            return Err(Error::Config("at least one centroid is required".into()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
        }
        if centers.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("centroids"));
        }
        Ok(CentroidSet { centers, alpha })
    }

    pub fn k(&self) -> usize {
        self.centers.nrows()
    }

    pub fn dim(&self) -> usize {
        self.centers.ncols()
    }
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn distances(e: ArrayView1<f64>, c: &CentroidSet) -> Vec<f64> {
    c.centers.rows().into_iter().map(|ci| sq_dist(e, ci)).collect()
}

fn softmin(f: &[f64], alpha: f64) -> Vec<f64> {
    let m = f.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = f.iter().map(|&fi| (-alpha * (fi - m)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn check(e: ArrayView1<f64>, c: &CentroidSet) -> Result<()> {
    if e.len() != c.dim() {
        return Err(Error::DimensionMismatch {
            expected: c.dim(),
            found: e.len(),
        });
    }
    if e.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("embedding vector"));
    }
    Ok(())
}

/// Soft assignment weights of `e` over the centroids.
pub fn g_weights(e: ArrayView1<f64>, c: &CentroidSet) -> Result<Vec<f64>> {
    check(e, c)?;
    Ok(softmin(&distances(e, c), c.alpha))
}

/// Index of the nearest centroid, lowest index on ties.
pub fn hard_assign(e: ArrayView1<f64>, c: &CentroidSet) -> usize {
    let f = distances(e, c);
    let mut best = 0;
    for (i, &d) in f.iter().enumerate() {
        if d < f[best] {
            best = i;
        }
    }
    best
}

pub fn hard_assign_all(table: &EmbeddingTable, c: &CentroidSet) -> Vec<usize> {
    table.vectors.rows().into_iter().map(|e| hard_assign(e, c)).collect()
}

const CHUNK: usize = 256;

/// `Σ_e Σ_i f(e, c_i) G_i(e)` over every row of the table.
pub fn cluster_loss(table: &EmbeddingTable, c: &CentroidSet) -> f64 {
    cluster_loss_with(table, c, ExecMode::Sequential)
}

pub fn cluster_loss_with(table: &EmbeddingTable, c: &CentroidSet, mode: ExecMode) -> f64 {
    let rows: Vec<ArrayView1<f64>> = table.vectors.rows().into_iter().collect();
    map_chunks(&rows, CHUNK, mode, |_, chunk| {
        chunk
            .iter()
            .map(|e| {
                let f = distances(*e, c);
                let g = softmin(&f, c.alpha);
                f.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
            })
            .sum::<f64>()
    })
    .into_iter()
    .sum()
}

/// Exact gradient of [`cluster_loss`] with respect to the centres.
pub fn cluster_grad(table: &EmbeddingTable, c: &CentroidSet) -> Array2<f64> {
    cluster_grad_with(table, c, ExecMode::Sequential)
}

pub fn cluster_grad_with(table: &EmbeddingTable, c: &CentroidSet, mode: ExecMode) -> Array2<f64> {
    let rows: Vec<ArrayView1<f64>> = table.vectors.rows().into_iter().collect();
    let parts = map_chunks(&rows, CHUNK, mode, |_, chunk| {
        let mut grad = Array2::<f64>::zeros(c.centers.raw_dim());
        for e in chunk {
            let f = distances(*e, c);
            let g = softmin(&f, c.alpha);
            let le: f64 = f.iter().zip(&g).map(|(a, b)| a * b).sum();
            for (j, mut gj) in grad.rows_mut().into_iter().enumerate() {
                let coef = g[j] * (1.0 - c.alpha * (f[j] - le)) * 2.0;
                if coef == 0.0 {
                    continue;
                }
                let cj = c.centers.row(j);
                for ((gv, cv), ev) in gj.iter_mut().zip(cj).zip(e.iter()) {
                    *gv += coef * (cv - ev);
                }
            }
        }
        grad
    });
    let mut total = Array2::<f64>::zeros(c.centers.raw_dim());
    for p in parts {
        total += &p;
    }
    total
}

/// k-means++ seeding: the first centre is a uniformly drawn embedding, each
/// further centre is drawn with probability proportional to its squared
/// distance from the nearest centre chosen so far.
pub fn init_centroids(table: &EmbeddingTable, k: usize, alpha: f64, seed: u64) -> Result<CentroidSet> {
    let n = table.len();
    if k == 0 || k > n {
        return Err(Error::TooFewEmbeddings { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(table.row(i), table.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total <= 0.0 {
            // All remaining points coincide with chosen centres.
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        } else {
            let mut r = rng.gen_range(0.0..total);
            let mut pick = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if r < d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            pick
        };
        chosen.push(pick);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(table.row(i), table.row(pick)));
        }
    }
    let mut centers = Array2::zeros((k, table.dim()));
    for (row, &i) in chosen.iter().enumerate() {
        centers.row_mut(row).assign(&table.row(i));
    }
    CentroidSet::new(centers, alpha)
}

/// `k` distinct embeddings drawn uniformly, with no spreading.
pub fn random_centroids(table: &EmbeddingTable, k: usize, alpha: f64, seed: u64) -> Result<CentroidSet> {
    let n = table.len();
    if k == 0 || k > n {
        return Err(Error::TooFewEmbeddings { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, n, k);
    let mut centers = Array2::zeros((k, table.dim()));
    for (row, i) in chosen.iter().enumerate() {
        centers.row_mut(row).assign(&table.row(i));
    }
    CentroidSet::new(centers, alpha)
}

/// Plain gradient descent on the per-embedding mean loss
/// `cluster_loss / |E|`; returns the mean loss before each step.
pub fn descend(table: &EmbeddingTable, c: &mut CentroidSet, lr: f64, steps: usize, mode: ExecMode) -> Vec<f64> {
    let n = table.len().max(1) as f64;
    let mut trace = Vec::with_capacity(steps);
    for _ in 0..steps {
        trace.push(cluster_loss_with(table, c, mode) / n);
        let g = cluster_grad_with(table, c, mode);
        c.centers.scaled_add(-lr / n, &g);
    }
    trace
}

/// Makes every centre within squared distance `tol` of a lower-indexed
/// centre an exact copy of it, so hard assignment empties the duplicate.
/// Returns the number of centres merged.
pub fn collapse_duplicates(c: &mut CentroidSet, tol: f64) -> usize {
    let mut merged = 0;
    for j in 1..c.k() {
        for i in 0..j {
            if sq_dist(c.centers.row(i), c.centers.row(j)) < tol {
                let ci = c.centers.row(i).to_owned();
                c.centers.row_mut(j).assign(&ci);
                merged += 1;
                break;
            }
        }
    }
    merged
}

/// Members of each cluster under hard assignment.
pub fn members(assign: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); k];
    for (i, &a) in assign.iter().enumerate() {
        out[a].push(i);
    }
    out
}

/// Relabels clusters by ascending population (ties by old index) and
/// returns the permuted centroid set.
pub fn sort_by_population(table: &EmbeddingTable, c: &CentroidSet) -> CentroidSet {
    let assign = hard_assign_all(table, c);
    let counts: Vec<usize> = members(&assign, c.k()).iter().map(Vec::len).collect();
    let mut order: Vec<usize> = (0..c.k()).collect();
    order.sort_by_key(|&i| (counts[i], i));
    let centers = c.centers.select(Axis(0), &order);
    CentroidSet {
        centers,
        alpha: c.alpha,
    }
}

/// Centroid of a set of rows, used by tests and the k-means oracle.
pub fn mean_row(table: &EmbeddingTable, rows: &[usize]) -> Array1<f64> {
    let mut m = Array1::zeros(table.dim());
    for &r in rows {
        m += &table.row(r);
    }
    m / rows.len().max(1) as f64
}
