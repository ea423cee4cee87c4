//! The differentiable rule learner.
//!
//! Layer `i` computes `h_i = (1/(1-d)) · relu(M_i h_{i-1} - d)` with
//! `M_i = row_softmax(M̃_i)`, and the output is the fuzzy disjunction
//! `ŷ = 1 - ∏_u (1 - h_m[u])`. With `d = (k-1)/k` a row spreading weight
//! `1/k` over `k` true inputs outputs exactly 1, and 0 if any is false.
//! Rows of `M_P = M_m ⋯ M_1` are read off as rule bodies.

mod extract;
mod optim;
mod train;

pub use extract::{extract_bodies, extract_rules, logic_program_tensor};
pub use optim::AdamW;
pub use train::{train, BatchSource, ClusterTerm, EpochRecord, History};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_chunks, ExecMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Output width of each layer; the last layer's rows are the candidate
    /// rules.
    pub widths: Vec<usize>,
    pub d_bias: f64,
    pub rule_lr: f64,
    pub centroid_lr: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub extract_threshold: f64,
    /// Standard deviation of the raw weights at initialisation.
    pub init_std: f64,
    pub weight_decay: f64,
    pub early_stop_mse: f64,
    pub early_stop_patience: usize,
    #[serde(default)]
    pub exec: ExecMode,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            widths: vec![64],
            d_bias: 2.0 / 3.0,
            rule_lr: 0.05,
            centroid_lr: 0.5,
            lambda: 0.0,
            epochs: 2000,
            batch: 64,
            seed: 0,
            extract_threshold: 0.3,
            init_std: 3.0,
            weight_decay: 0.0,
            early_stop_mse: 1e-4,
            early_stop_patience: 20,
            exec: ExecMode::Parallel,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.widths.is_empty() || self.widths.contains(&0) {
            return bad(format!("layer widths must be nonempty and positive, got {:?}", self.widths));
        }
        if !(self.d_bias > 0.0 && self.d_bias < 1.0) {
            return bad(format!("d_bias must lie in (0,1), got {}", self.d_bias));
        }
        if !(self.extract_threshold > 0.0 && self.extract_threshold < 1.0) {
            return bad(format!("extract_threshold must lie in (0,1), got {}", self.extract_threshold));
        }
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        for (name, v) in [("rule_lr", self.rule_lr), ("centroid_lr", self.centroid_lr)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.batch == 0 {
            return bad("batch must be positive".into());
        }
        if self.init_std < 0.0 {
            return bad("init_std must be non-negative".into());
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.widths.len()
    }
}

/// Raw (pre-softmax) layer matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub raw: Vec<Array2<f64>>,
}

impl NetworkParams {
    pub fn init(n_inputs: usize, cfg: &NetworkConfig) -> Result<Self> {
        cfg.validate()?;
        if n_inputs == 0 {
            return Err(Error::Config("the body-atom space is empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal = Normal::new(0.0, cfg.init_std).map_err(|e| Error::Config(e.to_string()))?;
        let mut cols = n_inputs;
        let mut raw = Vec::with_capacity(cfg.m());
        for &w in &cfg.widths {
            raw.push(Array2::from_shape_fn((w, cols), |_| normal.sample(&mut rng)));
            cols = w;
        }
        Ok(NetworkParams { raw })
    }

    pub fn n_inputs(&self) -> usize {
        self.raw[0].ncols()
    }

    pub fn softmaxed(&self) -> Vec<Array2<f64>> {
        self.raw.iter().map(|m| row_softmax(m.view())).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.raw.iter().all(|m| m.iter().all(|x| x.is_finite()))
    }
}

/// Exponentiates each row with a max shift and normalises it.
pub fn row_softmax(m: ArrayView2<f64>) -> Array2<f64> {
    let mut out = m.to_owned();
    for mut row in out.rows_mut() {
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|x| (x - mx).exp());
        let z = row.sum();
        row.mapv_inplace(|x| x / z);
    }
    out
}

/// `1 - ∏ (1 - h)`.
pub fn fuzzy_or(h: ArrayView1<f64>) -> f64 {
    1.0 - h.iter().map(|x| 1.0 - x).product::<f64>()
}

fn layer(h: ArrayView2<f64>, m: &Array2<f64>, d: f64) -> (Array2<f64>, Array2<f64>) {
    let pre = h.dot(&m.t());
    let scale = 1.0 / (1.0 - d);
    let out = pre.mapv(|a| if a > d { scale * (a - d) } else { 0.0 });
    (pre, out)
}

/// Predictions for each row of `x`.
pub fn forward_batch(x: ArrayView2<f64>, params: &NetworkParams, cfg: &NetworkConfig) -> Array1<f64> {
    let ms = params.softmaxed();
    let mut h = x.to_owned();
    for m in &ms {
        h = layer(h.view(), m, cfg.d_bias).1;
    }
    h.rows().into_iter().map(fuzzy_or).collect()
}

pub fn forward(x: ArrayView1<f64>, params: &NetworkParams, cfg: &NetworkConfig) -> f64 {
    let x2 = x.insert_axis(Axis(0));
    forward_batch(x2, params, cfg)[0]
}

pub fn mse(pred: &Array1<f64>, y: ArrayView1<f64>) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64
}

/// Joint objective `MSE + λ · cluster`, given the clustering term.
pub fn loss(x: ArrayView2<f64>, y: ArrayView1<f64>, params: &NetworkParams, cfg: &NetworkConfig, cluster: f64) -> f64 {
    mse(&forward_batch(x, params, cfg), y) + cfg.lambda * cluster
}

const ROW_CHUNK: usize = 32;

/// Gradient of the batch MSE with respect to the raw matrices, plus the MSE.
///
/// Rows are processed in fixed chunks whose gradients are summed in chunk
/// order, so the result does not depend on the execution mode.
pub fn backward(x: ArrayView2<f64>, y: ArrayView1<f64>, params: &NetworkParams, cfg: &NetworkConfig) -> (Vec<Array2<f64>>, f64) {
    let ms = params.softmaxed();
    let b = x.nrows();
    if b == 0 {
        return (params.raw.iter().map(|m| Array2::zeros(m.raw_dim())).collect(), 0.0);
    }
    let rows: Vec<usize> = (0..b).collect();
    let parts = map_chunks(&rows, ROW_CHUNK, cfg.exec, |start, chunk| {
        let xs = x.slice(s![start..start + chunk.len(), ..]);
        let ys = y.slice(s![start..start + chunk.len()]);
        chunk_grad(xs, ys, &ms, cfg.d_bias, b)
    });
    let mut grads: Vec<Array2<f64>> = ms.iter().map(|m| Array2::zeros(m.raw_dim())).collect();
    let mut sq = 0.0;
    for (g, e) in parts {
        for (acc, gi) in grads.iter_mut().zip(g) {
            *acc += &gi;
        }
        sq += e;
    }
    // Softmax rows: g̃ = M ⊙ (g - <g, M>).
    let raw_grads = grads
        .into_iter()
        .zip(&ms)
        .map(|(g, m)| {
            let mut out = Array2::zeros(m.raw_dim());
            for ((mut o, gr), mr) in out.rows_mut().into_iter().zip(g.rows()).zip(m.rows()) {
                let inner = gr.dot(&mr);
                for ((ov, gv), mv) in o.iter_mut().zip(gr).zip(mr) {
                    *ov = mv * (gv - inner);
                }
            }
            out
        })
        .collect();
    (raw_grads, sq / b as f64)
}

/// Gradients with respect to the softmaxed matrices for a slice of rows, and
/// the slice's summed squared error. `total` is the full batch size.
fn chunk_grad(x: ArrayView2<f64>, y: ArrayView1<f64>, ms: &[Array2<f64>], d: f64, total: usize) -> (Vec<Array2<f64>>, f64) {
    let scale = 1.0 / (1.0 - d);
    let mut inputs = vec![x.to_owned()];
    let mut pres = Vec::with_capacity(ms.len());
    for m in ms {
        let (pre, out) = layer(inputs.last().expect("input").view(), m, d);
        pres.push(pre);
        inputs.push(out);
    }
    let h = inputs.pop().expect("output layer");
    let (rows, width) = h.dim();
    let mut g_h = Array2::<f64>::zeros((rows, width));
    let mut sq = 0.0;
    for r in 0..rows {
        let hr = h.row(r);
        // Prefix/suffix products of (1 - h) give ∂ŷ/∂h_u without division.
        let mut prefix = vec![1.0; width + 1];
        for u in 0..width {
            prefix[u + 1] = prefix[u] * (1.0 - hr[u]);
        }
        let mut suffix = vec![1.0; width + 1];
        for u in (0..width).rev() {
            suffix[u] = suffix[u + 1] * (1.0 - hr[u]);
        }
        let yhat = 1.0 - prefix[width];
        let err = yhat - y[r];
        sq += err * err;
        let g_out = 2.0 * err / total as f64;
        for u in 0..width {
            g_h[[r, u]] = g_out * prefix[u] * suffix[u + 1];
        }
    }
    let mut grads = vec![Array2::zeros((0, 0)); ms.len()];
    let mut g = g_h;
    for i in (0..ms.len()).rev() {
        let pre = &pres[i];
        let g_pre = ndarray::Zip::from(&g).and(pre).map_collect(|&gv, &a| if a > d { gv * scale } else { 0.0 });
        grads[i] = g_pre.t().dot(&inputs[i]);
        if i > 0 {
            g = g_pre.dot(&ms[i]);
        }
    }
    (grads, sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn cfg(widths: Vec<usize>, d: f64) -> NetworkConfig {
        NetworkConfig {
            widths,
            d_bias: d,
            ..Default::default()
        }
    }

    #[test]
    fn fuzzy_or_examples() {
        assert!((fuzzy_or(array![0.5, 0.5].view()) - 0.75).abs() < 1e-15);
        assert_eq!(fuzzy_or(array![0.2, 1.0, 0.3].view()), 1.0);
    }

    #[test]
    fn softmax_rows() {
        let m = row_softmax(array![[1.0, 1.0, 1.0, 1.0], [10.0, 0.0, 0.0, 0.0]].view());
        for v in m.row(0) {
            assert!((v - 0.25).abs() < 1e-15);
        }
        let eps = (-10.0f64).exp() / (1.0 + 3.0 * (-10.0f64).exp());
        assert!((m[[1, 1]] - eps).abs() < 1e-18);
        let shifted = row_softmax(array![[11.0, 1.0, 1.0, 1.0]].view());
        for (a, b) in shifted.row(0).iter().zip(m.row(1)) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_row_is_conjunction() {
        // Three inputs, weight 1/3 each, d = 2/3.
        let c = cfg(vec![1], 2.0 / 3.0);
        let p = NetworkParams { raw: vec![Array2::zeros((1, 3))] };
        assert!((forward(array![1.0, 1.0, 1.0].view(), &p, &c) - 1.0).abs() < 1e-12);
        assert_eq!(forward(array![1.0, 0.0, 1.0].view(), &p, &c), 0.0);
    }

    #[test]
    fn dead_units_give_zero_gradient() {
        let c = cfg(vec![2], 0.5);
        let p = NetworkParams { raw: vec![array![[0.0, 0.0, 0.0], [1.0, -1.0, 0.0]]] };
        let x = array![[0.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let y = array![1.0, 1.0];
        let (g, _) = backward(x.view(), y.view(), &p, &c);
        assert!(g[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn exact_prediction_has_zero_gradient() {
        let c = cfg(vec![1], 0.5);
        let p = NetworkParams { raw: vec![array![[5.0, -5.0]]] };
        let x = array![[1.0, 0.0]];
        let y = forward_batch(x.view(), &p, &c);
        let (g, e) = backward(x.view(), y.view(), &p, &c);
        assert_eq!(e, 0.0);
        assert!(g[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(cfg(vec![], 0.5).validate().is_err());
        assert!(cfg(vec![4], 1.0).validate().is_err());
        assert!(cfg(vec![4, 2], 0.5).validate().is_ok());
    }
}
