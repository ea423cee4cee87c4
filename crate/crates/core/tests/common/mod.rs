//! Independent reference implementations used as test oracles. None of
//! them call into the library's numerical or logical code.

#![allow(dead_code)]

pub mod props;

use std::collections::BTreeSet;

use rand::Rng;

/// Row-wise softmax written out by hand.
pub fn softmax_rows(raw: &[Vec<f64>]) -> Vec<Vec<f64>> {
    raw.iter()
        .map(|row| {
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|x| (x - mx).exp()).collect();
            let z: f64 = e.iter().sum();
            e.into_iter().map(|x| x / z).collect()
        })
        .collect()
}

/// Rule network prediction for one input, by plain loops.
pub fn net_forward(x: &[f64], layers: &[Vec<Vec<f64>>], d: f64) -> f64 {
    let mut h = x.to_vec();
    for raw in layers {
        let m = softmax_rows(raw);
        h = m
            .iter()
            .map(|row| {
                let a: f64 = row.iter().zip(&h).map(|(w, v)| w * v).sum();
                if a > d {
                    (a - d) / (1.0 - d)
                } else {
                    0.0
                }
            })
            .collect();
    }
    1.0 - h.iter().map(|v| 1.0 - v).product::<f64>()
}

pub fn net_mse(xs: &[Vec<f64>], ys: &[f64], layers: &[Vec<Vec<f64>>], d: f64) -> f64 {
    xs.iter().zip(ys).map(|(x, y)| (net_forward(x, layers, d) - y).powi(2)).sum::<f64>() / xs.len() as f64
}

/// Central differences of `f` with respect to every weight.
pub fn net_fd(xs: &[Vec<f64>], ys: &[f64], layers: &[Vec<Vec<f64>>], d: f64, h: f64) -> Vec<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for l in 0..layers.len() {
        let mut gl = Vec::new();
        for r in 0..layers[l].len() {
            let mut gr = Vec::new();
            for c in 0..layers[l][r].len() {
                let mut p = layers.to_vec();
                p[l][r][c] += h;
                let up = net_mse(xs, ys, &p, d);
                p[l][r][c] -= 2.0 * h;
                let down = net_mse(xs, ys, &p, d);
                gr.push((up - down) / (2.0 * h));
            }
            gl.push(gr);
        }
        out.push(gl);
    }
    out
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `Σ_e Σ_i f(e, c_i) G_i(e)` with G the softmin of the distances.
pub fn cluster_loss(es: &[Vec<f64>], cs: &[Vec<f64>], alpha: f64) -> f64 {
    es.iter()
        .map(|e| {
            let f: Vec<f64> = cs.iter().map(|c| sq_dist(e, c)).collect();
            let w: Vec<f64> = f.iter().map(|fi| (-alpha * fi).exp()).collect();
            let z: f64 = w.iter().sum();
            f.iter().zip(&w).map(|(fi, wi)| fi * wi / z).sum::<f64>()
        })
        .sum()
}

pub fn cluster_fd(es: &[Vec<f64>], cs: &[Vec<f64>], alpha: f64, h: f64) -> Vec<Vec<f64>> {
    (0..cs.len())
        .map(|i| {
            (0..cs[i].len())
                .map(|j| {
                    let mut p = cs.to_vec();
                    p[i][j] += h;
                    let up = cluster_loss(es, &p, alpha);
                    p[i][j] -= 2.0 * h;
                    let down = cluster_loss(es, &p, alpha);
                    (up - down) / (2.0 * h)
                })
                .collect()
        })
        .collect()
}

/// Lloyd's algorithm from the given start, to convergence.
pub fn kmeans(es: &[Vec<f64>], start: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut cs = start.to_vec();
    let mut assign = vec![usize::MAX; es.len()];
    loop {
        let next: Vec<usize> = es
            .iter()
            .map(|e| {
                let mut best = 0;
                for i in 1..cs.len() {
                    if sq_dist(e, &cs[i]) < sq_dist(e, &cs[best]) {
                        best = i;
                    }
                }
                best
            })
            .collect();
        if next == assign {
            return (cs, assign);
        }
        assign = next;
        for (i, c) in cs.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = es.iter().zip(&assign).filter(|(_, &a)| a == i).map(|(e, _)| e).collect();
            if !members.is_empty() {
                for (j, cj) in c.iter_mut().enumerate() {
                    *cj = members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64;
                }
            }
        }
    }
}

pub fn kmeans_cost(es: &[Vec<f64>], cs: &[Vec<f64>]) -> f64 {
    es.iter().map(|e| cs.iter().map(|c| sq_dist(e, c)).fold(f64::INFINITY, f64::min)).sum()
}

/// Whether two labelings induce the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

/// Tiny standalone Datalog: predicates and constants are plain integers,
/// variables are `Err(v)` and constants `Ok(c)`.
pub type OTerm = Result<usize, usize>;

#[derive(Clone, Debug)]
pub struct OAtom {
    pub pred: usize,
    pub args: Vec<OTerm>,
}

#[derive(Clone, Debug)]
pub struct ORule {
    pub head: OAtom,
    pub body: Vec<OAtom>,
}

pub type OFact = (usize, Vec<usize>);

fn ground(a: &OAtom, sub: &[usize]) -> OFact {
    (a.pred, a.args.iter().map(|t| match t {
        Ok(c) => *c,
        Err(v) => sub[*v],
    }).collect())
}

/// Least model by enumerating every ground instance of every rule.
pub fn brute_fixpoint(rules: &[ORule], base: &BTreeSet<OFact>, n_consts: usize) -> BTreeSet<OFact> {
    let mut interp = base.clone();
    loop {
        let mut grew = false;
        for r in rules {
            let n_vars = std::iter::once(&r.head)
                .chain(&r.body)
                .flat_map(|a| a.args.iter())
                .filter_map(|t| t.err())
                .max()
                .map_or(0, |m| m + 1);
            let total = n_consts.pow(n_vars as u32);
            for code in 0..total {
                let mut sub = vec![0; n_vars];
                let mut c = code;
                for s in sub.iter_mut() {
                    *s = c % n_consts;
                    c /= n_consts;
                }
                if r.body.iter().all(|b| interp.contains(&ground(b, &sub))) && interp.insert(ground(&r.head, &sub)) {
                    grew = true;
                }
            }
        }
        if !grew {
            return interp;
        }
    }
}

/// A random range-restricted rule over predicates `0..n_preds` with the
/// given arities.
pub fn random_rule<R: Rng>(rng: &mut R, arities: &[usize], max_vars: usize, max_body: usize) -> ORule {
    loop {
        let body_len = rng.gen_range(1..=max_body);
        let atom = |rng: &mut R| {
            let p = rng.gen_range(0..arities.len());
            OAtom {
                pred: p,
                args: (0..arities[p]).map(|_| Err(rng.gen_range(0..max_vars))).collect(),
            }
        };
        let body: Vec<OAtom> = (0..body_len).map(|_| atom(rng)).collect();
        let head = atom(rng);
        let body_vars: BTreeSet<usize> = body.iter().flat_map(|a| a.args.iter()).filter_map(|t| t.err()).collect();
        if head.args.iter().all(|t| body_vars.contains(&t.unwrap_err())) {
            return ORule { head, body };
        }
    }
}
