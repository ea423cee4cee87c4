//! Property checks shared by the per-module suites and the acceptance
//! report. Each panics on the first violation.

use std::collections::BTreeSet;

use latent_ilp::cluster::{cluster_grad, cluster_grad_with, cluster_loss, g_weights, CentroidSet, EmbeddingSource, EmbeddingTable};
use latent_ilp::kb::{defined_space_size, enumerate_body_atoms, enumerate_placeholder_atoms, undefined_space_size};
use latent_ilp::logic::PredicateKind;
use latent_ilp::logic::{tp_fixpoint, Atom, FactBase, GroundAtom, Interpretation, LogicProgram, PredicateTable, Rule, Term};
use latent_ilp::network::{backward, extract_bodies, forward, logic_program_tensor, row_softmax, NetworkConfig, NetworkParams};
use latent_ilp::par::ExecMode;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{OAtom, OFact, ORule};

pub const NEG: f64 = -1.0e4;

pub fn to_nested(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Smallest distance between a pre-activation and the bias over the batch.
pub fn kink_margin(xs: &[Vec<f64>], layers: &[Vec<Vec<f64>>], d: f64) -> f64 {
    let mut margin = f64::INFINITY;
    for x in xs {
        let mut h = x.clone();
        for raw in layers {
            let m = super::softmax_rows(raw);
            let pre: Vec<f64> = m.iter().map(|row| row.iter().zip(&h).map(|(w, v)| w * v).sum()).collect();
            for a in &pre {
                margin = margin.min((a - d).abs());
            }
            h = pre.iter().map(|&a| if a > d { (a - d) / (1.0 - d) } else { 0.0 }).collect();
        }
    }
    margin
}

pub struct GradCase {
    pub params: NetworkParams,
    pub cfg: NetworkConfig,
    pub x: Array2<f64>,
    pub y: Array1<f64>,
}

pub fn random_case(rng: &mut ChaCha8Rng) -> GradCase {
    loop {
        let n = rng.gen_range(1..=10);
        let m = rng.gen_range(1..=3);
        let widths: Vec<usize> = (0..m).map(|_| rng.gen_range(1..=4)).collect();
        let d = rng.gen_range(0.05..0.5);
        let batch = rng.gen_range(1..=5);
        let mut cols = n;
        let mut raw = Vec::new();
        for &w in &widths {
            raw.push(Array2::from_shape_fn((w, cols), |_| rng.gen_range(-2.0..2.0)));
            cols = w;
        }
        let x = Array2::from_shape_fn((batch, n), |_| rng.gen_range(0.0..1.0));
        let y = Array1::from_shape_fn(batch, |_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
        let xs: Vec<Vec<f64>> = to_nested(&x);
        let layers: Vec<Vec<Vec<f64>>> = raw.iter().map(to_nested).collect();
        if kink_margin(&xs, &layers, d) < 1e-3 {
            continue;
        }
        let cfg = NetworkConfig {
            widths,
            d_bias: d,
            exec: ExecMode::Sequential,
            ..NetworkConfig::default()
        };
        return GradCase { params: NetworkParams { raw }, cfg, x, y };
    }
}

/// Largest relative disagreement between analytic and numeric gradients.
pub fn grad_error(case: &GradCase) -> f64 {
    let (g, _) = backward(case.x.view(), case.y.view(), &case.params, &case.cfg);
    let xs = to_nested(&case.x);
    let ys = case.y.to_vec();
    let layers: Vec<Vec<Vec<f64>>> = case.params.raw.iter().map(to_nested).collect();
    let fd = super::net_fd(&xs, &ys, &layers, case.cfg.d_bias, 1e-5);
    let mut worst: f64 = 0.0;
    for (gl, fl) in g.iter().zip(&fd) {
        for (gr, fr) in gl.rows().into_iter().zip(fl) {
            for (a, b) in gr.iter().zip(fr) {
                let scale = a.abs().max(b.abs()).max(1e-4);
                worst = worst.max((a - b).abs() / scale);
            }
        }
    }
    worst
}

/// Hand-built parameters: either one layer of `k`-uniform rows, or a layer
/// of one-hot rows feeding `k`-uniform rows.
pub fn pattern_params(rng: &mut ChaCha8Rng, n: usize) -> (NetworkParams, f64) {
    let k = rng.gen_range(1..=3.min(n));
    let rules = rng.gen_range(1..=4);
    let uniform_row = |rng: &mut ChaCha8Rng, cols: usize| {
        let mut row = vec![NEG; cols];
        let mut picked = 0;
        while picked < k.min(cols) {
            let j = rng.gen_range(0..cols);
            if row[j] != 0.0 {
                row[j] = 0.0;
                picked += 1;
            }
        }
        row
    };
    let d = if k == 1 { 0.5 } else { (k as f64 - 1.0) / k as f64 };
    if rng.gen_bool(0.5) {
        let rows: Vec<f64> = (0..rules).flat_map(|_| uniform_row(rng, n)).collect();
        (NetworkParams { raw: vec![Array2::from_shape_vec((rules, n), rows).unwrap()] }, d)
    } else {
        let hidden = rng.gen_range(k..=k + 3);
        let l1: Vec<f64> = (0..hidden)
            .flat_map(|_| {
                let mut row = vec![NEG; n];
                row[rng.gen_range(0..n)] = 0.0;
                row
            })
            .collect();
        let l2: Vec<f64> = (0..rules).flat_map(|_| uniform_row(rng, hidden)).collect();
        (
            NetworkParams {
                raw: vec![
                    Array2::from_shape_vec((hidden, n), l1).unwrap(),
                    Array2::from_shape_vec((rules, hidden), l2).unwrap(),
                ],
            },
            d,
        )
    }
}

pub fn network_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..100 {
        let case = random_case(&mut rng);
        let e = grad_error(&case);
        assert!(e < 1e-3, "case {i}: relative error {e}");
    }
}

pub fn softmax_rows_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let r = rng.gen_range(1..6);
        let c = rng.gen_range(1..12);
        let scale = rng.gen_range(0.1..50.0);
        let m = Array2::from_shape_fn((r, c), |_| rng.gen_range(-scale..scale));
        for row in row_softmax(m.view()).rows() {
            assert!((row.sum() - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
        let p = NetworkParams { raw: vec![m.clone(), Array2::from_shape_fn((2, r), |_| rng.gen_range(-3.0..3.0))] };
        for row in logic_program_tensor(&p).rows() {
            assert!((row.sum() - 1.0).abs() < 1e-5);
        }
    }
}

pub fn uniform_unit_is_conjunction() {
    for k in 1..=4usize {
        let cfg = NetworkConfig {
            widths: vec![1],
            d_bias: if k == 1 { 1e-9 } else { (k as f64 - 1.0) / k as f64 },
            ..Default::default()
        };
        let params = NetworkParams { raw: vec![Array2::zeros((1, k))] };
        for bits in 0u32..(1 << k) {
            let x = Array1::from_shape_fn(k, |j| ((bits >> j) & 1) as f64);
            let expected = if bits == (1 << k) - 1 { 1.0 } else { 0.0 };
            let out = forward(x.view(), &params, &cfg);
            assert!((out - expected).abs() < 1e-9, "k={k} bits={bits:b}: {out}");
        }
    }
}

pub fn extraction_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..200 {
        let n = rng.gen_range(1..=8);
        let (params, d) = pattern_params(&mut rng, n);
        let cfg = NetworkConfig { widths: params.raw.iter().map(|m| m.nrows()).collect(), d_bias: d, ..Default::default() };
        let bodies = extract_bodies(&params, 0.3);
        for bits in 0u32..(1 << n) {
            let x = Array1::from_shape_fn(n, |j| ((bits >> j) & 1) as f64);
            let symbolic = bodies.iter().any(|b| b.iter().all(|&j| x[j] == 1.0));
            let out = forward(x.view(), &params, &cfg);
            assert!((out - symbolic as u8 as f64).abs() < 1e-9, "bodies {bodies:?} x {bits:b}: {out}");
        }
    }
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize, spread: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-spread..spread)).collect()).collect()
}

pub fn cluster_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..100 {
        let dim = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=12);
        let k = rng.gen_range(1..=4);
        let alpha = [0.1, 1.0, 3.0][case % 3];
        let es = random_points(&mut rng, n, dim, 1.0);
        let cs = random_points(&mut rng, k, dim, 1.0);
        let table = EmbeddingTable::from_rows(&es, EmbeddingSource::ToyEncoder).unwrap();
        let cset = CentroidSet::new(Array2::from_shape_vec((k, dim), cs.concat()).unwrap(), alpha).unwrap();

        let loss = cluster_loss(&table, &cset);
        let expected = super::cluster_loss(&es, &cs, alpha);
        assert!((loss - expected).abs() <= 1e-10 * expected.abs().max(1.0));

        let g = cluster_grad(&table, &cset);
        let fd = super::cluster_fd(&es, &cs, alpha, 1e-6);
        for (gr, fr) in g.rows().into_iter().zip(&fd) {
            for (a, b) in gr.iter().zip(fr) {
                let scale = a.abs().max(b.abs()).max(1e-3);
                assert!((a - b).abs() / scale < 1e-4, "case {case}: {a} vs {b}");
            }
        }
        assert_eq!(g, cluster_grad_with(&table, &cset, ExecMode::Parallel));
    }
}

pub fn assignment_rows_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100 {
        let dim = rng.gen_range(1..=5);
        let k = rng.gen_range(1..=6);
        let cs = random_points(&mut rng, k, dim, 2.0);
        let e = random_points(&mut rng, 1, dim, 2.0).remove(0);
        let alpha = rng.gen_range(0.01..20.0);
        let c = CentroidSet::new(Array2::from_shape_vec((k, dim), cs.concat()).unwrap(), alpha).unwrap();
        let w = g_weights(ndarray::ArrayView1::from(&e[..]), &c).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));

        let mut perm: Vec<usize> = (0..k).collect();
        for i in (1..k).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let permuted: Vec<f64> = perm.iter().flat_map(|&p| cs[p].clone()).collect();
        let cp = CentroidSet::new(Array2::from_shape_vec((k, dim), permuted).unwrap(), alpha).unwrap();
        let wp = g_weights(ndarray::ArrayView1::from(&e[..]), &cp).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            assert!((wp[i] - w[p]).abs() < 1e-12);
        }
    }
}

pub fn to_atom(a: &OAtom) -> Atom {
    let terms = a
        .args
        .iter()
        .map(|t| match t {
            Ok(c) => Term::Const(*c as u32),
            Err(v) => Term::Var(v + 1),
        })
        .collect();
    Atom::new(a.pred as u32, terms)
}

pub fn to_rule(r: &ORule) -> Rule {
    Rule::new(to_atom(&r.head), r.body.iter().map(to_atom).collect())
}

pub fn to_ground(f: &OFact) -> GroundAtom {
    let args: Vec<u32> = f.1.iter().map(|&c| c as u32).collect();
    GroundAtom::new(f.0 as u32, &args)
}

pub fn fixpoint_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..100 {
        let n_consts = rng.gen_range(1..=6);
        let arities: Vec<usize> = (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(1..=2)).collect();
        let mut base: BTreeSet<OFact> = BTreeSet::new();
        for _ in 0..rng.gen_range(0..=10) {
            let p = rng.gen_range(0..arities.len());
            base.insert((p, (0..arities[p]).map(|_| rng.gen_range(0..n_consts)).collect()));
        }
        let rules: Vec<ORule> =
            (0..rng.gen_range(1..=3)).map(|_| super::random_rule(&mut rng, &arities, 3, 3)).collect();

        let expected: BTreeSet<GroundAtom> =
            super::brute_fixpoint(&rules, &base, n_consts).iter().map(to_ground).collect();
        let program = LogicProgram::new(rules.iter().map(to_rule).collect());
        let start: Interpretation = base.iter().map(to_ground).collect();
        let got = tp_fixpoint(&program, &start, n_consts).unwrap();
        assert_eq!(got, expected, "case {case}: {rules:?}");
    }
}

pub struct World {
    pub fb: FactBase,
    pub target: u32,
}

pub fn random_world(rng: &mut ChaCha8Rng) -> World {
    let mut fb = FactBase::new();
    let n = rng.gen_range(3..=8);
    let names: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
    for c in &names {
        fb.constants.intern(c);
    }
    let nb = rng.gen_range(1..=3);
    let nu = rng.gen_range(0..=2);
    for _ in 0..rng.gen_range(3..=15) {
        if nu > 0 && rng.gen_bool(0.3) {
            let p = format!("u{}", rng.gen_range(0..nu));
            fb.add_background(&p, &[&names[rng.gen_range(0..n)]]).unwrap();
        } else {
            let p = format!("b{}", rng.gen_range(0..nb));
            fb.add_background(&p, &[&names[rng.gen_range(0..n)], &names[rng.gen_range(0..n)]]).unwrap();
        }
    }
    let arity = rng.gen_range(1..=2);
    for _ in 0..rng.gen_range(1..=4) {
        let args: Vec<&str> = (0..arity).map(|_| names[rng.gen_range(0..n)].as_str()).collect();
        fb.add_positive("t", &args).unwrap();
    }
    let target = fb.preds.id("t").unwrap();
    World { fb, target }
}

/// Every distinct-variable tuple over every predicate, minus the head.
pub fn oracle_space(preds: &PredicateTable, d: usize, target: u32) -> BTreeSet<(u32, Vec<usize>)> {
    let mut out = BTreeSet::new();
    for (id, sym) in preds.iter() {
        for i in 1..=d {
            if sym.arity == 1 {
                out.insert((id, vec![i]));
                continue;
            }
            for j in 1..=d {
                if i != j {
                    out.insert((id, vec![i, j]));
                }
            }
        }
    }
    let head: Vec<usize> = (1..=preds.get(target).arity).collect();
    out.remove(&(target, head));
    out
}

pub fn as_tuple(a: &latent_ilp::logic::Atom) -> (u32, Vec<usize>) {
    let vs = a
        .terms
        .iter()
        .map(|t| match t {
            Term::Var(v) => *v,
            Term::Const(_) => panic!("constant in body space"),
        })
        .collect();
    (a.pred, vs)
}

pub fn space_size_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..100 {
        let w = random_world(&mut rng);
        let d = rng.gen_range(2..=4);
        let space = enumerate_body_atoms(&w.fb.preds, d, w.target).unwrap();
        let binary = w.fb.preds.iter().filter(|(_, s)| s.arity == 2).count();
        let unary = w.fb.preds.len() - binary;
        assert_eq!(space.n(), defined_space_size(binary, unary, d));
        let got: Vec<_> = space.atoms.iter().map(as_tuple).collect();
        let set: BTreeSet<_> = got.iter().cloned().collect();
        assert_eq!(set.len(), got.len(), "duplicate atoms");
        assert_eq!(set, oracle_space(&w.fb.preds, d, w.target));
    }
}

pub fn undefined_space_formula() {
    for d in 2..=10 {
        let mut preds = PredicateTable::new();
        let space = enumerate_placeholder_atoms(&mut preds, d).unwrap();
        assert_eq!(space.n(), undefined_space_size(d));
        let pairs = space.atoms.iter().filter(|a| a.terms.len() == 2).count();
        assert_eq!(pairs, d * (d - 1) / 2);
        assert!(!space.atoms.iter().any(|a| a.terms == [Term::Var(1)]));
        assert!(preds.iter().all(|(_, s)| s.kind == PredicateKind::Placeholder));
    }
    assert_eq!(undefined_space_size(10), 54);
    assert!(enumerate_placeholder_atoms(&mut PredicateTable::new(), 1).is_err());
}
