//! Latent knowledge bases, the body-atom space and substitution sampling.
//!
//! A training row is the truth vector of every candidate body atom under one
//! substitution of the rule variables. Constants are looked up through their
//! cluster, so two constants in one cluster are indistinguishable.

use std::collections::{BTreeSet, HashSet};

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::{Atom, ConstId, FactBase, GroundAtom, PredId, PredicateKind, PredicateTable, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceMode {
    RelationsDefined,
    RelationsUndefined,
}

/// Ordered candidate body atoms; coordinate `j` of a training row is the
/// truth of `atoms[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyAtomSpace {
    pub mode: SpaceMode,
    pub d: usize,
    pub atoms: Vec<Atom>,
}

impl BodyAtomSpace {
    pub fn n(&self) -> usize {
        self.atoms.len()
    }
}

/// `|R_b| d (d-1) + |R_u| d - 1`.
pub fn defined_space_size(binary: usize, unary: usize, d: usize) -> usize {
    (binary * d * (d - 1) + unary * d).saturating_sub(1)
}

/// `d (d-1) / 2 + d - 1`.
pub fn undefined_space_size(d: usize) -> usize {
    d * (d - 1) / 2 + d - 1
}

fn var_terms(vs: &[usize]) -> Vec<Term> {
    vs.iter().map(|&v| Term::Var(v)).collect()
}

/// All atoms over variables `1..=d` for the known and target predicates, in
/// table order, minus the head pattern `target(X)` / `target(X,Y)`.
/// Argument tuples use distinct variables.
pub fn enumerate_body_atoms(preds: &PredicateTable, d: usize, target: PredId) -> Result<BodyAtomSpace> {
    let arity = preds.get(target).arity;
    if d < arity {
        return Err(Error::TooFewVariables { d, arity });
    }
    let head: Vec<usize> = (1..=arity).collect();
    let mut atoms = Vec::new();
    for (id, sym) in preds.iter() {
        if sym.kind == PredicateKind::Placeholder {
            continue;
        }
        let tuples: Vec<Vec<usize>> = if sym.arity == 1 {
            (1..=d).map(|i| vec![i]).collect()
        } else {
            (1..=d)
                .flat_map(|i| (1..=d).filter(move |&j| j != i).map(move |j| vec![i, j]))
                .collect()
        };
        for t in tuples {
            if id == target && t == head {
                continue;
            }
            atoms.push(Atom::new(id, var_terms(&t)));
        }
    }
    Ok(BodyAtomSpace {
        mode: SpaceMode::RelationsDefined,
        d,
        atoms,
    })
}

/// One fresh placeholder predicate per variable set: every pair `{i, j}` and
/// every single variable except variable 1. Sets are ordered
/// lexicographically as tuples.
pub fn enumerate_placeholder_atoms(preds: &mut PredicateTable, d: usize) -> Result<BodyAtomSpace> {
    if d < 2 {
        return Err(Error::TooFewVariables { d, arity: 2 });
    }
    let mut tuples: Vec<Vec<usize>> = Vec::new();
    for i in 1..=d {
        if i > 1 {
            tuples.push(vec![i]);
        }
        for j in i + 1..=d {
            tuples.push(vec![i, j]);
        }
    }
    let mut atoms = Vec::with_capacity(tuples.len());
    for t in tuples {
        let p = preds.fresh_placeholder(t.len())?;
        atoms.push(Atom::new(p, var_terms(&t)));
    }
    Ok(BodyAtomSpace {
        mode: SpaceMode::RelationsUndefined,
        d,
        atoms,
    })
}

/// Known facts re-expressed over cluster ids.
#[derive(Clone, Debug)]
pub struct RelationalKb {
    /// Cluster of each constant.
    pub assign: Vec<ConstId>,
    pub facts: HashSet<GroundAtom>,
}

impl RelationalKb {
    /// One tuple per atom of `background ∪ positives`, with each argument
    /// replaced by its cluster. Positives are included so recursive bodies
    /// can refer to the target.
    pub fn build(fb: &FactBase, assign: &[usize]) -> Result<Self> {
        if assign.len() < fb.constants.len() {
            let missing = fb.constants.name(assign.len() as ConstId);
            return Err(Error::MissingEmbedding(missing.to_string()));
        }
        let assign: Vec<ConstId> = assign.iter().map(|&a| a as ConstId).collect();
        let facts = fb
            .background
            .iter()
            .chain(&fb.positives)
            .map(|a| {
                let args: Vec<ConstId> = a.args().iter().map(|&c| assign[c as usize]).collect();
                GroundAtom::new(a.pred, &args)
            })
            .collect();
        Ok(RelationalKb { assign, facts })
    }

    /// Identity clustering: the KB is the fact base itself.
    pub fn symbolic(fb: &FactBase) -> Self {
        let assign: Vec<usize> = (0..fb.constants.len()).collect();
        Self::build(fb, &assign).expect("identity covers every constant")
    }

    /// Truth of each space atom under `assignment` (indexed by variable - 1).
    pub fn lookup_row(&self, assignment: &[ConstId], space: &BodyAtomSpace) -> Vec<f64> {
        let mut args = [0 as ConstId; 2];
        space
            .atoms
            .iter()
            .map(|atom| {
                for (slot, t) in args.iter_mut().zip(&atom.terms) {
                    *slot = match *t {
                        Term::Var(v) => self.assign[assignment[v - 1] as usize],
                        Term::Const(c) => self.assign[c as usize],
                    };
                }
                let g = GroundAtom::new(atom.pred, &args[..atom.terms.len()]);
                if self.facts.contains(&g) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Clusters present in each instance.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceKb {
    pub k: usize,
    pub present: Vec<BTreeSet<usize>>,
}

impl InstanceKb {
    /// `assign[i][o]` is the cluster of object `o` of instance `i`.
    pub fn build(assign: &[Vec<usize>], k: usize) -> Self {
        InstanceKb {
            k,
            present: assign.iter().map(|objs| objs.iter().copied().collect()).collect(),
        }
    }

    /// Variable `v` stands for cluster `v - 1`; an atom holds when every
    /// cluster it mentions occurs in the instance.
    pub fn lookup_row(&self, instance: usize, space: &BodyAtomSpace) -> Vec<f64> {
        let set = &self.present[instance];
        space
            .atoms
            .iter()
            .map(|a| {
                let all = a.vars().iter().all(|&v| set.contains(&(v - 1)));
                if all {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Probability that an auxiliary variable is drawn from the neighbours
    /// of an already bound constant instead of uniformly.
    pub walk_prob: f64,
    pub max_reject: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            walk_prob: 0.5,
            max_reject: 20,
        }
    }
}

/// Undirected co-occurrence graph over constants.
#[derive(Clone, Debug)]
pub struct Neighbours {
    adj: Vec<Vec<ConstId>>,
}

impl Neighbours {
    pub fn new(fb: &FactBase) -> Self {
        let n = fb.constants.len();
        let mut sets: Vec<BTreeSet<ConstId>> = vec![BTreeSet::new(); n];
        for a in fb.background.iter().chain(&fb.positives) {
            if a.arity == 2 {
                let (x, y) = (a.args[0], a.args[1]);
                sets[x as usize].insert(y);
                sets[y as usize].insert(x);
            }
        }
        Neighbours {
            adj: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }

    pub fn of(&self, c: ConstId) -> &[ConstId] {
        &self.adj[c as usize]
    }

    /// Constants adjacent to both `x` and `y`.
    pub fn connected(&self, x: ConstId, y: ConstId) -> Vec<ConstId> {
        let b = self.of(y);
        self.of(x).iter().copied().filter(|c| b.binary_search(c).is_ok()).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SubstitutionBatch {
    /// Each assignment lists the constants of variables `1..=d`.
    pub pos: Vec<Vec<ConstId>>,
    pub neg: Vec<Vec<ConstId>>,
    /// Negatives kept although every resample hit a positive.
    pub rejected_kept: usize,
    /// Connected-set draws that fell back to a uniform draw.
    pub connected_fallbacks: usize,
}

/// Draws `batch` positive and `batch` negative substitutions.
///
/// Positives bind the head variables to a random positive example;
/// negatives replace the constant of `X` by a different random constant,
/// resampling while the corrupted head is still a positive. Auxiliary
/// variables follow a forward-chaining bias: for a binary target with three
/// variables, `V3` comes from constants adjacent to both head constants;
/// otherwise each auxiliary is drawn from the neighbours of a bound constant
/// with probability `walk_prob` and uniformly otherwise.
pub fn sample_substitutions<R: Rng>(
    fb: &FactBase,
    neighbours: &Neighbours,
    d: usize,
    target: PredId,
    batch: usize,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<SubstitutionBatch> {
    let arity = fb.preds.get(target).arity;
    if d < arity {
        return Err(Error::TooFewVariables { d, arity });
    }
    let positives: Vec<&GroundAtom> = fb.positives.iter().filter(|a| a.pred == target).collect();
    if positives.is_empty() {
        return Err(Error::NoPositives);
    }
    let n = fb.constants.len() as ConstId;
    if n < 2 {
        return Err(Error::Config("substitution sampling needs at least two constants".into()));
    }
    let mut out = SubstitutionBatch::default();
    for _ in 0..batch {
        let p = positives[rng.gen_range(0..positives.len())];
        let mut head: Vec<ConstId> = p.args().to_vec();
        let pos = fill_aux(&head, d, neighbours, n, cfg, rng, &mut out.connected_fallbacks);
        out.pos.push(pos);

        let x = head[0];
        let mut tries = 0;
        loop {
            let mut c = rng.gen_range(0..n - 1);
            if c >= x {
                c += 1;
            }
            head[0] = c;
            if !fb.positives.contains(&GroundAtom::new(target, &head)) {
                break;
            }
            tries += 1;
            if tries >= cfg.max_reject {
                out.rejected_kept += 1;
                break;
            }
        }
        let neg = fill_aux(&head, d, neighbours, n, cfg, rng, &mut out.connected_fallbacks);
        out.neg.push(neg);
    }
    if out.rejected_kept > 0 {
        log::warn!("{} negative substitutions kept after {} rejections", out.rejected_kept, cfg.max_reject);
    }
    Ok(out)
}

fn fill_aux<R: Rng>(
    head: &[ConstId],
    d: usize,
    nb: &Neighbours,
    n: ConstId,
    cfg: &SamplerConfig,
    rng: &mut R,
    fallbacks: &mut usize,
) -> Vec<ConstId> {
    let mut a = head.to_vec();
    if head.len() == 2 && d == 3 {
        let conn = nb.connected(head[0], head[1]);
        match conn.choose(rng) {
            Some(&c) => a.push(c),
            None => {
                *fallbacks += 1;
                a.push(rng.gen_range(0..n));
            }
        }
        return a;
    }
    while a.len() < d {
        let anchor = a[rng.gen_range(0..a.len())];
        let near = nb.of(anchor);
        let c = if !near.is_empty() && rng.gen_bool(cfg.walk_prob) {
            *near.choose(rng).expect("nonempty")
        } else {
            rng.gen_range(0..n)
        };
        a.push(c);
    }
    a
}

/// Stacks positive rows (label 1) and negative rows (label 0).
pub fn make_training_batch(sub: &SubstitutionBatch, space: &BodyAtomSpace, kb: &RelationalKb) -> (Array2<f64>, Array1<f64>) {
    let rows = sub.pos.len() + sub.neg.len();
    let mut x = Array2::zeros((rows, space.n()));
    let mut y = Array1::zeros(rows);
    for (i, a) in sub.pos.iter().chain(&sub.neg).enumerate() {
        let r = kb.lookup_row(a, space);
        x.row_mut(i).assign(&Array1::from(r));
        if i < sub.pos.len() {
            y[i] = 1.0;
        }
    }
    (x, y)
}

/// One row per instance, labelled by the instance class.
pub fn make_instance_batch(kb: &InstanceKb, labels: &[bool], space: &BodyAtomSpace) -> (Array2<f64>, Array1<f64>) {
    let mut x = Array2::zeros((labels.len(), space.n()));
    for i in 0..labels.len() {
        x.row_mut(i).assign(&Array1::from(kb.lookup_row(i, space)));
    }
    let y = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn predecessor() -> FactBase {
        let mut text = String::from("#background\nzero(0).\n");
        for i in 0..9 {
            text.push_str(&format!("succ({},{}).\n", i, i + 1));
        }
        text.push_str("#pos\n");
        for i in 0..9 {
            text.push_str(&format!("pre({},{}).\n", i + 1, i));
        }
        FactBase::parse(&text).unwrap()
    }

    #[test]
    fn formula_examples() {
        assert_eq!(defined_space_size(2, 1, 3), 14);
        assert_eq!(undefined_space_size(4), 9);
    }

    #[test]
    fn predecessor_space_excludes_only_the_head() {
        let fb = predecessor();
        let pre = fb.preds.id("pre").unwrap();
        let space = enumerate_body_atoms(&fb.preds, 2, pre).unwrap();
        let shown: Vec<String> = space.atoms.iter().map(|a| a.display(&fb.preds, &fb.constants).to_string()).collect();
        assert_eq!(shown, ["zero(X)", "zero(Y)", "succ(X,Y)", "succ(Y,X)", "pre(Y,X)"]);
        assert_eq!(space.n(), defined_space_size(2, 1, 2));
    }

    #[test]
    fn too_few_variables() {
        let fb = predecessor();
        let pre = fb.preds.id("pre").unwrap();
        assert!(matches!(enumerate_body_atoms(&fb.preds, 1, pre), Err(Error::TooFewVariables { d: 1, arity: 2 })));
    }

    #[test]
    fn lookup_matches_background() {
        let fb = predecessor();
        let kb = RelationalKb::symbolic(&fb);
        let pre = fb.preds.id("pre").unwrap();
        let space = enumerate_body_atoms(&fb.preds, 2, pre).unwrap();
        let c = |s: &str| fb.constants.id(s).unwrap();
        // X=1, Y=0: succ(Y,X) holds, succ(X,Y) does not.
        let row = kb.lookup_row(&[c("1"), c("0")], &space);
        assert_eq!(row, [0.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn clustered_constants_collide() {
        let fb = FactBase::parse("r(a,b). s(c).").unwrap();
        // a and c share a cluster.
        let kb = RelationalKb::build(&fb, &[0, 1, 0]).unwrap();
        let s = fb.preds.id("s").unwrap();
        assert!(kb.facts.contains(&GroundAtom::unary(s, 0)));
        assert_eq!(kb.facts.len(), 2);
    }

    #[test]
    fn instance_lookup_is_set_inclusion() {
        let mut preds = PredicateTable::new();
        let space = enumerate_placeholder_atoms(&mut preds, 3).unwrap();
        assert_eq!(space.n(), undefined_space_size(3));
        let kb = InstanceKb::build(&[vec![0, 2]], 3);
        let row = kb.lookup_row(0, &space);
        // Atoms: p(V1,V2), p(V1,V3), p(V2), p(V2,V3), p(V3).
        assert_eq!(row, [0.0, 1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn substitutions_respect_labels() {
        let fb = predecessor();
        let pre = fb.preds.id("pre").unwrap();
        let nb = Neighbours::new(&fb);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = sample_substitutions(&fb, &nb, 2, pre, 64, &SamplerConfig::default(), &mut rng).unwrap();
        for a in &b.pos {
            assert!(fb.positives.contains(&GroundAtom::binary(pre, a[0], a[1])));
        }
        for a in &b.neg {
            assert!(!fb.positives.contains(&GroundAtom::binary(pre, a[0], a[1])));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let again = sample_substitutions(&fb, &nb, 2, pre, 64, &SamplerConfig::default(), &mut rng).unwrap();
        assert_eq!(b, again);
    }

    #[test]
    fn no_positives_is_an_error() {
        let fb = FactBase::parse("#background\nr(a,b).\n#neg\nt(a).").unwrap();
        let t = fb.preds.id("t").unwrap();
        let nb = Neighbours::new(&fb);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = sample_substitutions(&fb, &nb, 2, t, 4, &SamplerConfig::default(), &mut rng);
        assert!(matches!(r, Err(Error::NoPositives)));
    }
}
