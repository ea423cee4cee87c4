//! Forward-chaining semantics: body matching, the immediate consequence
//! operator and its least fixpoint.
//!
//! Rule bodies are matched by backtracking joins over an argument index
//! rather than by enumerating `|C|^d` ground instances; head variables that
//! the body leaves unbound range over the whole constant table.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::syntax::{Atom, ConstId, GroundAtom, LogicProgram, PredId, Rule, Term};
use crate::error::{Error, Result};

pub type Interpretation = BTreeSet<GroundAtom>;

/// Hash index over a set of ground atoms.
#[derive(Debug, Default, Clone)]
pub struct FactIndex {
    all: HashSet<GroundAtom>,
    by_pred: HashMap<PredId, Vec<GroundAtom>>,
    by_arg: HashMap<(PredId, u8, ConstId), Vec<GroundAtom>>,
}

impl FactIndex {
    pub fn new<'a>(facts: impl IntoIterator<Item = &'a GroundAtom>) -> Self {
        let mut idx = FactIndex::default();
        for f in facts {
            idx.insert(*f);
        }
        idx
    }

    pub fn insert(&mut self, f: GroundAtom) -> bool {
        if !self.all.insert(f) {
            return false;
        }
        self.by_pred.entry(f.pred).or_default().push(f);
        for (pos, &c) in f.args().iter().enumerate() {
            self.by_arg.entry((f.pred, pos as u8, c)).or_default().push(f);
        }
        true
    }

    pub fn contains(&self, f: &GroundAtom) -> bool {
        self.all.contains(f)
    }

    pub fn len(&self) -> usize {
        self.all.len()
    }

    pub fn is_empty(&self) -> bool {
        self.all.is_empty()
    }

    fn candidates(&self, atom: &Atom, assignment: &[Option<ConstId>]) -> &[GroundAtom] {
        let mut best: Option<&[GroundAtom]> = None;
        for (pos, t) in atom.terms.iter().enumerate() {
            let c = match *t {
                Term::Const(c) => Some(c),
                Term::Var(v) => assignment[v],
            };
            if let Some(c) = c {
                let list = self
                    .by_arg
                    .get(&(atom.pred, pos as u8, c))
                    .map_or(&[][..], |v| v.as_slice());
                if best.map_or(true, |b| list.len() < b.len()) {
                    best = Some(list);
                }
            }
        }
        best.unwrap_or_else(|| self.by_pred.get(&atom.pred).map_or(&[][..], |v| v.as_slice()))
    }

    /// Number of atoms of `pattern`'s predicate matching the constants and
    /// bound variables of the pattern (free variables match anything).
    pub fn count_matching(&self, pattern: &Atom, assignment: &[Option<ConstId>]) -> usize {
        let mut scratch = assignment.to_vec();
        self.candidates(pattern, assignment)
            .iter()
            .filter(|f| unify(pattern, f, &mut scratch).map(|b| undo(&mut scratch, &b)).is_some())
            .count()
    }
}

/// Binds the free variables of `atom` to match `fact`. Returns the list of
/// newly bound variables, or `None` on a clash (leaving `assignment` intact).
fn unify(atom: &Atom, fact: &GroundAtom, assignment: &mut [Option<ConstId>]) -> Option<Vec<usize>> {
    if atom.pred != fact.pred || atom.terms.len() != fact.arity as usize {
        return None;
    }
    let mut bound = Vec::new();
    for (t, &c) in atom.terms.iter().zip(fact.args()) {
        let ok = match *t {
            Term::Const(k) => k == c,
            Term::Var(v) => match assignment[v] {
                Some(x) => x == c,
                None => {
                    assignment[v] = Some(c);
                    bound.push(v);
                    true
                }
            },
        };
        if !ok {
            undo(assignment, &bound);
            return None;
        }
    }
    Some(bound)
}

fn undo(assignment: &mut [Option<ConstId>], bound: &[usize]) {
    for &v in bound {
        assignment[v] = None;
    }
}

/// Calls `f` once per assignment of the body variables satisfying every body
/// atom in `facts`. Variables that do not occur in the body stay `None`.
pub fn for_each_body_match<F: FnMut(&[Option<ConstId>])>(rule: &Rule, facts: &FactIndex, mut f: F) {
    let mut assignment = vec![None; rule.max_var() + 1];
    let mut remaining: Vec<&Atom> = rule.body.iter().collect();
    search(&mut remaining, facts, &mut assignment, &mut f);
}

fn search<F: FnMut(&[Option<ConstId>])>(
    remaining: &mut Vec<&Atom>,
    facts: &FactIndex,
    assignment: &mut [Option<ConstId>],
    f: &mut F,
) {
    if remaining.is_empty() {
        f(assignment);
        return;
    }
    // Most-constrained atom next: fewest candidate facts.
    let (pick, _) = remaining
        .iter()
        .enumerate()
        .map(|(i, a)| (i, facts.candidates(a, assignment).len()))
        .min_by_key(|&(_, n)| n)
        .expect("nonempty");
    let atom = remaining.swap_remove(pick);
    let cands = facts.candidates(atom, assignment);
    for fact in cands {
        if let Some(bound) = unify(atom, fact, assignment) {
            search(remaining, facts, assignment, f);
            undo(assignment, &bound);
        }
    }
    remaining.push(atom);
    let last = remaining.len() - 1;
    remaining.swap(pick, last);
}

/// Enumerates every grounding of the head variables left free by the body.
fn for_each_head<F: FnMut(GroundAtom)>(head: &Atom, assignment: &[Option<ConstId>], n_consts: usize, mut f: F) {
    let free: Vec<usize> = {
        let mut v: Vec<usize> = head.vars().into_iter().filter(|&v| assignment[v].is_none()).collect();
        v.dedup();
        v
    };
    if free.is_empty() {
        if let Some(g) = head.ground(assignment) {
            f(g);
        }
        return;
    }
    let mut a = assignment.to_vec();
    let total = (n_consts as u64).pow(free.len() as u32);
    for code in 0..total {
        let mut rest = code;
        for &v in &free {
            a[v] = Some((rest % n_consts as u64) as ConstId);
            rest /= n_consts as u64;
        }
        if let Some(g) = head.ground(&a) {
            f(g);
        }
    }
}

/// One application of the immediate consequence operator.
pub fn tp_step(program: &LogicProgram, interp: &Interpretation, n_consts: usize) -> Interpretation {
    let index = FactIndex::new(interp);
    let mut out = Interpretation::new();
    for rule in &program.rules {
        for_each_body_match(rule, &index, |a| for_each_head(&rule.head, a, n_consts, |g| {
            out.insert(g);
        }));
    }
    out
}

/// Size of the Herbrand base spanned by the predicates in `program` and `base`.
pub fn herbrand_size(program: &LogicProgram, base: &Interpretation, n_consts: usize) -> usize {
    let mut arities: HashMap<PredId, usize> = HashMap::new();
    for r in &program.rules {
        for a in std::iter::once(&r.head).chain(&r.body) {
            arities.insert(a.pred, a.terms.len());
        }
    }
    for f in base {
        arities.insert(f.pred, f.arity as usize);
    }
    arities.values().map(|&k| n_consts.saturating_pow(k as u32)).sum()
}

/// Least model of `base ∪ program`, iterating `I ← base ∪ T_P(I)` from `base`.
pub fn tp_fixpoint(program: &LogicProgram, base: &Interpretation, n_consts: usize) -> Result<Interpretation> {
    let cap = herbrand_size(program, base, n_consts) + 1;
    let mut index = FactIndex::new(base);
    let mut interp = base.clone();
    // Semi-naive would avoid rederivation; programs here are small enough that
    // re-matching every round is cheap.
    for _ in 0..cap {
        let mut fresh = Vec::new();
        for rule in &program.rules {
            for_each_body_match(rule, &index, |a| {
                for_each_head(&rule.head, a, n_consts, |g| {
                    if !index.contains(&g) {
                        fresh.push(g);
                    }
                })
            });
        }
        if fresh.is_empty() {
            return Ok(interp);
        }
        for g in fresh {
            if index.insert(g) {
                interp.insert(g);
            }
        }
    }
    Err(Error::IterationCap(cap))
}

/// Counts the substitutions (over all rule variables) that satisfy the body
/// in `facts`, and how many of them also make the head an atom of `truth`.
pub fn body_head_counts(rule: &Rule, facts: &FactIndex, truth: &FactIndex, n_consts: usize) -> (u64, u64) {
    let mut total = 0u64;
    let mut hits = 0u64;
    for_each_body_match(rule, facts, |a| {
        let free = {
            let mut v: Vec<usize> = rule.head.vars().into_iter().filter(|&v| a[v].is_none()).collect();
            v.sort_unstable();
            v.dedup();
            v.len()
        };
        total += (n_consts as u64).pow(free as u32);
        hits += if free == 0 {
            rule.head.ground(a).map_or(0, |g| truth.contains(&g) as u64)
        } else {
            truth.count_matching(&rule.head, a) as u64
        };
    });
    (hits, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::facts::{parse_rules, FactBase};

    fn setup(facts: &str, rules: &str) -> (FactBase, LogicProgram) {
        let mut fb = FactBase::parse(facts).unwrap();
        let p = parse_rules(rules, &mut fb.preds, &mut fb.constants).unwrap();
        (fb, p)
    }

    #[test]
    fn one_step_chaining() {
        let (fb, p) = setup("p(a).", "q(X) :- p(X)");
        let out = tp_step(&p, &fb.background, fb.constants.len());
        let shown: Vec<String> = out.iter().map(|a| fb.show(a)).collect();
        assert_eq!(shown, ["q(a)"]);
    }

    #[test]
    fn empty_program_derives_nothing() {
        let fb = FactBase::parse("p(a). p(b).").unwrap();
        assert!(tp_step(&LogicProgram::default(), &fb.background, 2).is_empty());
    }

    #[test]
    fn fixpoint_includes_base() {
        let (fb, p) = setup("p(a).", "q(X) :- p(X)");
        let out = tp_fixpoint(&p, &fb.background, fb.constants.len()).unwrap();
        let shown: Vec<String> = out.iter().map(|a| fb.show(a)).collect();
        assert_eq!(shown, ["p(a)", "q(a)"]);
    }

    #[test]
    fn unbound_head_variable_ranges_over_constants() {
        let (fb, p) = setup("p(a). r(b). r(c).", "q(X,Y) :- p(X)");
        let out = tp_step(&p, &fb.background, fb.constants.len());
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn repeated_variable_must_agree() {
        let (fb, p) = setup("e(a,a). e(a,b).", "loop(X) :- e(X,X)");
        let out = tp_step(&p, &fb.background, fb.constants.len());
        let shown: Vec<String> = out.iter().map(|a| fb.show(a)).collect();
        assert_eq!(shown, ["loop(a)"]);
    }

    #[test]
    fn counts_for_precision() {
        let (fb, p) = setup("#background\ne(a,b). e(b,c). e(c,a).\n#pos\nt(a,b).", "t(X,Y) :- e(X,Y)");
        let facts = FactIndex::new(&fb.background);
        let truth = FactIndex::new(&fb.positives);
        assert_eq!(body_head_counts(&p.rules[0], &facts, &truth, 3), (1, 3));
    }
}
