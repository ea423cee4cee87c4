//! Precision and recall of learned programs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::facts::FactBase;
use super::ground::{body_head_counts, tp_fixpoint, FactIndex, Interpretation};
use super::syntax::{GroundAtom, LogicProgram, Rule};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub derived_count: usize,
}

/// Scores `program` on the world described by `fb`.
///
/// The least model is computed from `fb.background ∪ fb.positives`, where the
/// positives act as seed facts for recursive target predicates. Precision
/// pools, over all rules, the substitutions whose body holds in the least
/// model and counts those whose head is a true target atom (a seed or a test
/// positive). Recall is the fraction of `test_positives` in the least model.
pub fn evaluate_rules(program: &LogicProgram, fb: &FactBase, test_positives: &BTreeSet<GroundAtom>) -> Result<Metrics> {
    if test_positives.is_empty() {
        return Err(Error::EmptyTestPositives);
    }
    let n = fb.constants.len();
    let base: Interpretation = fb.known_true();
    let model = tp_fixpoint(program, &base, n)?;
    let index = FactIndex::new(&model);
    let truth = FactIndex::new(test_positives.iter().chain(&fb.positives));

    let mut hits = 0u64;
    let mut total = 0u64;
    for rule in &program.rules {
        let (h, t) = body_head_counts(rule, &index, &truth, n);
        hits += h;
        total += t;
    }
    if total == 0 {
        return Err(Error::UnsatisfiedBodies);
    }

    let heads: BTreeSet<_> = program.rules.iter().map(|r| r.head.pred).collect();
    let derived_count = model.iter().filter(|a| heads.contains(&a.pred)).count();
    let recalled = test_positives.iter().filter(|a| index.contains(a)).count();
    Ok(Metrics {
        precision: hits as f64 / total as f64,
        recall: recalled as f64 / test_positives.len() as f64,
        derived_count,
    })
}

/// Per-rule score against known facts, without chaining: the body is matched
/// in `background ∪ positives` and heads are checked against the positives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RuleScore {
    pub hits: u64,
    pub total: u64,
}

impl RuleScore {
    pub fn precision(&self) -> Option<f64> {
        (self.total > 0).then(|| self.hits as f64 / self.total as f64)
    }

    pub fn is_exact(&self) -> bool {
        self.total > 0 && self.hits == self.total
    }
}

/// Precomputed indexes for scoring many candidate rules on one fact base.
pub struct RuleScorer {
    known: FactIndex,
    truth: FactIndex,
    n_consts: usize,
    positives: Vec<GroundAtom>,
}

impl RuleScorer {
    pub fn new(fb: &FactBase) -> Self {
        let known = fb.known_true();
        Self {
            known: FactIndex::new(&known),
            truth: FactIndex::new(&fb.positives),
            n_consts: fb.constants.len(),
            positives: fb.positives.iter().copied().collect(),
        }
    }

    pub fn score(&self, rule: &Rule) -> RuleScore {
        let (hits, total) = body_head_counts(rule, &self.known, &self.truth, self.n_consts);
        RuleScore { hits, total }
    }

    /// Fraction of positives whose head is produced by one rule application
    /// over the known facts.
    pub fn coverage(&self, program: &LogicProgram) -> f64 {
        if self.positives.is_empty() {
            return 0.0;
        }
        let mut covered = BTreeSet::new();
        for rule in &program.rules {
            super::ground::for_each_body_match(rule, &self.known, |a| {
                if let Some(g) = rule.head.ground(a) {
                    if self.truth.contains(&g) {
                        covered.insert(g);
                    }
                } else {
                    // Unbound head variables: every positive of the head
                    // predicate consistent with the bound slots is covered.
                    for p in &self.positives {
                        if p.pred == rule.head.pred && rule.head.terms.iter().zip(p.args()).all(|(t, c)| match t {
                            super::syntax::Term::Var(v) => a[*v].map_or(true, |x| x == *c),
                            super::syntax::Term::Const(k) => k == c,
                        }) {
                            covered.insert(*p);
                        }
                    }
                }
            });
        }
        covered.len() as f64 / self.positives.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::facts::parse_rules;

    fn chain(n: usize) -> String {
        let mut s = String::from("#background\nzero(0).\n");
        for i in 0..n - 1 {
            s.push_str(&format!("succ({},{}).\n", i, i + 1));
        }
        s
    }

    #[test]
    fn predecessor_gold_rule() {
        let mut text = chain(10);
        text.push_str("#pos\n");
        for i in 0..9 {
            text.push_str(&format!("pre({},{}).\n", i + 1, i));
        }
        let mut fb = FactBase::parse(&text).unwrap();
        let p = parse_rules("pre(X,Y) :- succ(Y,X)", &mut fb.preds, &mut fb.constants).unwrap();
        let test = fb.positives.clone();
        let m = evaluate_rules(&p, &fb, &test).unwrap();
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.derived_count, 9);
    }

    #[test]
    fn zero_rule_recalls_one_fifth_of_evens() {
        let mut fb = FactBase::parse(&chain(10)).unwrap();
        let p = parse_rules("even(X) :- zero(X)", &mut fb.preds, &mut fb.constants).unwrap();
        let even = fb.preds.id("even").unwrap();
        let test: BTreeSet<_> = (0..10)
            .step_by(2)
            .map(|i| GroundAtom::unary(even, fb.constants.id(&i.to_string()).unwrap()))
            .collect();
        let m = evaluate_rules(&p, &fb, &test).unwrap();
        assert_eq!(m.precision, 1.0);
        assert!((m.recall - 0.2).abs() < 1e-12);
    }

    #[test]
    fn unsatisfiable_body_is_an_error() {
        let mut fb = FactBase::parse(&chain(4)).unwrap();
        let p = parse_rules("t(X) :- succ(X,X)", &mut fb.preds, &mut fb.constants).unwrap();
        let t = fb.preds.id("t").unwrap();
        let test: BTreeSet<_> = [GroundAtom::unary(t, 0)].into();
        assert!(matches!(evaluate_rules(&p, &fb, &test), Err(Error::UnsatisfiedBodies)));
    }

    #[test]
    fn empty_test_set_is_an_error() {
        let fb = FactBase::parse(&chain(4)).unwrap();
        let err = evaluate_rules(&LogicProgram::default(), &fb, &BTreeSet::new()).unwrap_err();
        assert!(matches!(err, Error::EmptyTestPositives));
    }
}
