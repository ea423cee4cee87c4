//! Naming the placeholder predicates of a constrained program and
//! generalising it into a program over named object predicates.

mod semantics;
mod translator;

pub use semantics::{Concept, Feature};
pub use translator::{
    parse_answer, HttpTranslator, HttpTranslatorConfig, MockTranslator, Translation, TranslationRequest, Translator,
};

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::ObjectRecord;
use crate::error::{Error, Result};
use crate::logic::{Atom, LogicProgram, Metrics, PredId, PredicateKind, PredicateTable, Rule, Term};

pub const EVIDENCE_CAP: usize = 20;

/// Indices of the constants whose hard assignment is the cluster bound to
/// constrained variable `v` (cluster `v - 1`).
pub fn retrieve_constants(v: usize, assign: &[usize]) -> Result<Vec<usize>> {
    if v == 0 {
        return Err(Error::EmptyCluster(v));
    }
    let out: Vec<usize> = assign.iter().enumerate().filter(|(_, &a)| a == v - 1).map(|(i, _)| i).collect();
    if out.is_empty() {
        return Err(Error::EmptyCluster(v));
    }
    Ok(out)
}

pub fn describe_object(o: &ObjectRecord) -> String {
    format!("{} {}", o.color.name(), o.shape.name())
}

pub fn build_prompt(arity: usize, evidence: &[Vec<ObjectRecord>]) -> String {
    let mut s = String::new();
    if arity == 1 {
        s.push_str("What is the common property of the set of images?\n");
    } else {
        s.push_str("What is the relation between the two ordered sets of images?\n");
    }
    for (i, objs) in evidence.iter().enumerate() {
        let items: Vec<String> = objs.iter().map(describe_object).collect();
        s.push_str(&format!("Set {}: {}\n", i + 1, items.join("; ")));
    }
    s.push_str("Answer with a short description, then give a snake_case predicate name alone on the last line.\n");
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaceholderSemantics {
    pub placeholder: String,
    pub arity: usize,
    /// Constant indices per argument position.
    pub evidence: Vec<Vec<usize>>,
    pub prompt: String,
    pub name: Option<String>,
    pub description: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SemanticsBundle {
    pub entries: Vec<PlaceholderSemantics>,
}

impl SemanticsBundle {
    pub fn get(&self, placeholder: &str) -> Option<&PlaceholderSemantics> {
        self.entries.iter().find(|e| e.placeholder == placeholder)
    }

    pub fn is_translated(&self) -> bool {
        self.entries.iter().all(|e| e.name.is_some())
    }
}

/// Evidence and prompts for every placeholder of `program`, with up to
/// `EVIDENCE_CAP` constants sampled per argument position.
pub fn collect_evidence(
    program: &LogicProgram,
    preds: &PredicateTable,
    assign: &[usize],
    objects: &[ObjectRecord],
    seed: u64,
) -> Result<SemanticsBundle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries: Vec<PlaceholderSemantics> = Vec::new();
    for atom in program.rules.iter().flat_map(|r| &r.body) {
        let sym = preds.get(atom.pred);
        if sym.kind != PredicateKind::Placeholder || entries.iter().any(|e| e.placeholder == sym.name) {
            continue;
        }
        let mut evidence = Vec::new();
        for v in atom.vars() {
            let members = retrieve_constants(v, assign)?;
            let mut pick: Vec<usize> = members.choose_multiple(&mut rng, EVIDENCE_CAP).copied().collect();
            pick.sort_unstable();
            evidence.push(pick);
        }
        let objs: Vec<Vec<ObjectRecord>> = evidence.iter().map(|ids| ids.iter().map(|&i| objects[i]).collect()).collect();
        entries.push(PlaceholderSemantics {
            placeholder: sym.name.clone(),
            arity: sym.arity,
            prompt: build_prompt(sym.arity, &objs),
            evidence,
            name: None,
            description: None,
        });
    }
    Ok(SemanticsBundle { entries })
}

/// Asks `translator` about every entry. Failures leave the entry
/// untranslated and are logged.
pub fn translate(bundle: &mut SemanticsBundle, translator: &dyn Translator, objects: &[ObjectRecord]) {
    for e in &mut bundle.entries {
        let objs: Vec<Vec<ObjectRecord>> = e.evidence.iter().map(|ids| ids.iter().map(|&i| objects[i]).collect()).collect();
        let req = TranslationRequest {
            prompt: &e.prompt,
            arity: e.arity,
            evidence: &objs,
        };
        match translator.translate(&req) {
            Ok(t) => {
                e.name = Some(t.name);
                e.description = Some(t.description);
            }
            Err(err) => log::warn!("{} left untranslated: {err}", e.placeholder),
        }
    }
}

/// Unary rules with one atom and a parsable name, as feature sets.
fn unary_features(rule: &Rule, preds: &PredicateTable) -> Option<BTreeSet<Feature>> {
    match rule.body.as_slice() {
        [a] if a.terms.len() == 1 => Concept::parse(&preds.get(a.pred).name).map(|c| c.parts),
        _ => None,
    }
}

/// Repeatedly replaces the largest group of single-atom unary rules that
/// share a feature by one rule over the features the group has in common.
fn merge_unary(rules: &mut Vec<Rule>, preds: &mut PredicateTable) -> Result<()> {
    loop {
        let feats: Vec<Option<BTreeSet<Feature>>> = rules.iter().map(|r| unary_features(r, preds)).collect();
        let mut counts: BTreeMap<Feature, usize> = BTreeMap::new();
        for f in feats.iter().flatten() {
            for &x in f {
                *counts.entry(x).or_default() += 1;
            }
        }
        let Some((&pick, _)) = counts.iter().filter(|(_, &n)| n >= 2).max_by_key(|(f, &n)| (n, std::cmp::Reverse(**f))) else {
            return Ok(());
        };
        let group: Vec<usize> = (0..rules.len()).filter(|&i| feats[i].as_ref().is_some_and(|f| f.contains(&pick))).collect();
        let common = group
            .iter()
            .map(|&i| feats[i].clone().expect("in group"))
            .reduce(|a, b| a.intersection(&b).copied().collect())
            .expect("group is nonempty");
        let name = Concept { arity: 1, parts: common }.name();
        let p = preds.declare(&name, 1, PredicateKind::Known)?;
        let merged = Rule::new(rules[group[0]].head.clone(), vec![Atom::new(p, vec![Term::Var(1)])]);
        let first = group[0];
        for &i in group.iter().rev() {
            rules.remove(i);
        }
        rules.insert(first, merged);
    }
}

/// Placeholders are renamed to their translations (same name, same
/// predicate), constrained variables are relaxed to ordinary object
/// variables in order of appearance, unary rules are merged on shared
/// features, and duplicates are dropped.
pub fn generalize_program(
    program: &LogicProgram,
    preds: &PredicateTable,
    bundle: &SemanticsBundle,
) -> Result<(PredicateTable, LogicProgram)> {
    let mut out = PredicateTable::new();
    let mut map: BTreeMap<PredId, PredId> = BTreeMap::new();
    let mut rules = Vec::new();
    for r in &program.rules {
        let head_pred = *match map.get(&r.head.pred) {
            Some(p) => p,
            None => {
                let s = preds.get(r.head.pred);
                let id = out.declare(&s.name, s.arity, s.kind)?;
                map.entry(r.head.pred).or_insert(id)
            }
        };
        let mut rename: Vec<usize> = Vec::new();
        let mut body = Vec::new();
        for a in &r.body {
            let s = preds.get(a.pred);
            let translated = bundle.get(&s.name).and_then(|e| e.name.clone());
            let id = match translated {
                Some(n) => out.declare(&n, s.arity, PredicateKind::Known)?,
                None => out.declare(&s.name, s.arity, s.kind)?,
            };
            let terms = a
                .vars()
                .into_iter()
                .map(|v| {
                    let i = rename.iter().position(|&x| x == v).unwrap_or_else(|| {
                        rename.push(v);
                        rename.len() - 1
                    });
                    Term::Var(i + 1)
                })
                .collect();
            body.push(Atom::new(id, terms));
        }
        let head = Atom::new(head_pred, r.head.terms.clone());
        rules.push(Rule::new(head, body));
    }
    merge_unary(&mut rules, &mut out)?;
    let mut p = LogicProgram::new(rules);
    p.dedup();
    Ok((out, p))
}

/// Whether some injective assignment of the body variables to the objects
/// satisfies every body atom. Variable 0 (the instance) is ignored.
pub fn rule_holds(rule: &Rule, concepts: &BTreeMap<PredId, Concept>, objects: &[ObjectRecord]) -> Result<bool> {
    let mut vars: Vec<usize> = rule.body.iter().flat_map(|a| a.vars()).filter(|&v| v > 0).collect();
    vars.sort_unstable();
    vars.dedup();
    if rule.body.is_empty() || vars.len() > objects.len() {
        return Ok(false);
    }
    let atoms: Vec<(&Concept, Vec<usize>)> = rule
        .body
        .iter()
        .map(|a| {
            let c = concepts.get(&a.pred).ok_or_else(|| Error::UnknownSemantics(format!("#{}", a.pred)))?;
            let idx = a.vars().iter().map(|v| vars.iter().position(|x| x == v).expect("collected")).collect();
            Ok((c, idx))
        })
        .collect::<Result<_>>()?;
    fn search(k: usize, slot: &mut Vec<usize>, used: &mut [bool], objects: &[ObjectRecord], atoms: &[(&Concept, Vec<usize>)]) -> bool {
        if k == slot.len() {
            return atoms.iter().all(|(c, idx)| {
                let args: Vec<&ObjectRecord> = idx.iter().map(|&i| &objects[slot[i]]).collect();
                c.holds(&args)
            });
        }
        for o in 0..objects.len() {
            if !used[o] {
                used[o] = true;
                slot[k] = o;
                if search(k + 1, slot, used, objects, atoms) {
                    used[o] = false;
                    return true;
                }
                used[o] = false;
            }
        }
        false
    }
    let mut slot = vec![0; vars.len()];
    let mut used = vec![false; objects.len()];
    Ok(search(0, &mut slot, &mut used, objects, &atoms))
}

fn concepts(program: &LogicProgram, preds: &PredicateTable) -> Result<BTreeMap<PredId, Concept>> {
    let mut out = BTreeMap::new();
    for a in program.rules.iter().flat_map(|r| &r.body) {
        let name = &preds.get(a.pred).name;
        let c = Concept::parse(name).ok_or_else(|| Error::UnknownSemantics(name.clone()))?;
        out.insert(a.pred, c);
    }
    Ok(out)
}

/// Instance-level predictions of a program over named predicates.
pub fn predict_invented(program: &LogicProgram, preds: &PredicateTable, instances: &[Vec<ObjectRecord>]) -> Result<Vec<bool>> {
    let c = concepts(program, preds)?;
    instances
        .iter()
        .map(|objs| {
            for r in &program.rules {
                if rule_holds(r, &c, objs)? {
                    return Ok(true);
                }
            }
            Ok(false)
        })
        .collect()
}

/// Precision and recall over instances.
pub fn evaluate_invented(
    program: &LogicProgram,
    preds: &PredicateTable,
    instances: &[Vec<ObjectRecord>],
    labels: &[bool],
) -> Result<Metrics> {
    let pred = predict_invented(program, preds, instances)?;
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::EmptyTestPositives);
    }
    let derived = pred.iter().filter(|&&p| p).count();
    if derived == 0 {
        return Err(Error::UnsatisfiedBodies);
    }
    let hits = pred.iter().zip(labels).filter(|(&p, &l)| p && l).count();
    Ok(Metrics {
        precision: hits as f64 / derived as f64,
        recall: hits as f64 / positives as f64,
        derived_count: derived,
    })
}

pub fn invented_accuracy(program: &LogicProgram, preds: &PredicateTable, instances: &[Vec<ObjectRecord>], labels: &[bool]) -> Result<f64> {
    if labels.is_empty() {
        return Ok(0.0);
    }
    let pred = predict_invented(program, preds, instances)?;
    Ok(pred.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / labels.len() as f64)
}

/// Drops rules whose predicates have no known semantics.
pub fn evaluable_part(program: &LogicProgram, preds: &PredicateTable) -> LogicProgram {
    LogicProgram::new(
        program
            .rules
            .iter()
            .filter(|r| r.body.iter().all(|a| Concept::parse(&preds.get(a.pred).name).is_some()))
            .cloned()
            .collect(),
    )
}
