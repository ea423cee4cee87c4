//! Terms, atoms, rules and the symbol tables they index into.
//!
//! Predicates and constants are interned: atoms carry small integer ids and
//! need the owning [`PredicateTable`] / [`ConstantTable`] to be printed.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type PredId = u32;
pub type ConstId = u32;

/// Engine-wide arity cap.
pub const MAX_ARITY: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateKind {
    Known,
    Target,
    Placeholder,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PredicateSymbol {
    pub name: String,
    pub arity: usize,
    pub kind: PredicateKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateTable {
    symbols: Vec<PredicateSymbol>,
    #[serde(skip)]
    by_name: HashMap<String, PredId>,
    next_placeholder: usize,
}

impl PredicateTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id for `name`, declaring it if new. Redeclaring with a
    /// different arity is an error; the kind is only upgraded from `Known`.
    pub fn declare(&mut self, name: &str, arity: usize, kind: PredicateKind) -> Result<PredId> {
        if arity == 0 || arity > MAX_ARITY {
            return Err(Error::UnsupportedArity(arity));
        }
        if name.is_empty() {
            return Err(Error::Config("empty predicate name".into()));
        }
        if let Some(&id) = self.by_name.get(name) {
            let sym = &mut self.symbols[id as usize];
            if sym.arity != arity {
                return Err(Error::ArityConflict {
                    name: name.to_string(),
                    expected: sym.arity,
                    found: arity,
                });
            }
            if sym.kind == PredicateKind::Known {
                sym.kind = kind;
            }
            return Ok(id);
        }
        let id = self.symbols.len() as PredId;
        self.symbols.push(PredicateSymbol {
            name: name.to_string(),
            arity,
            kind,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    /// Declares an anonymous placeholder predicate `p<k>` with a fresh `k`.
    pub fn fresh_placeholder(&mut self, arity: usize) -> Result<PredId> {
        loop {
            self.next_placeholder += 1;
            let name = format!("p{}", self.next_placeholder);
            if !self.by_name.contains_key(&name) {
                return self.declare(&name, arity, PredicateKind::Placeholder);
            }
        }
    }

    pub fn get(&self, id: PredId) -> &PredicateSymbol {
        &self.symbols[id as usize]
    }

    pub fn id(&self, name: &str) -> Option<PredId> {
        self.by_name.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PredId, &PredicateSymbol)> {
        self.symbols.iter().enumerate().map(|(i, s)| (i as PredId, s))
    }

    /// Rebuilds the name index after deserialization.
    pub fn reindex(&mut self) {
        self.by_name = self
            .symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.clone(), i as PredId))
            .collect();
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstantTable {
    names: Vec<String>,
    #[serde(skip)]
    by_name: HashMap<String, ConstId>,
}

impl ConstantTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> ConstId {
        if let Some(&id) = self.by_name.get(name) {
            return id;
        }
        let id = self.names.len() as ConstId;
        self.names.push(name.to_string());
        self.by_name.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<ConstId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ConstId) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ConstId> {
        0..self.names.len() as ConstId
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn reindex(&mut self) {
        self.by_name = self
            .names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as ConstId))
            .collect();
    }
}

/// A variable (1-based index) or a constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Var(usize),
    Const(ConstId),
}

/// Conventional variable names: `X`, `Y`, then `V3`, `V4`, ... Index 0 is
/// `I`, the instance variable of instance-level heads.
pub fn var_name(index: usize) -> String {
    match index {
        0 => "I".to_string(),
        1 => "X".to_string(),
        2 => "Y".to_string(),
        k => format!("V{k}"),
    }
}

/// A ground atom of a unary or binary predicate. Unused argument slots are 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundAtom {
    pub pred: PredId,
    pub args: [ConstId; MAX_ARITY],
    pub arity: u8,
}

impl GroundAtom {
    pub fn unary(pred: PredId, a: ConstId) -> Self {
        Self {
            pred,
            args: [a, 0],
            arity: 1,
        }
    }

    pub fn binary(pred: PredId, a: ConstId, b: ConstId) -> Self {
        Self {
            pred,
            args: [a, b],
            arity: 2,
        }
    }

    pub fn new(pred: PredId, args: &[ConstId]) -> Self {
        match args {
            [a] => Self::unary(pred, *a),
            [a, b] => Self::binary(pred, *a, *b),
            _ => panic!("unsupported arity {}", args.len()),
        }
    }

    pub fn args(&self) -> &[ConstId] {
        &self.args[..self.arity as usize]
    }

    pub fn display<'a>(&'a self, preds: &'a PredicateTable, consts: &'a ConstantTable) -> impl fmt::Display + 'a {
        DisplayGround {
            atom: self,
            preds,
            consts,
        }
    }
}

struct DisplayGround<'a> {
    atom: &'a GroundAtom,
    preds: &'a PredicateTable,
    consts: &'a ConstantTable,
}

impl fmt::Display for DisplayGround<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.preds.get(self.atom.pred).name)?;
        for (i, &c) in self.atom.args().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(self.consts.name(c))?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub pred: PredId,
    pub terms: Vec<Term>,
}

impl Atom {
    pub fn new(pred: PredId, terms: Vec<Term>) -> Self {
        Self { pred, terms }
    }

    pub fn vars(&self) -> Vec<usize> {
        self.terms
            .iter()
            .filter_map(|t| match t {
                Term::Var(v) => Some(*v),
                Term::Const(_) => None,
            })
            .collect()
    }

    pub fn is_ground(&self) -> bool {
        self.terms.iter().all(|t| matches!(t, Term::Const(_)))
    }

    /// Applies a total assignment (indexed by variable number) to produce a
    /// ground atom. Returns `None` if a variable is unbound.
    pub fn ground(&self, assignment: &[Option<ConstId>]) -> Option<GroundAtom> {
        let mut args = [0; MAX_ARITY];
        for (slot, t) in args.iter_mut().zip(&self.terms) {
            *slot = match *t {
                Term::Const(c) => c,
                Term::Var(v) => (*assignment.get(v)?)?,
            };
        }
        Some(GroundAtom {
            pred: self.pred,
            args,
            arity: self.terms.len() as u8,
        })
    }

    pub fn display<'a>(&'a self, preds: &'a PredicateTable, consts: &'a ConstantTable) -> impl fmt::Display + 'a {
        DisplayAtom {
            atom: self,
            preds,
            consts,
        }
    }
}

struct DisplayAtom<'a> {
    atom: &'a Atom,
    preds: &'a PredicateTable,
    consts: &'a ConstantTable,
}

impl fmt::Display for DisplayAtom<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.preds.get(self.atom.pred).name)?;
        for (i, t) in self.atom.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match t {
                Term::Var(v) => f.write_str(&var_name(*v))?,
                Term::Const(c) => f.write_str(self.consts.name(*c))?,
            }
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl Rule {
    pub fn new(head: Atom, body: Vec<Atom>) -> Self {
        Self { head, body }
    }

    /// Highest variable index used anywhere in the rule (0 if none).
    pub fn max_var(&self) -> usize {
        std::iter::once(&self.head)
            .chain(&self.body)
            .flat_map(|a| a.vars())
            .max()
            .unwrap_or(0)
    }

    /// Variables of the rule in order of first appearance (head first).
    pub fn vars(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for a in std::iter::once(&self.head).chain(&self.body) {
            for v in a.vars() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    /// True when every head variable also occurs in the body.
    pub fn is_range_restricted(&self) -> bool {
        let body_vars: Vec<usize> = self.body.iter().flat_map(|a| a.vars()).collect();
        self.head.vars().iter().all(|v| body_vars.contains(v))
    }

    /// Canonical representative up to renaming of the body-only variables and
    /// reordering/duplication of body atoms. Head variables keep their names.
    pub fn canonical(&self) -> Rule {
        let head_vars = self.head.vars();
        let mut aux: Vec<usize> = Vec::new();
        for a in &self.body {
            for v in a.vars() {
                if !head_vars.contains(&v) && !aux.contains(&v) {
                    aux.push(v);
                }
            }
        }
        let first_free = head_vars.iter().copied().max().unwrap_or(0).max(2) + 1;
        let mut best: Option<Rule> = None;
        for perm in permutations(aux.len()) {
            let rename = |t: &Term| match *t {
                Term::Var(v) => match aux.iter().position(|&a| a == v) {
                    Some(i) => Term::Var(first_free + perm[i]),
                    None => Term::Var(v),
                },
                c => c,
            };
            let mut body: Vec<Atom> = self
                .body
                .iter()
                .map(|a| Atom::new(a.pred, a.terms.iter().map(rename).collect()))
                .collect();
            body.sort();
            body.dedup();
            let cand = Rule::new(self.head.clone(), body);
            if best.as_ref().map_or(true, |b| cand < *b) {
                best = Some(cand);
            }
        }
        best.unwrap_or_else(|| self.clone())
    }

    pub fn display<'a>(&'a self, preds: &'a PredicateTable, consts: &'a ConstantTable) -> impl fmt::Display + 'a {
        DisplayRule {
            rule: self,
            preds,
            consts,
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

struct DisplayRule<'a> {
    rule: &'a Rule,
    preds: &'a PredicateTable,
    consts: &'a ConstantTable,
}

impl fmt::Display for DisplayRule<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.rule.head.display(self.preds, self.consts))?;
        if self.rule.body.is_empty() {
            return Ok(());
        }
        f.write_str(" :- ")?;
        for (i, a) in self.rule.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", a.display(self.preds, self.consts))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicProgram {
    pub rules: Vec<Rule>,
}

impl LogicProgram {
    pub fn new(rules: Vec<Rule>) -> Self {
        Self { rules }
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    /// Drops rules that are equal up to variable renaming, keeping first
    /// occurrences in order.
    pub fn dedup(&mut self) {
        let mut seen = std::collections::HashSet::new();
        self.rules.retain(|r| seen.insert(r.canonical()));
    }

    /// Whether some rule of the program is a renaming of `rule`.
    pub fn contains_variant(&self, rule: &Rule) -> bool {
        let c = rule.canonical();
        self.rules.iter().any(|r| r.canonical() == c)
    }

    /// One rule per line, `head :- b1, b2`.
    pub fn to_text(&self, preds: &PredicateTable, consts: &ConstantTable) -> String {
        let mut s = String::new();
        for r in &self.rules {
            s.push_str(&r.display(preds, consts).to_string());
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arity_conflict_is_reported() {
        let mut t = PredicateTable::new();
        t.declare("succ", 2, PredicateKind::Known).unwrap();
        let err = t.declare("succ", 1, PredicateKind::Known).unwrap_err();
        assert!(matches!(err, Error::ArityConflict { expected: 2, found: 1, .. }));
    }

    #[test]
    fn placeholders_are_unique() {
        let mut t = PredicateTable::new();
        t.declare("p2", 1, PredicateKind::Known).unwrap();
        let a = t.fresh_placeholder(1).unwrap();
        let b = t.fresh_placeholder(2).unwrap();
        let c = t.fresh_placeholder(1).unwrap();
        let names: Vec<_> = [a, b, c].iter().map(|&i| t.get(i).name.clone()).collect();
        assert_eq!(names, ["p1", "p3", "p4"]);
        assert_eq!(t.get(b).kind, PredicateKind::Placeholder);
    }

    #[test]
    fn canonical_ignores_aux_names_and_order() {
        let p = 0;
        let q = 1;
        let head = Atom::new(2, vec![Term::Var(1)]);
        let r1 = Rule::new(
            head.clone(),
            vec![
                Atom::new(p, vec![Term::Var(1), Term::Var(3)]),
                Atom::new(q, vec![Term::Var(3), Term::Var(4)]),
            ],
        );
        let r2 = Rule::new(
            head,
            vec![
                Atom::new(q, vec![Term::Var(5), Term::Var(3)]),
                Atom::new(p, vec![Term::Var(1), Term::Var(5)]),
            ],
        );
        assert_eq!(r1.canonical(), r2.canonical());
    }
}
