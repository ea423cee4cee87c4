//! Fact files and rule files.
//!
//! A fact file is a sequence of clauses `pred(c1,...,cn).` separated by
//! whitespace, with `%` line comments. Section markers `#background`, `#pos`
//! and `#neg` switch the destination set; clauses before any marker are
//! background. Two optional directives pin symbol ids so that a serialized
//! fact base parses back identically:
//!
//! ```text
//! #predicates succ/2 zero/1 pre/2
//! #constants 0 1 2
//! ```

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::syntax::{
    Atom, ConstId, ConstantTable, GroundAtom, LogicProgram, PredId, PredicateKind, PredicateTable, Rule, Term,
};
use crate::error::{Error, Result};

/// Background knowledge plus labelled examples of the target predicate.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactBase {
    pub preds: PredicateTable,
    pub constants: ConstantTable,
    pub background: BTreeSet<GroundAtom>,
    pub positives: BTreeSet<GroundAtom>,
    pub negatives: BTreeSet<GroundAtom>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Section {
    Background,
    Positive,
    Negative,
}

impl FactBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interns `name(args)` and inserts it into the background.
    pub fn add_background(&mut self, pred: &str, args: &[&str]) -> Result<GroundAtom> {
        let atom = self.make_atom(pred, args, PredicateKind::Known)?;
        self.background.insert(atom);
        Ok(atom)
    }

    pub fn add_positive(&mut self, pred: &str, args: &[&str]) -> Result<GroundAtom> {
        let atom = self.make_atom(pred, args, PredicateKind::Target)?;
        if self.negatives.contains(&atom) {
            return Err(Error::ContradictoryExample(self.show(&atom)));
        }
        self.positives.insert(atom);
        Ok(atom)
    }

    pub fn add_negative(&mut self, pred: &str, args: &[&str]) -> Result<GroundAtom> {
        let atom = self.make_atom(pred, args, PredicateKind::Target)?;
        if self.positives.contains(&atom) {
            return Err(Error::ContradictoryExample(self.show(&atom)));
        }
        self.negatives.insert(atom);
        Ok(atom)
    }

    fn make_atom(&mut self, pred: &str, args: &[&str], kind: PredicateKind) -> Result<GroundAtom> {
        let p = self.preds.declare(pred, args.len(), kind)?;
        let ids: Vec<ConstId> = args.iter().map(|a| self.constants.intern(a)).collect();
        Ok(GroundAtom::new(p, &ids))
    }

    pub fn show(&self, atom: &GroundAtom) -> String {
        atom.display(&self.preds, &self.constants).to_string()
    }

    /// The target predicate: the predicate of the positive examples.
    pub fn target(&self) -> Option<PredId> {
        self.positives
            .iter()
            .chain(&self.negatives)
            .map(|a| a.pred)
            .next()
            .or_else(|| {
                self.preds
                    .iter()
                    .find(|(_, s)| s.kind == PredicateKind::Target)
                    .map(|(id, _)| id)
            })
    }

    /// Background plus positive examples: everything known to be true.
    pub fn known_true(&self) -> BTreeSet<GroundAtom> {
        self.background.union(&self.positives).copied().collect()
    }

    pub fn parse(text: &str) -> Result<FactBase> {
        let mut fb = FactBase::new();
        let mut section = Section::Background;
        for (lineno, raw) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = strip_comment(raw);
            let trimmed = line.trim_start();
            if let Some(directive) = trimmed.strip_prefix('#') {
                let mut words = directive.split_whitespace();
                let name = words.next().unwrap_or("");
                match name {
                    "background" => section = Section::Background,
                    "pos" => section = Section::Positive,
                    "neg" => section = Section::Negative,
                    "constants" => {
                        for w in words {
                            fb.constants.intern(w);
                        }
                    }
                    "predicates" => {
                        for w in words {
                            let (n, a) = w.rsplit_once('/').ok_or_else(|| Error::Syntax {
                                line: line_no,
                                column: column_of(raw, w),
                                message: format!("expected name/arity, found `{w}`"),
                            })?;
                            let arity: usize = a.parse().map_err(|_| Error::Syntax {
                                line: line_no,
                                column: column_of(raw, w),
                                message: format!("bad arity in `{w}`"),
                            })?;
                            fb.preds.declare(n, arity, PredicateKind::Known)?;
                        }
                    }
                    other => {
                        return Err(Error::Syntax {
                            line: line_no,
                            column: column_of(raw, trimmed) + 1,
                            message: format!("unknown section marker `#{other}`"),
                        })
                    }
                }
                continue;
            }
            let mut lex = Lexer::new(line, line_no);
            loop {
                lex.skip_ws();
                if lex.at_end() {
                    break;
                }
                let (name, args) = lex.ground_clause()?;
                let refs: Vec<&str> = args.iter().map(String::as_str).collect();
                let result = match section {
                    Section::Background => fb.add_background(&name, &refs),
                    Section::Positive => fb.add_positive(&name, &refs),
                    Section::Negative => fb.add_negative(&name, &refs),
                };
                result?;
            }
        }
        Ok(fb)
    }

    /// Serializes with explicit symbol directives so `parse(to_text())`
    /// reproduces identical ids.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("#predicates");
        for (_, sym) in self.preds.iter() {
            s.push_str(&format!(" {}/{}", sym.name, sym.arity));
        }
        s.push('\n');
        s.push_str("#constants");
        for n in self.constants.names() {
            s.push(' ');
            s.push_str(n);
        }
        s.push('\n');
        for (marker, set) in [
            ("#background", &self.background),
            ("#pos", &self.positives),
            ("#neg", &self.negatives),
        ] {
            s.push_str(marker);
            s.push('\n');
            for a in set {
                s.push_str(&self.show(a));
                s.push_str(".\n");
            }
        }
        s
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn column_of(line: &str, part: &str) -> usize {
    line.find(part).map_or(1, |i| i + 1)
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _src: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Self {
            chars: src.chars().collect(),
            pos: 0,
            line,
            _src: src,
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.line,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        match self.peek() {
            Some(x) if x == c => {
                self.pos += 1;
                Ok(())
            }
            Some(x) => Err(self.error(format!("expected `{c}`, found `{x}`"))),
            None => Err(self.error(format!("expected `{c}`, found end of line"))),
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' || c == '-' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if start == self.pos {
            return Err(match self.peek() {
                Some(c) => self.error(format!("expected identifier, found `{c}`")),
                None => self.error("expected identifier, found end of line"),
            });
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    /// `name(arg, ...)` without the terminating period.
    fn atom(&mut self) -> Result<(String, Vec<String>)> {
        let name = self.ident()?;
        self.expect('(')?;
        let mut args = vec![self.ident()?];
        loop {
            self.skip_ws();
            match self.peek() {
                Some(',') => {
                    self.pos += 1;
                    args.push(self.ident()?);
                }
                Some(')') => {
                    self.pos += 1;
                    break;
                }
                Some(c) => return Err(self.error(format!("expected `,` or `)`, found `{c}`"))),
                None => return Err(self.error("unterminated argument list")),
            }
        }
        Ok((name, args))
    }

    fn ground_clause(&mut self) -> Result<(String, Vec<String>)> {
        let (name, args) = self.atom()?;
        self.expect('.')?;
        Ok((name, args))
    }
}

fn is_variable(token: &str) -> bool {
    token.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

/// Parses rules `head :- b1, b2` (trailing `.` optional), one per line.
/// Variables are capitalised: `X` and `Y` are variables 1 and 2, `V<k>` is
/// variable k, and any other capitalised name gets the next free index.
/// Unknown predicates are declared into `preds`; constants are interned.
pub fn parse_rules(text: &str, preds: &mut PredicateTable, consts: &mut ConstantTable) -> Result<LogicProgram> {
    let mut rules = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        let mut lex = Lexer::new(line, lineno + 1);
        let mut names: Vec<(String, usize)> = Vec::new();
        let mut next_free = 3;
        let mut parsed = Vec::new();
        let (h, hargs) = lex.atom()?;
        parsed.push((h, hargs));
        lex.skip_ws();
        if lex.peek() == Some(':') {
            lex.pos += 1;
            lex.expect('-')?;
            loop {
                parsed.push(lex.atom()?);
                lex.skip_ws();
                match lex.peek() {
                    Some(',') => lex.pos += 1,
                    _ => break,
                }
            }
        }
        lex.skip_ws();
        if lex.peek() == Some('.') {
            lex.pos += 1;
        }
        lex.skip_ws();
        if !lex.at_end() {
            return Err(lex.error("trailing input after rule"));
        }
        // Fixed names first so that `Z` never shadows a later `V3`.
        for (_, args) in &parsed {
            for a in args {
                let fixed = match a.as_str() {
                    "I" => Some(0),
                    "X" => Some(1),
                    "Y" => Some(2),
                    s if s.starts_with('V') && s[1..].parse::<usize>().is_ok() => s[1..].parse().ok(),
                    _ => None,
                };
                if let Some(k) = fixed {
                    next_free = next_free.max(k + 1);
                    if !names.iter().any(|(n, _)| n == a) {
                        names.push((a.clone(), k));
                    }
                }
            }
        }
        let mut atoms = Vec::new();
        for (i, (name, args)) in parsed.into_iter().enumerate() {
            let kind = if i == 0 { PredicateKind::Target } else { PredicateKind::Known };
            let pred = preds.declare(&name, args.len(), kind)?;
            let terms = args
                .iter()
                .map(|a| {
                    if is_variable(a) {
                        let idx = match names.iter().find(|(n, _)| n == a) {
                            Some((_, k)) => *k,
                            None => {
                                names.push((a.clone(), next_free));
                                next_free += 1;
                                next_free - 1
                            }
                        };
                        Term::Var(idx)
                    } else {
                        Term::Const(consts.intern(a))
                    }
                })
                .collect();
            atoms.push(Atom::new(pred, terms));
        }
        let head = atoms.remove(0);
        rules.push(Rule::new(head, atoms));
    }
    Ok(LogicProgram::new(rules))
}
