//! Symbolic foundation: the rule language, fact files, forward chaining and
//! rule scoring.

pub mod eval;
pub mod facts;
pub mod ground;
pub mod syntax;

pub use eval::{evaluate_rules, Metrics, RuleScore, RuleScorer};
pub use facts::{parse_rules, FactBase};
pub use ground::{tp_fixpoint, tp_step, FactIndex, Interpretation};
pub use syntax::{
    var_name, Atom, ConstId, ConstantTable, GroundAtom, LogicProgram, PredId, PredicateKind, PredicateSymbol,
    PredicateTable, Rule, Term,
};
