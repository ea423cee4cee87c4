use ndarray::Array2;

use super::NetworkParams;
use crate::kb::BodyAtomSpace;
use crate::logic::{Atom, LogicProgram, Rule};

/// `M_P = M_m ⋯ M_1`, one row per candidate rule.
pub fn logic_program_tensor(params: &NetworkParams) -> Array2<f64> {
    let ms = params.softmaxed();
    let mut acc = ms[0].clone();
    for m in &ms[1..] {
        acc = m.dot(&acc);
    }
    acc
}

/// Atom indices above `threshold` in each row of `M_P`. Empty rows are
/// dropped and repeated bodies kept once, in first-row order.
pub fn extract_bodies(params: &NetworkParams, threshold: f64) -> Vec<Vec<usize>> {
    let mp = logic_program_tensor(params);
    let mut out: Vec<Vec<usize>> = Vec::new();
    for row in mp.rows() {
        let body: Vec<usize> = row.iter().enumerate().filter(|(_, w)| **w > threshold).map(|(j, _)| j).collect();
        if !body.is_empty() && !out.contains(&body) {
            out.push(body);
        }
    }
    out
}

/// Turns extracted bodies into rules for `head`, deduplicated up to
/// variable renaming.
pub fn extract_rules(params: &NetworkParams, space: &BodyAtomSpace, head: &Atom, threshold: f64) -> LogicProgram {
    let rules = extract_bodies(params, threshold)
        .into_iter()
        .map(|b| Rule::new(head.clone(), b.into_iter().map(|j| space.atoms[j].clone()).collect()))
        .collect();
    let mut p = LogicProgram::new(rules);
    p.dedup();
    p
}
