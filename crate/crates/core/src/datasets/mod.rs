//! Deterministic benchmark generators.

pub mod encoder;
pub mod ilp;
pub mod kandinsky;
pub mod kinship;
pub mod mnist;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use encoder::{read_sidecar, write_sidecar, EmbeddingRecord};
pub use ilp::IlpTask;
pub use kandinsky::{
    check_pattern, gen_kandinsky, Color, FeatureEncoder, KandinskyInstance, KandinskyPattern, KandinskySet,
    ObjectRecord, Shape,
};
pub use mnist::{gen_mnist_sequence, MnistTask, Parity};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    Predecessor,
    Even,
    Odd,
    Lessthan,
    Fizz,
    Buzz,
    Member,
    Length,
    Son,
    Grandparent,
    Husband,
    Uncle,
    Relatedness,
    Father,
    UndirectedEdge,
    AdjacentToRed,
    TwoChildren,
    GraphColoring,
    Connectedness,
    Cyclic,
    MnistSequence,
    KandinskyTwoPair,
    KandinskyOneRed,
    KandinskyOneTriangle,
}

impl TaskName {
    pub const ALL: [TaskName; 24] = [
        TaskName::Predecessor,
        TaskName::Even,
        TaskName::Odd,
        TaskName::Lessthan,
        TaskName::Fizz,
        TaskName::Buzz,
        TaskName::Member,
        TaskName::Length,
        TaskName::Son,
        TaskName::Grandparent,
        TaskName::Husband,
        TaskName::Uncle,
        TaskName::Relatedness,
        TaskName::Father,
        TaskName::UndirectedEdge,
        TaskName::AdjacentToRed,
        TaskName::TwoChildren,
        TaskName::GraphColoring,
        TaskName::Connectedness,
        TaskName::Cyclic,
        TaskName::MnistSequence,
        TaskName::KandinskyTwoPair,
        TaskName::KandinskyOneRed,
        TaskName::KandinskyOneTriangle,
    ];

    pub fn as_str(self) -> &'static str {
        use TaskName::*;
        match self {
            Predecessor => "predecessor",
            Even => "even",
            Odd => "odd",
            Lessthan => "lessthan",
            Fizz => "fizz",
            Buzz => "buzz",
            Member => "member",
            Length => "length",
            Son => "son",
            Grandparent => "grandparent",
            Husband => "husband",
            Uncle => "uncle",
            Relatedness => "relatedness",
            Father => "father",
            UndirectedEdge => "undirected_edge",
            AdjacentToRed => "adjacent_to_red",
            TwoChildren => "two_children",
            GraphColoring => "graph_coloring",
            Connectedness => "connectedness",
            Cyclic => "cyclic",
            MnistSequence => "mnist_sequence",
            KandinskyTwoPair => "kandinsky_two_pair",
            KandinskyOneRed => "kandinsky_one_red",
            KandinskyOneTriangle => "kandinsky_one_triangle",
        }
    }

    pub fn is_relational(self) -> bool {
        !matches!(self, TaskName::MnistSequence) && self.kandinsky_pattern().is_none()
    }

    pub fn kandinsky_pattern(self) -> Option<KandinskyPattern> {
        match self {
            TaskName::KandinskyTwoPair => Some(KandinskyPattern::TwoPair),
            TaskName::KandinskyOneRed => Some(KandinskyPattern::OneRed),
            TaskName::KandinskyOneTriangle => Some(KandinskyPattern::OneTriangle),
            _ => None,
        }
    }
}

impl fmt::Display for TaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskName::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownTask(s.to_string()))
    }
}

/// What to generate. `size` is the constant count for arithmetic tasks, the
/// sequence length for the MNIST sequence, and the per-split instance count
/// for Kandinsky tasks; `None` selects the task default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: TaskName,
    pub size: Option<usize>,
    pub seed: u64,
    #[serde(default)]
    pub parity: Option<Parity>,
}

impl TaskSpec {
    pub fn new(name: TaskName) -> Self {
        TaskSpec {
            name,
            size: None,
            seed: 0,
            parity: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == Some(0) {
            return Err(Error::Config("size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum Dataset {
    Relational(IlpTask),
    Sequence(MnistTask),
    Kandinsky(KandinskySet),
}

pub fn gen_task(spec: &TaskSpec) -> Result<Dataset> {
    spec.validate()?;
    if spec.name.is_relational() {
        return Ok(Dataset::Relational(ilp::generate(spec.name, spec.size)?));
    }
    if let Some(p) = spec.name.kandinsky_pattern() {
        let n = spec.size.unwrap_or(30);
        return Ok(Dataset::Kandinsky(gen_kandinsky(p, n, n, spec.seed)));
    }
    let len = spec.size.unwrap_or(12);
    let parity = spec.parity.unwrap_or(Parity::OddIndex);
    Ok(Dataset::Sequence(gen_mnist_sequence(len, parity, spec.seed)?))
}

impl Dataset {
    /// Canonical text form; identical specs give byte-identical output.
    pub fn serialize(&self) -> String {
        match self {
            Dataset::Relational(t) => {
                let mut s = format!("%% train\n{}%% test\n{}", t.train.to_text(), t.test.to_text());
                s.push_str("%% test positives\n");
                for a in &t.test_positives {
                    s.push_str(&t.test.show(a));
                    s.push_str(".\n");
                }
                s
            }
            Dataset::Sequence(m) => {
                let mut s = format!("%% train\n{}%% test\n{}", m.train.to_text(), m.test.to_text());
                s.push_str("%% test positives\n");
                for a in &m.test_positives {
                    s.push_str(&m.test.show(a));
                    s.push_str(".\n");
                }
                s
            }
            Dataset::Kandinsky(k) => {
                let mut s = String::from("%% train\n");
                s.push_str(&kandinsky::to_jsonl(&k.train));
                s.push_str("%% test\n");
                s.push_str(&kandinsky::to_jsonl(&k.test));
                s
            }
        }
    }
}
