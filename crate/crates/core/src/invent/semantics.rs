//! Named object predicates and what they mean on object features.
//!
//! A name is a conjunction of parts joined by `_and_`. Unary parts are
//! `shape_in_<shape>` and `color_in_<color>`; binary parts are `same_shape`,
//! `same_color`, `different_shape` and `different_color`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::datasets::{Color, ObjectRecord, Shape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Feature {
    Shape(Shape),
    Color(Color),
    SameShape,
    SameColor,
    DifferentShape,
    DifferentColor,
}

impl Feature {
    pub fn arity(self) -> usize {
        match self {
            Feature::Shape(_) | Feature::Color(_) => 1,
            _ => 2,
        }
    }

    fn parse(s: &str) -> Option<Feature> {
        if let Some(rest) = s.strip_prefix("shape_in_") {
            return Shape::ALL.into_iter().find(|x| x.name() == rest).map(Feature::Shape);
        }
        if let Some(rest) = s.strip_prefix("color_in_").or_else(|| s.strip_prefix("colour_in_")) {
            return Color::ALL.into_iter().find(|x| x.name() == rest).map(Feature::Color);
        }
        match s {
            "same_shape" => Some(Feature::SameShape),
            "same_color" | "same_colour" => Some(Feature::SameColor),
            "different_shape" => Some(Feature::DifferentShape),
            "different_color" | "different_colour" => Some(Feature::DifferentColor),
            _ => None,
        }
    }

    fn holds(self, args: &[&ObjectRecord]) -> bool {
        match self {
            Feature::Shape(s) => args[0].shape == s,
            Feature::Color(c) => args[0].color == c,
            Feature::SameShape => args[0].shape == args[1].shape,
            Feature::SameColor => args[0].color == args[1].color,
            Feature::DifferentShape => args[0].shape != args[1].shape,
            Feature::DifferentColor => args[0].color != args[1].color,
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feature::Shape(s) => write!(f, "shape_in_{}", s.name()),
            Feature::Color(c) => write!(f, "color_in_{}", c.name()),
            Feature::SameShape => f.write_str("same_shape"),
            Feature::SameColor => f.write_str("same_color"),
            Feature::DifferentShape => f.write_str("different_shape"),
            Feature::DifferentColor => f.write_str("different_color"),
        }
    }
}

/// A conjunction of features of one arity.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Concept {
    pub arity: usize,
    pub parts: BTreeSet<Feature>,
}

impl Concept {
    /// `None` when the name is not in the grammar or mixes arities.
    pub fn parse(name: &str) -> Option<Concept> {
        let parts: Option<BTreeSet<Feature>> = name.split("_and_").map(Feature::parse).collect();
        let parts = parts?;
        let arity = parts.iter().next()?.arity();
        parts.iter().all(|p| p.arity() == arity).then_some(Concept { arity, parts })
    }

    pub fn name(&self) -> String {
        self.parts.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("_and_")
    }

    pub fn holds(&self, args: &[&ObjectRecord]) -> bool {
        args.len() == self.arity && self.parts.iter().all(|p| p.holds(args))
    }
}
