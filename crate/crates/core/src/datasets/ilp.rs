//! Classical relational benchmark tasks: arithmetic, lists, family trees and
//! graphs. Each task comes with a training world, a test world built over
//! constants not seen during training, and the expected program.

use std::collections::BTreeSet;

use super::TaskName;
use crate::error::Result;
use crate::logic::{FactBase, GroundAtom, PredId, PredicateKind};

/// A generated relational learning task.
#[derive(Clone, Debug)]
pub struct IlpTask {
    pub name: TaskName,
    pub train: FactBase,
    /// Test background; its `positives` are training positives whose
    /// constants also occur in the test world, used as seeds.
    pub test: FactBase,
    pub test_positives: BTreeSet<GroundAtom>,
    /// Target predicate id, identical in `train` and `test`.
    pub target: PredId,
    /// Default number of rule variables.
    pub variables: usize,
    /// Expected program, one rule per line.
    pub gold: String,
}

struct World {
    fb: FactBase,
}

impl World {
    fn new(background: &[(&str, usize)], target: (&str, usize)) -> Self {
        let mut fb = FactBase::new();
        for &(n, a) in background {
            fb.preds.declare(n, a, PredicateKind::Known).expect("valid schema");
        }
        fb.preds
            .declare(target.0, target.1, PredicateKind::Target)
            .expect("valid schema");
        World { fb }
    }

    fn fact(&mut self, pred: &str, args: &[&str]) {
        self.fb.add_background(pred, args).expect("schema-consistent fact");
    }

    fn pos(&mut self, pred: &str, args: &[&str]) {
        self.fb.add_positive(pred, args).expect("schema-consistent fact");
    }

    fn constant(&mut self, name: &str) {
        self.fb.constants.intern(name);
    }

    /// Every grounding of the target over the world's constants that is not
    /// a positive becomes a negative example.
    fn close_world(mut self) -> FactBase {
        let target = self.fb.target().expect("target declared");
        let arity = self.fb.preds.get(target).arity;
        let n = self.fb.constants.len() as u32;
        let mut negs = BTreeSet::new();
        if arity == 1 {
            for a in 0..n {
                negs.insert(GroundAtom::unary(target, a));
            }
        } else {
            for a in 0..n {
                for b in 0..n {
                    negs.insert(GroundAtom::binary(target, a, b));
                }
            }
        }
        self.fb.negatives = negs.difference(&self.fb.positives).copied().collect();
        self.fb
    }
}

fn finish(name: TaskName, train: World, mut test: World, variables: usize, gold: &str) -> IlpTask {
    let train = train.close_world();
    let test_positives = std::mem::take(&mut test.fb.positives);
    let mut test = test.fb;
    let target = train.target().expect("target declared");
    // Training positives over constants that also occur in the test world
    // seed recursive targets.
    for p in &train.positives {
        let ids: Option<Vec<u32>> = p
            .args()
            .iter()
            .map(|&c| test.constants.id(train.constants.name(c)))
            .collect();
        if let Some(ids) = ids {
            test.positives.insert(GroundAtom::new(p.pred, &ids));
        }
    }
    IlpTask {
        name,
        train,
        test,
        test_positives,
        target,
        variables,
        gold: gold.to_string(),
    }
}

fn num(i: usize) -> String {
    i.to_string()
}

fn arithmetic(n: usize, target: (&str, usize), holds: &dyn Fn(&[usize]) -> bool) -> World {
    let mut w = World::new(&[("zero", 1), ("succ", 2)], target);
    for i in 0..n {
        w.constant(&num(i));
    }
    w.fact("zero", &["0"]);
    for i in 0..n.saturating_sub(1) {
        w.fact("succ", &[&num(i), &num(i + 1)]);
    }
    for i in 0..n {
        if target.1 == 1 {
            if holds(&[i]) {
                w.pos(target.0, &[&num(i)]);
            }
        } else {
            for j in 0..n {
                if holds(&[i, j]) {
                    w.pos(target.0, &[&num(i), &num(j)]);
                }
            }
        }
    }
    w
}

fn arithmetic_task(
    name: TaskName,
    n: usize,
    target: (&str, usize),
    holds: &dyn Fn(&[usize]) -> bool,
    variables: usize,
    gold: &str,
) -> IlpTask {
    let train = arithmetic(n, target, holds);
    let test = arithmetic(2 * n, target, holds);
    finish(name, train, test, variables, gold)
}

pub fn predecessor(n: usize) -> IlpTask {
    arithmetic_task(
        TaskName::Predecessor,
        n,
        ("pre", 2),
        &|a| a[0] == a[1] + 1,
        2,
        "pre(X,Y) :- succ(Y,X)\n",
    )
}

pub fn even(n: usize) -> IlpTask {
    arithmetic_task(
        TaskName::Even,
        n,
        ("even", 1),
        &|a| a[0] % 2 == 0,
        3,
        "even(X) :- zero(X)\neven(X) :- even(V3), succ(V3,V4), succ(V4,X)\n",
    )
}

pub fn odd(n: usize) -> IlpTask {
    arithmetic_task(
        TaskName::Odd,
        n,
        ("odd", 1),
        &|a| a[0] % 2 == 1,
        3,
        "odd(X) :- zero(V3), succ(V3,X)\nodd(X) :- odd(V3), succ(V3,V4), succ(V4,X)\n",
    )
}

pub fn lessthan(n: usize) -> IlpTask {
    arithmetic_task(
        TaskName::Lessthan,
        n,
        ("lessthan", 2),
        &|a| a[0] < a[1],
        3,
        "lessthan(X,Y) :- succ(X,Y)\nlessthan(X,Y) :- lessthan(X,V3), succ(V3,Y)\n",
    )
}

pub fn fizz(n: usize) -> IlpTask {
    arithmetic_task(
        TaskName::Fizz,
        n,
        ("fizz", 1),
        &|a| a[0] % 3 == 0,
        3,
        "fizz(X) :- zero(X)\nfizz(X) :- fizz(Y), succ(Y,V3), succ(V3,V4), succ(V4,X)\n",
    )
}

pub fn buzz(n: usize) -> IlpTask {
    arithmetic_task(
        TaskName::Buzz,
        n,
        ("buzz", 1),
        &|a| a[0] % 5 == 0,
        3,
        "buzz(X) :- zero(X)\nbuzz(X) :- buzz(Y), succ(Y,V3), succ(V3,V4), succ(V4,V5), succ(V5,V6), succ(V6,X)\n",
    )
}

/// A cons-list whose nodes are `nodes[0] -> nodes[1] -> ...`.
fn member_world(nodes: &[&str], values: &[&str]) -> World {
    let mut w = World::new(&[("cons", 2), ("value", 2)], ("member", 2));
    for pair in nodes.windows(2) {
        w.fact("cons", &[pair[0], pair[1]]);
    }
    for (n, v) in nodes.iter().zip(values) {
        w.fact("value", &[n, v]);
    }
    for i in 0..nodes.len() {
        for v in &values[i..] {
            w.pos("member", &[v, nodes[i]]);
        }
    }
    w
}

pub fn member() -> IlpTask {
    let train = member_world(&["a", "b", "c", "d"], &["4", "3", "2", "1"]);
    let test = member_world(&["l1", "l2", "l3", "l4", "l5", "l6"], &["9", "7", "8", "6", "5", "0"]);
    finish(
        TaskName::Member,
        train,
        test,
        3,
        "member(X,Y) :- value(Y,X)\nmember(X,Y) :- cons(Y,V3), member(X,V3)\n",
    )
}

/// List nodes chained by `cons`, ending in the empty list `0`; numbers
/// `0..=max` chained by `succ`.
fn length_world(nodes: &[&str], max: usize) -> World {
    let mut w = World::new(&[("cons", 2), ("succ", 2)], ("length", 2));
    for pair in nodes.windows(2) {
        w.fact("cons", &[pair[0], pair[1]]);
    }
    let last = nodes.last().expect("nonempty list");
    w.fact("cons", &[last, "0"]);
    for i in 0..max {
        w.fact("succ", &[&num(i), &num(i + 1)]);
    }
    w.pos("length", &["0", "0"]);
    let k = nodes.len();
    for (i, node) in nodes.iter().enumerate() {
        w.pos("length", &[node, &num(k - i)]);
    }
    w
}

pub fn length() -> IlpTask {
    let train = length_world(&["a", "b", "c"], 4);
    let test = length_world(&["e", "f", "g", "h", "i"], 6);
    finish(
        TaskName::Length,
        train,
        test,
        4,
        "length(X,Y) :- cons(X,V3), length(V3,V4), succ(V4,Y)\n",
    )
}

struct Person<'a> {
    name: &'a str,
    male: bool,
    father: Option<&'a str>,
}

fn son_world(people: &[Person]) -> World {
    let mut w = World::new(&[("father", 2), ("brother", 2), ("sister", 2)], ("son", 2));
    for p in people {
        w.constant(p.name);
    }
    for p in people {
        if let Some(f) = p.father {
            w.fact("father", &[f, p.name]);
            if p.male {
                w.pos("son", &[p.name, f]);
            }
            for q in people {
                if q.name != p.name && q.father == Some(f) {
                    w.fact(if p.male { "brother" } else { "sister" }, &[p.name, q.name]);
                }
            }
        }
    }
    w
}

pub fn son() -> IlpTask {
    let p = |name, male, father| Person { name, male, father };
    let train = son_world(&[
        p("gf", true, None),
        p("f1", true, Some("gf")),
        p("f2", true, Some("gf")),
        p("a", true, Some("f1")),
        p("b", false, Some("f1")),
        p("c", true, Some("f1")),
        p("d", true, Some("f2")),
        p("e", false, Some("f2")),
        p("g", false, Some("f2")),
    ]);
    let test = son_world(&[
        p("t0", true, None),
        p("t1", true, Some("t0")),
        p("t2", false, Some("t0")),
        p("t3", true, Some("t0")),
        p("t4", true, Some("t1")),
        p("t5", true, Some("t1")),
        p("t6", false, Some("t3")),
        p("t7", true, Some("t3")),
        p("t8", false, Some("t3")),
        p("t9", true, Some("t3")),
    ]);
    finish(TaskName::Son, train, test, 3, "son(X,Y) :- father(Y,X), brother(X,V3)\n")
}

fn parent_world(fathers: &[(&str, &str)], mothers: &[(&str, &str)]) -> World {
    let mut w = World::new(&[("father", 2), ("mother", 2)], ("grandparent", 2));
    for (a, b) in fathers {
        w.fact("father", &[a, b]);
    }
    for (a, b) in mothers {
        w.fact("mother", &[a, b]);
    }
    let parents: Vec<(&str, &str)> = fathers.iter().chain(mothers).copied().collect();
    for &(g, p) in &parents {
        for &(p2, c) in &parents {
            if p == p2 {
                w.pos("grandparent", &[g, c]);
            }
        }
    }
    w
}

pub fn grandparent() -> IlpTask {
    let train = parent_world(
        &[("A", "C"), ("A", "D"), ("C", "E"), ("C", "G")],
        &[("B", "C"), ("B", "D"), ("I", "E"), ("I", "G"), ("D", "F"), ("D", "H")],
    );
    let test = parent_world(
        &[("m1", "m3"), ("m1", "m4"), ("m3", "m6"), ("m5", "m7"), ("m5", "m8")],
        &[("m2", "m3"), ("m2", "m4"), ("m4", "m7"), ("m4", "m8"), ("m9", "m6"), ("m6", "m10")],
    );
    finish(
        TaskName::Grandparent,
        train,
        test,
        3,
        "grandparent(X,Y) :- father(X,V3), father(V3,Y)\n\
         grandparent(X,Y) :- father(X,V3), mother(V3,Y)\n\
         grandparent(X,Y) :- mother(X,V3), father(V3,Y)\n\
         grandparent(X,Y) :- mother(X,V3), mother(V3,Y)\n",
    )
}

/// `couples` are (husband, wife); `children` are (mother, child, is_male).
fn father_world(couples: &[(&str, &str)], children: &[(&str, &str, bool)]) -> World {
    let mut w = World::new(&[("husband", 2), ("mother", 2), ("son", 2), ("daughter", 2)], ("father", 2));
    for (h, wf) in couples {
        w.fact("husband", &[h, wf]);
    }
    for &(m, c, male) in children {
        w.fact("mother", &[m, c]);
        let rel = if male { "son" } else { "daughter" };
        w.fact(rel, &[c, m]);
        if let Some((h, _)) = couples.iter().find(|(_, wf)| *wf == m) {
            w.fact(rel, &[c, h]);
            w.pos("father", &[h, c]);
        }
    }
    w
}

pub fn father() -> IlpTask {
    let train = father_world(
        &[("h1", "w1"), ("h2", "c2")],
        &[("w1", "c1", true), ("w1", "c2", false), ("c2", "c3", true)],
    );
    let test = father_world(
        &[("k1", "k2"), ("k3", "k4"), ("k5", "k6")],
        &[
            ("k2", "k3", true),
            ("k2", "k6", false),
            ("k4", "k7", false),
            ("k4", "k8", true),
            ("k6", "k9", true),
            ("k10", "k11", false),
        ],
    );
    finish(TaskName::Father, train, test, 3, "father(X,Y) :- husband(X,V3), mother(V3,Y)\n")
}

fn related_world(parent: &[(&str, &str)]) -> World {
    let mut w = World::new(&[("parent", 2)], ("related", 2));
    for (a, b) in parent {
        w.fact("parent", &[a, b]);
    }
    // Connected components of the undirected parent graph.
    let mut names: Vec<&str> = Vec::new();
    for (a, b) in parent {
        for x in [*a, *b] {
            if !names.contains(&x) {
                names.push(x);
            }
        }
    }
    let pos = |x: &str| names.iter().position(|n| *n == x).expect("listed");
    let mut comp: Vec<usize> = (0..names.len()).collect();
    fn root(c: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while c[r] != r {
            r = c[r];
        }
        c[i] = r;
        r
    }
    for (a, b) in parent {
        let (ra, rb) = (root(&mut comp, pos(a)), root(&mut comp, pos(b)));
        comp[ra] = rb;
    }
    for i in 0..names.len() {
        for j in 0..names.len() {
            if root(&mut comp, i) == root(&mut comp, j) {
                w.pos("related", &[names[i], names[j]]);
            }
        }
    }
    w
}

pub fn relatedness() -> IlpTask {
    let train = related_world(&[("a", "b"), ("a", "c"), ("b", "d"), ("e", "f"), ("f", "g"), ("g", "h")]);
    let test = related_world(&[("r1", "r2"), ("r3", "r2"), ("r3", "r4"), ("r5", "r6"), ("r7", "r6"), ("r8", "r9")]);
    finish(
        TaskName::Relatedness,
        train,
        test,
        3,
        "related(X,Y) :- parent(X,Y)\nrelated(X,Y) :- related(Y,X)\nrelated(X,Y) :- related(X,V3), related(V3,Y)\n",
    )
}

fn uedge_world(nodes: &[&str], edges: &[(&str, &str)]) -> World {
    let mut w = World::new(&[("edge", 2)], ("uedge", 2));
    for n in nodes {
        w.constant(n);
    }
    for (a, b) in edges {
        w.fact("edge", &[a, b]);
        w.pos("uedge", &[a, b]);
        w.pos("uedge", &[b, a]);
    }
    w
}

pub fn undirected_edge() -> IlpTask {
    let train = uedge_world(&["a", "b", "c", "d"], &[("a", "b"), ("b", "c"), ("c", "d")]);
    let test = uedge_world(
        &["u1", "u2", "u3", "u4", "u5"],
        &[("u1", "u2"), ("u3", "u1"), ("u4", "u5"), ("u2", "u4")],
    );
    finish(
        TaskName::UndirectedEdge,
        train,
        test,
        2,
        "uedge(X,Y) :- edge(X,Y)\nuedge(X,Y) :- edge(Y,X)\n",
    )
}

fn adjacent_world(nodes: &[(&str, &str)], edges: &[(&str, &str)]) -> World {
    let mut w = World::new(
        &[("edge", 2), ("colour", 2), ("red", 1), ("green", 1)],
        ("target", 1),
    );
    for (n, c) in nodes {
        w.constant(n);
        w.fact("colour", &[n, c]);
    }
    w.fact("red", &["red"]);
    w.fact("green", &["green"]);
    for (a, b) in edges {
        w.fact("edge", &[a, b]);
    }
    for (n, _) in nodes {
        if edges
            .iter()
            .any(|(a, b)| a == n && nodes.iter().any(|(m, c)| m == b && *c == "red"))
        {
            w.pos("target", &[n]);
        }
    }
    w
}

pub fn adjacent_to_red() -> IlpTask {
    let train = adjacent_world(
        &[("a", "red"), ("b", "green"), ("c", "red"), ("d", "green"), ("e", "green")],
        &[("a", "b"), ("b", "c"), ("c", "d"), ("d", "a"), ("e", "d")],
    );
    let test = adjacent_world(
        &[("n1", "green"), ("n2", "red"), ("n3", "green"), ("n4", "green"), ("n5", "red"), ("n6", "green")],
        &[("n1", "n2"), ("n3", "n2"), ("n4", "n1"), ("n5", "n5"), ("n6", "n5"), ("n2", "n3")],
    );
    finish(
        TaskName::AdjacentToRed,
        train,
        test,
        3,
        "target(X) :- edge(X,V3), colour(V3,V4), red(V4)\n",
    )
}

fn two_children_world(nodes: &[&str], edges: &[(&str, &str)]) -> World {
    let mut w = World::new(&[("edge", 2), ("neq", 2)], ("target", 1));
    for n in nodes {
        w.constant(n);
    }
    for a in nodes {
        for b in nodes {
            if a != b {
                w.fact("neq", &[a, b]);
            }
        }
    }
    for (a, b) in edges {
        w.fact("edge", &[a, b]);
    }
    for n in nodes {
        if edges.iter().filter(|(a, _)| a == n).count() >= 2 {
            w.pos("target", &[n]);
        }
    }
    w
}

pub fn two_children() -> IlpTask {
    let train = two_children_world(
        &["a", "b", "c", "d", "e"],
        &[("a", "b"), ("a", "c"), ("b", "d"), ("c", "d"), ("c", "e"), ("d", "a")],
    );
    let test = two_children_world(
        &["q1", "q2", "q3", "q4", "q5", "q6"],
        &[("q1", "q2"), ("q2", "q3"), ("q2", "q4"), ("q4", "q5"), ("q5", "q6"), ("q5", "q1"), ("q6", "q3")],
    );
    finish(
        TaskName::TwoChildren,
        train,
        test,
        3,
        "target(X) :- edge(X,Y), edge(X,V3), neq(Y,V3)\n",
    )
}

fn coloring_world(nodes: &[(&str, &str)], edges: &[(&str, &str)]) -> World {
    let mut w = World::new(&[("edge", 2), ("colour", 2)], ("target", 1));
    for (n, c) in nodes {
        w.fact("colour", &[n, c]);
    }
    for (a, b) in edges {
        w.fact("edge", &[a, b]);
    }
    let colour = |x: &str| nodes.iter().find(|(n, _)| *n == x).map(|(_, c)| *c);
    for (n, c) in nodes {
        if edges.iter().any(|(a, b)| a == n && colour(b) == Some(c)) {
            w.pos("target", &[n]);
        }
    }
    w
}

pub fn graph_coloring() -> IlpTask {
    let train = coloring_world(
        &[("a", "red"), ("b", "green"), ("c", "green"), ("d", "red"), ("e", "red"), ("f", "green")],
        &[("a", "b"), ("b", "c"), ("c", "d"), ("d", "e"), ("e", "f"), ("f", "a")],
    );
    let test = coloring_world(
        &[("g1", "green"), ("g2", "red"), ("g3", "red"), ("g4", "green"), ("g5", "green"), ("g6", "red"), ("g7", "green")],
        &[("g1", "g2"), ("g2", "g3"), ("g3", "g4"), ("g4", "g5"), ("g5", "g6"), ("g6", "g7"), ("g7", "g1"), ("g4", "g3")],
    );
    finish(
        TaskName::GraphColoring,
        train,
        test,
        3,
        "target(X) :- edge(X,Y), colour(X,V3), colour(Y,V3)\n",
    )
}

fn closure(nodes: &[&str], edges: &[(&str, &str)]) -> Vec<(usize, usize)> {
    let n = nodes.len();
    let pos = |x: &str| nodes.iter().position(|m| *m == x).expect("known node");
    let mut reach = vec![vec![false; n]; n];
    for (a, b) in edges {
        reach[pos(a)][pos(b)] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    let mut out = Vec::new();
    for (i, row) in reach.iter().enumerate() {
        for (j, &r) in row.iter().enumerate() {
            if r {
                out.push((i, j));
            }
        }
    }
    out
}

fn connected_world(nodes: &[&str], edges: &[(&str, &str)]) -> World {
    let mut w = World::new(&[("edge", 2)], ("connected", 2));
    for n in nodes {
        w.constant(n);
    }
    for (a, b) in edges {
        w.fact("edge", &[a, b]);
    }
    for (i, j) in closure(nodes, edges) {
        w.pos("connected", &[nodes[i], nodes[j]]);
    }
    w
}

pub fn connectedness() -> IlpTask {
    let train = connected_world(&["a", "b", "c", "d"], &[("a", "b"), ("b", "c"), ("c", "d")]);
    let test = connected_world(
        &["v1", "v2", "v3", "v4", "v5", "v6"],
        &[("v1", "v2"), ("v2", "v3"), ("v3", "v1"), ("v4", "v5"), ("v5", "v6")],
    );
    finish(
        TaskName::Connectedness,
        train,
        test,
        3,
        "connected(X,Y) :- edge(X,Y)\nconnected(X,Y) :- edge(X,V3), connected(V3,Y)\n",
    )
}

fn cyclic_world(nodes: &[&str], edges: &[(&str, &str)]) -> World {
    let mut w = World::new(&[("edge", 2), ("connected", 2)], ("cyclic", 1));
    for n in nodes {
        w.constant(n);
    }
    for (a, b) in edges {
        w.fact("edge", &[a, b]);
    }
    for (i, j) in closure(nodes, edges) {
        w.fact("connected", &[nodes[i], nodes[j]]);
        if i == j {
            w.pos("cyclic", &[nodes[i]]);
        }
    }
    w
}

pub fn cyclic() -> IlpTask {
    let train = cyclic_world(
        &["a", "b", "c", "d", "e", "f"],
        &[("a", "b"), ("b", "c"), ("c", "a"), ("d", "e"), ("e", "f"), ("d", "a")],
    );
    let test = cyclic_world(
        &["y1", "y2", "y3", "y4", "y5", "y6", "y7"],
        &[("y1", "y2"), ("y2", "y1"), ("y3", "y4"), ("y4", "y5"), ("y5", "y6"), ("y6", "y4"), ("y7", "y3")],
    );
    finish(TaskName::Cyclic, train, test, 2, "cyclic(X) :- edge(X,Y), connected(Y,X)\n")
}

/// Generates the classical task `name`; `size` overrides the constant count
/// of the arithmetic tasks.
pub fn generate(name: TaskName, size: Option<usize>) -> Result<IlpTask> {
    use TaskName::*;
    let n = |default: usize| size.unwrap_or(default);
    Ok(match name {
        Predecessor => predecessor(n(10)),
        Even => even(n(10)),
        Odd => odd(n(10)),
        Lessthan => lessthan(n(10)),
        Fizz => fizz(n(7)),
        Buzz => buzz(n(10)),
        Member => member(),
        Length => length(),
        Son => son(),
        Grandparent => grandparent(),
        Relatedness => relatedness(),
        Father => father(),
        UndirectedEdge => undirected_edge(),
        AdjacentToRed => adjacent_to_red(),
        TwoChildren => two_children(),
        GraphColoring => graph_coloring(),
        Connectedness => connectedness(),
        Cyclic => cyclic(),
        Husband => super::kinship::husband()?,
        Uncle => super::kinship::uncle()?,
        other => return Err(crate::Error::UnknownTask(format!("{other} is not a relational task"))),
    })
}
