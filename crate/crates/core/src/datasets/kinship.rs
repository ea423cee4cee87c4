//! Large family-tree worlds for the husband and uncle tasks.
//!
//! Both tasks share one training population of 2102 people and a smaller,
//! disjoint test population. The populations are shipped as fact files under
//! `data/`; [`generate_world`] is the generator that produced them.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ilp::IlpTask;
use super::TaskName;
use crate::error::Result;
use crate::logic::{FactBase, GroundAtom, PredicateKind};

pub const RELATIONS: [&str; 12] = [
    "husband", "wife", "father", "mother", "son", "daughter", "brother", "sister", "uncle", "aunt", "nephew", "niece",
];

pub const TRAIN_PEOPLE: usize = 2102;
pub const TEST_PEOPLE: usize = 400;
pub const TRAIN_SEED: u64 = 1;
pub const TEST_SEED: u64 = 2;

const TRAIN_FILE: &str = include_str!("../../data/kinship_train.facts");
const TEST_FILE: &str = include_str!("../../data/kinship_test.facts");

#[derive(Clone, Debug)]
struct Person {
    male: bool,
    father: Option<usize>,
    mother: Option<usize>,
    spouse: Option<usize>,
}

/// Generates a population of exactly `size` people and returns all twelve
/// kinship relations as background facts.
pub fn generate_world(size: usize, seed: u64, prefix: &str) -> FactBase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut people: Vec<Person> = Vec::with_capacity(size);
    let mut couples: Vec<(usize, usize)> = Vec::new();

    let founders = (size / 30).max(1);
    for _ in 0..founders {
        if people.len() + 2 > size {
            break;
        }
        let h = people.len();
        people.push(Person { male: true, father: None, mother: None, spouse: Some(h + 1) });
        people.push(Person { male: false, father: None, mother: None, spouse: Some(h) });
        couples.push((h, h + 1));
    }

    let mut generation = couples.clone();
    while people.len() < size && !generation.is_empty() {
        let mut children = Vec::new();
        for &(h, w) in &generation {
            let n = rng.gen_range(1..=4);
            for _ in 0..n {
                if people.len() >= size {
                    break;
                }
                children.push(people.len());
                people.push(Person {
                    male: rng.gen_bool(0.5),
                    father: Some(h),
                    mother: Some(w),
                    spouse: None,
                });
            }
        }
        children.shuffle(&mut rng);
        let mut next = Vec::new();
        let (men, women): (Vec<usize>, Vec<usize>) = children.iter().partition(|&&c| people[c].male);
        let mut women: Vec<usize> = women;
        for m in men {
            if people.len() >= size {
                break;
            }
            let partner = women
                .iter()
                .position(|&w| people[w].mother != people[m].mother)
                .filter(|_| rng.gen_bool(0.5))
                .map(|i| women.swap_remove(i));
            let w = match partner {
                Some(w) => w,
                None if rng.gen_bool(0.8) => {
                    people.push(Person { male: false, father: None, mother: None, spouse: None });
                    people.len() - 1
                }
                None => continue,
            };
            people[m].spouse = Some(w);
            people[w].spouse = Some(m);
            next.push((m, w));
        }
        for w in women {
            if people.len() >= size || !rng.gen_bool(0.8) {
                continue;
            }
            people.push(Person { male: true, father: None, mother: None, spouse: Some(w) });
            let h = people.len() - 1;
            people[w].spouse = Some(h);
            next.push((h, w));
        }
        couples.extend(&next);
        generation = next;
    }
    // Top up with unattached individuals if the tree died out early.
    while people.len() < size {
        people.push(Person { male: rng.gen_bool(0.5), father: None, mother: None, spouse: None });
    }

    let mut fb = FactBase::new();
    for r in RELATIONS {
        fb.preds.declare(r, 2, PredicateKind::Known).expect("binary relation");
    }
    let names: Vec<String> = (0..people.len()).map(|i| format!("{prefix}{i:04}")).collect();
    for n in &names {
        fb.constants.intern(n);
    }
    let mut add = |rel: &str, a: usize, b: usize| {
        fb.add_background(rel, &[&names[a], &names[b]]).expect("valid fact");
    };
    for &(h, w) in &couples {
        add("husband", h, w);
        add("wife", w, h);
    }
    let siblings = |i: usize| -> Vec<usize> {
        match people[i].mother {
            None => Vec::new(),
            Some(m) => (0..people.len())
                .filter(|&j| j != i && people[j].mother == Some(m))
                .collect(),
        }
    };
    let sibling_lists: Vec<Vec<usize>> = (0..people.len()).map(siblings).collect();
    for (c, p) in people.iter().enumerate() {
        for parent in [p.father, p.mother].into_iter().flatten() {
            if people[parent].male {
                add("father", parent, c);
            } else {
                add("mother", parent, c);
            }
            add(if p.male { "son" } else { "daughter" }, c, parent);
            for &s in &sibling_lists[parent] {
                add(if people[s].male { "uncle" } else { "aunt" }, s, c);
                add(if p.male { "nephew" } else { "niece" }, c, s);
            }
        }
        for &s in &sibling_lists[c] {
            add(if p.male { "brother" } else { "sister" }, c, s);
        }
    }
    fb
}

pub fn bundled_train() -> Result<FactBase> {
    FactBase::parse(TRAIN_FILE)
}

pub fn bundled_test() -> Result<FactBase> {
    FactBase::parse(TEST_FILE)
}

/// Moves the atoms of `target` from the background into the positives.
fn split_target(mut fb: FactBase, target: &str) -> Result<(FactBase, BTreeSet<GroundAtom>)> {
    let id = fb.preds.declare(target, 2, PredicateKind::Target)?;
    let (pos, rest): (BTreeSet<GroundAtom>, BTreeSet<GroundAtom>) =
        fb.background.iter().partition(|a| a.pred == id);
    fb.background = rest;
    Ok((fb, pos))
}

fn task(name: TaskName, target: &str, variables: usize, gold: &str) -> Result<IlpTask> {
    let (mut train, pos) = split_target(bundled_train()?, target)?;
    train.positives = pos;
    let (test, test_positives) = split_target(bundled_test()?, target)?;
    let target = train.preds.id(target).expect("declared");
    Ok(IlpTask {
        name,
        train,
        test,
        test_positives,
        target,
        variables,
        gold: gold.to_string(),
    })
}

pub fn husband() -> Result<IlpTask> {
    task(TaskName::Husband, "husband", 2, "husband(X,Y) :- wife(Y,X)\n")
}

pub fn uncle() -> Result<IlpTask> {
    task(
        TaskName::Uncle,
        "uncle",
        3,
        "uncle(X,Y) :- brother(X,V3), father(V3,Y)\nuncle(X,Y) :- brother(X,V3), mother(V3,Y)\n",
    )
}
