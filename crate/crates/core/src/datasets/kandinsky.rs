//! Synthetic Kandinsky-style instances: small scenes of coloured shapes
//! labelled by a concept over the objects.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Circle,
    Square,
    Triangle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Red,
    Blue,
    Yellow,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Circle, Shape::Square, Shape::Triangle];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Circle => "circle",
            Shape::Square => "square",
            Shape::Triangle => "triangle",
        }
    }
}

impl Color {
    pub const ALL: [Color; 3] = [Color::Red, Color::Blue, Color::Yellow];

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Blue => "blue",
            Color::Yellow => "yellow",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub shape: Shape,
    pub color: Color,
    pub jitter: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KandinskyInstance {
    pub label: bool,
    pub objects: Vec<ObjectRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KandinskyPattern {
    TwoPair,
    OneRed,
    OneTriangle,
}

#[derive(Clone, Debug)]
pub struct KandinskySet {
    pub pattern: KandinskyPattern,
    pub train: Vec<KandinskyInstance>,
    pub test: Vec<KandinskyInstance>,
}

pub const JITTER: f64 = 0.05;

/// Reference label oracle, evaluated directly on object records.
pub fn check_pattern(pattern: KandinskyPattern, objects: &[ObjectRecord]) -> bool {
    match pattern {
        KandinskyPattern::OneRed => objects.iter().any(|o| o.color == Color::Red),
        KandinskyPattern::OneTriangle => objects.iter().any(|o| o.shape == Shape::Triangle),
        KandinskyPattern::TwoPair => {
            let n = objects.len();
            let same = |a: usize, b: usize| objects[a].shape == objects[b].shape && objects[a].color == objects[b].color;
            let mixed = |a: usize, b: usize| objects[a].shape == objects[b].shape && objects[a].color != objects[b].color;
            for a in 0..n {
                for b in a + 1..n {
                    if !same(a, b) {
                        continue;
                    }
                    for c in 0..n {
                        for d in c + 1..n {
                            if c != a && c != b && d != a && d != b && mixed(c, d) {
                                return true;
                            }
                        }
                    }
                }
            }
            false
        }
    }
}

fn jitter(rng: &mut ChaCha8Rng) -> [f64; 2] {
    [rng.gen_range(-JITTER..=JITTER), rng.gen_range(-JITTER..=JITTER)]
}

fn object(rng: &mut ChaCha8Rng, shape: Shape, color: Color) -> ObjectRecord {
    ObjectRecord {
        shape,
        color,
        jitter: jitter(rng),
    }
}

fn random_object(rng: &mut ChaCha8Rng) -> ObjectRecord {
    let s = *Shape::ALL.choose(rng).expect("nonempty");
    let c = *Color::ALL.choose(rng).expect("nonempty");
    object(rng, s, c)
}

fn other_color(rng: &mut ChaCha8Rng, c: Color) -> Color {
    *Color::ALL
        .iter()
        .filter(|&&x| x != c)
        .collect::<Vec<_>>()
        .choose(rng)
        .copied()
        .expect("two other colours")
}

fn unary_instance(rng: &mut ChaCha8Rng, pattern: KandinskyPattern, label: bool) -> Vec<ObjectRecord> {
    let n = rng.gen_range(2..=6);
    let has = |o: &ObjectRecord| check_pattern(pattern, std::slice::from_ref(o));
    let mut objs: Vec<ObjectRecord> = (0..n)
        .map(|_| loop {
            let o = random_object(rng);
            if label || !has(&o) {
                break o;
            }
        })
        .collect();
    if label && !objs.iter().any(has) {
        let k = rng.gen_range(0..n);
        objs[k] = loop {
            let o = random_object(rng);
            if has(&o) {
                break o;
            }
        };
    }
    objs
}

/// Positives: one same-shape same-colour pair and one same-shape
/// different-colour pair. Negatives are near misses: two same-shape pairs
/// that either both share colour or both differ, rejected if they happen to
/// satisfy the pattern.
fn two_pair_instance(rng: &mut ChaCha8Rng, label: bool) -> Vec<ObjectRecord> {
    loop {
        let sa = *Shape::ALL.choose(rng).expect("nonempty");
        let sb = *Shape::ALL.choose(rng).expect("nonempty");
        let ca = *Color::ALL.choose(rng).expect("nonempty");
        let cb = *Color::ALL.choose(rng).expect("nonempty");
        let mut objs = if label {
            let cb2 = other_color(rng, cb);
            vec![object(rng, sa, ca), object(rng, sa, ca), object(rng, sb, cb), object(rng, sb, cb2)]
        } else if rng.gen_bool(0.5) {
            vec![object(rng, sa, ca), object(rng, sa, ca), object(rng, sb, cb), object(rng, sb, cb)]
        } else {
            let ca2 = other_color(rng, ca);
            let cb2 = other_color(rng, cb);
            vec![object(rng, sa, ca), object(rng, sa, ca2), object(rng, sb, cb), object(rng, sb, cb2)]
        };
        objs.shuffle(rng);
        if check_pattern(KandinskyPattern::TwoPair, &objs) == label {
            return objs;
        }
    }
}

fn instances(rng: &mut ChaCha8Rng, pattern: KandinskyPattern, n: usize) -> Vec<KandinskyInstance> {
    (0..n)
        .map(|i| {
            let label = i % 2 == 0;
            let objects = match pattern {
                KandinskyPattern::TwoPair => two_pair_instance(rng, label),
                _ => unary_instance(rng, pattern, label),
            };
            KandinskyInstance { label, objects }
        })
        .collect()
}

/// Balanced train/test sets (labels alternate, positives first).
pub fn gen_kandinsky(pattern: KandinskyPattern, n_train: usize, n_test: usize, seed: u64) -> KandinskySet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = instances(&mut rng, pattern, n_train);
    let test = instances(&mut rng, pattern, n_test);
    KandinskySet { pattern, train, test }
}

pub fn to_jsonl(instances: &[KandinskyInstance]) -> String {
    let mut s = String::new();
    for inst in instances {
        s.push_str(&serde_json::to_string(inst).expect("plain data serializes"));
        s.push('\n');
    }
    s
}

pub fn from_jsonl(text: &str) -> Result<Vec<KandinskyInstance>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let inst: KandinskyInstance =
            serde_json::from_str(line).map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
        if !(2..=6).contains(&inst.objects.len()) {
            return Err(Error::Format(format!("line {}: {} objects", i + 1, inst.objects.len())));
        }
        out.push(inst);
    }
    Ok(out)
}

/// Toy stand-in for an image encoder: one-hot shape, one-hot colour and the
/// jitter, scaled, plus Gaussian noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub dim: usize,
    pub noise_scale: f64,
    pub scale: f64,
}

impl Default for FeatureEncoder {
    fn default() -> Self {
        FeatureEncoder {
            dim: 8,
            noise_scale: 0.0,
            scale: 1.0,
        }
    }
}

impl FeatureEncoder {
    pub fn new(noise_scale: f64) -> Self {
        FeatureEncoder {
            noise_scale,
            ..Default::default()
        }
    }

    /// Extra dimensions beyond the eight features are zero before noise.
    pub fn encode(&self, obj: &ObjectRecord, seed: u64) -> Vec<f64> {
        let mut v = vec![0.0; self.dim.max(8)];
        v[obj.shape as usize] = self.scale;
        v[3 + obj.color as usize] = self.scale;
        v[6] = obj.jitter[0] * self.scale;
        v[7] = obj.jitter[1] * self.scale;
        if self.noise_scale > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise = Normal::new(0.0, self.noise_scale).expect("finite scale");
            for x in &mut v {
                *x += noise.sample(&mut rng);
            }
        }
        v
    }

    /// Encodes every object of every instance; object `k` of instance `i`
    /// uses seed `seed ^ (i << 8 | k)` mixed through a splitmix step.
    pub fn encode_all(&self, instances: &[KandinskyInstance], seed: u64) -> Vec<Vec<Vec<f64>>> {
        instances
            .iter()
            .enumerate()
            .map(|(i, inst)| {
                inst.objects
                    .iter()
                    .enumerate()
                    .map(|(k, o)| self.encode(o, mix(seed, ((i as u64) << 8) | k as u64)))
                    .collect()
            })
            .collect()
    }
}

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
