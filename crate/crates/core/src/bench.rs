//! Synthetic distribution-shift benchmark.
//!
//! Instances come from four Gaussian concepts: `P` (causal), `N1` (noisy)
//! and `N2`, `N3` (negative background). A positive bag holds
//! `positive_causal_count` draws from `P` plus background from exactly one
//! of `N1`/`N2`; a negative bag is filled from exactly one of `N1`/`N2`/`N3`.
//! The background concept is recorded as the bag tag.
//!
//! The biased split sends a bag to the training set with probability
//!
//! | bag                       | P(train) |
//! |---------------------------|----------|
//! | positive, `N1` background | a        |
//! | positive, `N2` background | 1 - a    |
//! | negative, `N1`            | 1 - a    |
//! | negative, `N2` or `N3`    | a        |
//!
//! so for `a > 0.5` the noisy concept co-occurs with positives in training
//! and with negatives in test.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mil::{Bag, Instance, InstanceRole, MilDataset};
use crate::seeds;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Concept {
    P,
    N1,
    N2,
    N3,
}

impl Concept {
    pub const ALL: [Concept; 4] = [Concept::P, Concept::N1, Concept::N2, Concept::N3];

    pub fn role(self) -> InstanceRole {
        match self {
            Concept::P => InstanceRole::Causal,
            Concept::N1 => InstanceRole::Noisy,
            Concept::N2 | Concept::N3 => InstanceRole::Negative,
        }
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Concept::P => "P",
            Concept::N1 => "N1",
            Concept::N2 => "N2",
            Concept::N3 => "N3",
        })
    }
}

impl FromStr for Concept {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "P" => Ok(Concept::P),
            "N1" => Ok(Concept::N1),
            "N2" => Ok(Concept::N2),
            "N3" => Ok(Concept::N3),
            other => Err(Error::InvalidData(format!("unknown concept tag `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptSpec {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl ConceptSpec {
    fn axis(dim: usize, axis: usize, offset: f64, variance: f64) -> Self {
        let mut mean = vec![0.0; dim];
        mean[axis] = offset;
        Self { mean, variance: vec![variance; dim] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Concepts {
    pub p: ConceptSpec,
    pub n1: ConceptSpec,
    pub n2: ConceptSpec,
    pub n3: ConceptSpec,
}

impl Concepts {
    pub fn get(&self, c: Concept) -> &ConceptSpec {
        match c {
            Concept::P => &self.p,
            Concept::N1 => &self.n1,
            Concept::N2 => &self.n2,
            Concept::N3 => &self.n3,
        }
    }
}

/// Full parameterization of the synthetic population and biased split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftConfig {
    pub dim: usize,
    pub bags_total: usize,
    pub instances_per_bag: usize,
    pub positive_fraction: f64,
    pub positive_causal_count: usize,
    /// Probabilities of an `N1` / `N2` background for positive bags.
    pub positive_background: [f64; 2],
    /// Probabilities of `N1` / `N2` / `N3` filling for negative bags.
    pub negative_background: [f64; 3],
    pub a_range: [f64; 2],
    pub seed: u64,
    pub concepts: Concepts,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self::setting1()
    }
}

impl ShiftConfig {
    /// Means at distance `offset` along the first two axes, shared variance.
    pub fn axis_aligned(dim: usize, offset: f64, variance: f64) -> Self {
        Self {
            dim,
            bags_total: 400,
            instances_per_bag: 20,
            positive_fraction: 0.5,
            positive_causal_count: 1,
            positive_background: [0.5, 0.5],
            negative_background: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            a_range: [0.65, 0.95],
            seed: 0,
            concepts: Concepts {
                p: ConceptSpec::axis(dim, 0, offset, variance),
                n1: ConceptSpec::axis(dim, 1, offset, variance),
                n2: ConceptSpec::axis(dim, 0, -offset, variance),
                n3: ConceptSpec::axis(dim, 1, -offset, variance),
            },
        }
    }

    /// Pinned "setting 1": d = 10, means at +-3 on the first two axes, unit variance.
    pub fn setting1() -> Self {
        Self::axis_aligned(10, 3.0, 1.0)
    }

    /// Pinned "setting 2": means at distance 2, variance 1.5.
    pub fn setting2() -> Self {
        Self::axis_aligned(10, 2.0, 1.5)
    }

    pub fn setting(n: u32) -> Result<Self> {
        match n {
            1 => Ok(Self::setting1()),
            2 => Ok(Self::setting2()),
            other => Err(Error::InvalidConfig(format!("unknown setting {other}, expected 1 or 2"))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        for c in Concept::ALL {
            let spec = self.concepts.get(c);
            if spec.mean.len() != self.dim || spec.variance.len() != self.dim {
                return bad(format!("concept {c} must have mean and variance of length {}", self.dim));
            }
            if spec.variance.iter().any(|v| !(*v > 0.0 && v.is_finite())) || spec.mean.iter().any(|m| !m.is_finite()) {
                return bad(format!("concept {c} needs finite mean and positive variance"));
            }
        }
        if self.bags_total < 2 || self.instances_per_bag == 0 {
            return bad("need at least 2 bags and 1 instance per bag".into());
        }
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return bad("positive_fraction must lie in (0, 1)".into());
        }
        if self.positive_causal_count == 0 || self.positive_causal_count > self.instances_per_bag {
            return bad("positive_causal_count must lie in 1..=instances_per_bag".into());
        }
        let is_dist = |p: &[f64]| p.iter().all(|v| *v >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        if !is_dist(&self.positive_background) || !is_dist(&self.negative_background) {
            return bad("background probabilities must be nonnegative and sum to 1".into());
        }
        let [lo, hi] = self.a_range;
        if !(0.5 <= lo && lo <= hi && hi <= 1.0) {
            return bad(format!("a_range [{lo}, {hi}] must satisfy 0.5 <= lo <= hi <= 1"));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        seeds::sha256_hex(crate::fmt::to_canonical_json(self).expect("config serializes").as_bytes())[..16].to_string()
    }
}

fn pick(rng: &mut seeds::Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

fn draw(rng: &mut seeds::Rng, spec: &ConceptSpec, concept: Concept) -> Instance {
    let features = spec
        .mean
        .iter()
        .zip(&spec.variance)
        .map(|(m, v)| {
            let z: f64 = StandardNormal.sample(rng);
            m + v.sqrt() * z
        })
        .collect();
    Instance::with_truth(features, concept.role())
}

/// Samples the full labeled population; every instance carries its truth and
/// every bag its background tag.
pub fn generate_population(config: &ShiftConfig) -> Result<MilDataset> {
    config.validate()?;
    let mut rng = seeds::rng(config.seed);
    let n = config.instances_per_bag;
    let positives = ((config.bags_total as f64 * config.positive_fraction).round() as usize).clamp(1, config.bags_total - 1);
    let width = config.bags_total.to_string().len().max(5);
    let mut bags = Vec::with_capacity(config.bags_total);
    for i in 0..config.bags_total {
        let (label, background, causal) = if i < positives {
            let bg = [Concept::N1, Concept::N2][pick(&mut rng, &config.positive_background)];
            (1, bg, config.positive_causal_count)
        } else {
            let bg = [Concept::N1, Concept::N2, Concept::N3][pick(&mut rng, &config.negative_background)];
            (0, bg, 0)
        };
        let mut instances: Vec<Instance> = (0..causal).map(|_| draw(&mut rng, &config.concepts.p, Concept::P)).collect();
        instances.extend((causal..n).map(|_| draw(&mut rng, config.concepts.get(background), background)));
        instances.shuffle(&mut rng);
        bags.push(Bag::new(format!("b{i:0width$}"), instances, label)?.with_tag(background.to_string()));
    }
    let meta = BTreeMap::from([
        ("config_hash".to_string(), config.hash()),
        ("generator".to_string(), "shift-bench".to_string()),
        ("seed".to_string(), config.seed.to_string()),
    ]);
    MilDataset::with_meta(bags, meta)
}

/// Probability that a bag with this label and background enters training.
pub fn selection_probability(label: u8, background: Concept, a: f64) -> f64 {
    match (label, background) {
        (1, Concept::N1) => a,
        (1, _) => 1.0 - a,
        (_, Concept::N1) => 1.0 - a,
        _ => a,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftSplit {
    pub train: MilDataset,
    pub test: MilDataset,
    pub a_used: f64,
}

impl ShiftSplit {
    /// Instance roles per bag id, train bags first.
    pub fn truth_index(&self) -> Vec<(String, Vec<InstanceRole>)> {
        self.train
            .bags()
            .iter()
            .chain(self.test.bags())
            .map(|b| (b.id().to_string(), b.instances().iter().map(|i| i.truth).collect()))
            .collect()
    }
}

/// Independent seeded coin flip per bag following the selection rules.
pub fn biased_split(population: &MilDataset, a: f64, seed: u64) -> Result<ShiftSplit> {
    if !(0.5..=1.0).contains(&a) {
        return Err(Error::InvalidConfig(format!("split ratio a = {a} outside [0.5, 1]")));
    }
    let mut rng = seeds::rng(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for bag in population.bags() {
        let tag = bag.tag().ok_or_else(|| Error::MissingBackgroundTag(bag.id().to_string()))?;
        let background: Concept = tag.parse()?;
        let u: f64 = rng.random();
        if u < selection_probability(bag.label(), background, a) {
            train.push(bag.clone());
        } else {
            test.push(bag.clone());
        }
    }
    let mut meta = population.meta().clone();
    meta.insert("split_a".into(), crate::fmt::fmt_f64(a));
    meta.insert("split_seed".into(), seed.to_string());
    let mut train_meta = meta.clone();
    train_meta.insert("part".into(), "train".into());
    meta.insert("part".into(), "test".into());
    Ok(ShiftSplit { train: MilDataset::with_meta(train, train_meta)?, test: MilDataset::with_meta(test, meta)?, a_used: a })
}

/// Uniform draw from `[lo, hi]`.
pub fn draw_a(range: [f64; 2], seed: u64) -> f64 {
    let [lo, hi] = range;
    if lo == hi {
        return lo;
    }
    let u: f64 = seeds::rng(seed).random();
    lo + (hi - lo) * u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mil::oracle_label;

    fn small() -> ShiftConfig {
        ShiftConfig { bags_total: 60, seed: 4, ..ShiftConfig::setting1() }
    }

    #[test]
    fn labels_follow_oracle_and_composition() {
        let pop = generate_population(&small()).unwrap();
        for bag in pop.bags() {
            assert_eq!(oracle_label(bag).unwrap(), bag.label());
            assert_eq!(bag.len(), 20);
            let causal = bag.instances().iter().filter(|i| i.truth == InstanceRole::Causal).count();
            assert_eq!(causal, if bag.label() == 1 { 1 } else { 0 });
        }
        assert_eq!(pop.num_positive(), 30);
    }

    #[test]
    fn extreme_split_is_deterministic() {
        let pop = generate_population(&small()).unwrap();
        let split = biased_split(&pop, 1.0, 9).unwrap();
        for b in split.train.bags() {
            let bg: Concept = b.tag().unwrap().parse().unwrap();
            assert!(!(b.label() == 1 && bg == Concept::N2));
            assert!(!(b.label() == 0 && bg == Concept::N1));
        }
        for b in split.test.bags() {
            let bg: Concept = b.tag().unwrap().parse().unwrap();
            assert!(!(b.label() == 1 && bg == Concept::N1));
            assert!(!(b.label() == 0 && bg != Concept::N1));
        }
        assert_eq!(split, biased_split(&pop, 1.0, 9).unwrap());
        assert_eq!(split.train.len() + split.test.len(), pop.len());
    }

    #[test]
    fn split_requires_tags() {
        let bag = Bag::new("x", vec![Instance::with_truth(vec![0.0], InstanceRole::Negative)], 0).unwrap();
        let ds = MilDataset::new(vec![bag]).unwrap();
        assert!(matches!(biased_split(&ds, 0.8, 0), Err(Error::MissingBackgroundTag(_))));
        assert!(biased_split(&ds, 0.2, 0).is_err());
    }

    #[test]
    fn draw_a_range() {
        assert_eq!(draw_a([0.8, 0.8], 5), 0.8);
        for s in 0..200 {
            let a = draw_a([0.65, 0.95], s);
            assert!((0.65..=0.95).contains(&a));
        }
    }

    #[test]
    fn config_validation_and_toml() {
        let mut cfg = ShiftConfig::setting2();
        let back = ShiftConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        cfg.a_range = [0.4, 0.9];
        assert!(cfg.validate().is_err());
        let mut cfg = ShiftConfig::setting1();
        cfg.negative_background = [0.5, 0.5, 0.5];
        assert!(cfg.validate().is_err());
        assert!(ShiftConfig::setting(3).is_err());
    }
}
