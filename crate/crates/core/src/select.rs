//! Stable-instance selection.
//!
//! A candidate instance `x` is scored by appending it to every negative
//! training bag ("treating" the bag) and averaging the base classifier's
//! hard predictions on the treated bags. Candidates are all instances of
//! positive bags; those scoring at least `tau` form the stable pool. The
//! threshold is the third quartile of null scores obtained by treating one
//! half of the negative bags with the instances of the other half.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{predict_bag, BagClassifier, MifvClassifier};
use crate::error::{Error, Result};
use crate::mil::{oracle_label_of, Bag, Instance, InstanceRole, MilDataset};
use crate::seeds;

/// Fraction of candidates kept when no candidate reaches the threshold.
pub const FALLBACK_FRACTION: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct TreatedBag {
    pub base_id: String,
    pub candidate: Instance,
    pub bag: Bag,
}

/// Id given to the treated version of bag `base_id`.
pub fn treated_id(base_id: &str) -> String {
    format!("{base_id}+x")
}

/// Appends `x` to a copy of the negative bag `neg`.
pub fn construct_treated_bag(x: &Instance, neg: &Bag) -> Result<TreatedBag> {
    if neg.label() != 0 {
        return Err(Error::NotNegativeBag(neg.id().to_string()));
    }
    let bag = neg.appended(treated_id(neg.id()), x.clone())?;
    Ok(TreatedBag { base_id: neg.id().to_string(), candidate: x.clone(), bag })
}

/// Predicts treated negative bags for many candidates.
///
/// For the Fisher-vector classifier the per-instance statistics of every
/// negative bag are summed once; a treated bag's statistics are that sum
/// plus the candidate's own, accumulated in the same order `predict_bag`
/// would use, so predictions are bit-identical to the direct route.
pub(crate) struct TreatmentScorer<'a> {
    classifier: &'a BagClassifier,
    negatives: Vec<&'a Bag>,
    sums: Vec<Vec<f64>>,
}

impl<'a> TreatmentScorer<'a> {
    pub(crate) fn new(classifier: &'a BagClassifier, negatives: Vec<&'a Bag>) -> Result<Self> {
        if negatives.is_empty() {
            return Err(Error::EmptyNegatives);
        }
        if let Some(b) = negatives.iter().find(|b| b.label() != 0) {
            return Err(Error::NotNegativeBag(b.id().to_string()));
        }
        let sums = match classifier {
            BagClassifier::Mifv(m) => {
                let enc = m.encoder();
                if let Some(b) = negatives.iter().find(|b| b.dim() != enc.dim()) {
                    return Err(Error::DimMismatch { expected: enc.dim(), found: b.dim() });
                }
                negatives
                    .par_iter()
                    .map_init(|| m.scratch(), |scratch, b| enc.bag_sum(b, scratch))
                    .collect()
            }
            _ => Vec::new(),
        };
        Ok(Self { classifier, negatives, sums })
    }

    pub(crate) fn len(&self) -> usize {
        self.negatives.len()
    }

    /// Number of treated bags predicted positive.
    pub(crate) fn positives(&self, x: &Instance) -> Result<usize> {
        let dim = self.negatives[0].dim();
        if x.dim() != dim {
            return Err(Error::DimMismatch { expected: dim, found: x.dim() });
        }
        match self.classifier {
            BagClassifier::Mifv(m) => Ok(self.mifv_positives(m, x)),
            _ => {
                let mut hits = 0;
                for neg in &self.negatives {
                    let treated = construct_treated_bag(x, neg)?;
                    hits += usize::from(predict_bag(self.classifier, &treated.bag)? == 1);
                }
                Ok(hits)
            }
        }
    }

    fn mifv_positives(&self, m: &MifvClassifier, x: &Instance) -> usize {
        let enc = m.encoder();
        let mut scratch = m.scratch();
        let mut own = vec![0.0; enc.encoding_dim()];
        enc.accumulate(&x.features, &mut own, &mut scratch);
        let mut sum = vec![0.0; own.len()];
        let mut buf = vec![0.0; own.len()];
        let mut hits = 0;
        for (neg, base) in self.negatives.iter().zip(&self.sums) {
            for ((s, b), o) in sum.iter_mut().zip(base).zip(&own) {
                *s = b + o;
            }
            hits += usize::from(m.predict_from_sum(&sum, neg.len() + 1, &mut buf) == 1);
        }
        hits
    }

    pub(crate) fn score(&self, x: &Instance) -> Result<f64> {
        Ok(self.positives(x)? as f64 / self.len() as f64)
    }
}

/// Average predicted label over the treated versions of `negatives`.
pub fn score_instance(x: &Instance, negatives: &[Bag], classifier: &BagClassifier) -> Result<f64> {
    TreatmentScorer::new(classifier, negatives.iter().collect())?.score(x)
}

/// Linear-interpolation quantile at zero-indexed position `(n - 1) * q`.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidData("quantile of an empty list".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= sorted.len() || frac == 0.0 {
        return Ok(sorted[lo]);
    }
    Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
}

pub fn third_quartile(values: &[f64]) -> Result<f64> {
    quantile(values, 0.75)
}

/// Seeded split of the negatives into a floor-half `A` and ceil-half `B`.
pub fn split_negatives(negatives: &[Bag], seed: u64) -> (Vec<&Bag>, Vec<&Bag>) {
    let mut order: Vec<usize> = (0..negatives.len()).collect();
    order.shuffle(&mut seeds::rng(seed));
    let half = negatives.len() / 2;
    let a = order[..half].iter().map(|&i| &negatives[i]).collect();
    let b = order[half..].iter().map(|&i| &negatives[i]).collect();
    (a, b)
}

/// Null scores: every instance of half `A` scored against the bags of half `B`.
pub fn null_scores(negatives: &[Bag], classifier: &BagClassifier, seed: u64) -> Result<Vec<f64>> {
    if negatives.len() < 2 {
        return Err(Error::TooFewNegatives(negatives.len()));
    }
    let (a, b) = split_negatives(negatives, seed);
    let scorer = TreatmentScorer::new(classifier, b)?;
    let instances: Vec<&Instance> = a.iter().flat_map(|bag| bag.instances()).collect();
    instances.par_iter().map(|x| scorer.score(x)).collect()
}

/// Third quartile of [`null_scores`].
pub fn select_threshold(negatives: &[Bag], classifier: &BagClassifier, seed: u64) -> Result<f64> {
    third_quartile(&null_scores(negatives, classifier, seed)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub instance: Instance,
    pub source_bag: String,
    /// Position of the instance inside its source bag.
    pub index: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StablePool {
    pub members: Vec<ScoredCandidate>,
    pub tau: f64,
    pub all_scores: Vec<ScoredCandidate>,
    /// Set when no candidate reached `tau` and the top-scored ones were kept instead.
    pub fallback: bool,
}

impl StablePool {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member_points(&self) -> Vec<&[f64]> {
        self.members.iter().map(|m| m.instance.features.as_slice()).collect()
    }

    pub fn to_json(&self) -> String {
        crate::fmt::to_canonical_json(self).expect("pool serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })
    }
}

/// How a candidate's score is compared with the threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// `s >= tau`
    #[default]
    AtLeast,
    /// `s > tau`
    Above,
}

impl ThresholdRule {
    pub fn admits(self, score: f64, tau: f64) -> bool {
        match self {
            ThresholdRule::AtLeast => score >= tau,
            ThresholdRule::Above => score > tau,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionOptions {
    pub rule: ThresholdRule,
    /// Score each candidate against a seeded subsample of this many negatives.
    pub subsample_negatives: Option<usize>,
    pub subsample_seed: u64,
}

/// Positive-bag instances in bag order, exact duplicates removed (first copy kept).
pub fn candidate_pool(train: &MilDataset) -> Vec<(Instance, String, usize)> {
    let mut seen: HashMap<Vec<u64>, ()> = HashMap::new();
    let mut out = Vec::new();
    for bag in train.positives() {
        for (idx, inst) in bag.instances().iter().enumerate() {
            let key: Vec<u64> = inst.features.iter().map(|v| v.to_bits()).collect();
            if seen.insert(key, ()).is_none() {
                out.push((inst.clone(), bag.id().to_string(), idx));
            }
        }
    }
    out
}

pub fn learn_stable_instances(train: &MilDataset, classifier: &BagClassifier, tau: f64) -> Result<StablePool> {
    learn_stable_instances_with(train, classifier, tau, &SelectionOptions::default())
}

pub fn learn_stable_instances_with(
    train: &MilDataset,
    classifier: &BagClassifier,
    tau: f64,
    options: &SelectionOptions,
) -> Result<StablePool> {
    if train.num_positive() == 0 {
        return Err(Error::MissingClass("positive"));
    }
    if train.num_negative() == 0 {
        return Err(Error::MissingClass("negative"));
    }
    let mut negatives: Vec<&Bag> = train.negatives().collect();
    if let Some(limit) = options.subsample_negatives {
        if limit > 0 && limit < negatives.len() {
            negatives.shuffle(&mut seeds::rng(options.subsample_seed));
            negatives.truncate(limit);
        }
    }
    let scorer = TreatmentScorer::new(classifier, negatives)?;
    let candidates = candidate_pool(train);
    let scores: Vec<f64> = candidates.par_iter().map(|(x, _, _)| scorer.score(x)).collect::<Result<_>>()?;
    let all_scores: Vec<ScoredCandidate> = candidates
        .into_iter()
        .zip(scores)
        .map(|((instance, source_bag, index), score)| ScoredCandidate { instance, source_bag, index, score })
        .collect();

    let mut members: Vec<ScoredCandidate> = all_scores.iter().filter(|c| options.rule.admits(c.score, tau)).cloned().collect();
    let mut fallback = false;
    if members.is_empty() {
        fallback = true;
        let keep = (FALLBACK_FRACTION * all_scores.len() as f64).ceil() as usize;
        let mut order: Vec<usize> = (0..all_scores.len()).collect();
        order.sort_by(|&a, &b| all_scores[b].score.total_cmp(&all_scores[a].score).then(a.cmp(&b)));
        let mut kept: Vec<usize> = order.into_iter().take(keep.max(1)).collect();
        kept.sort_unstable();
        members = kept.into_iter().map(|i| all_scores[i].clone()).collect();
    }
    Ok(StablePool { members, tau, all_scores, fallback })
}

/// Pool holding every distinct positive-bag instance, no selection.
pub fn all_instance_pool(train: &MilDataset) -> StablePool {
    let all_scores: Vec<ScoredCandidate> = candidate_pool(train)
        .into_iter()
        .map(|(instance, source_bag, index)| ScoredCandidate { instance, source_bag, index, score: 1.0 })
        .collect();
    StablePool { members: all_scores.clone(), tau: 0.0, all_scores, fallback: false }
}

/// Exhaustive treatment-effect computation under the oracle labeler, with
/// the terms of the decomposition
/// `tau = P(Y=0) E[Y*|Y=0,T=1] + p P(Y=1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectDecomposition {
    /// `E[Y*|T=1] - E[Y*|T=0]`.
    pub tau: f64,
    pub p_negative: f64,
    pub p_positive: f64,
    /// `E[Y*|Y=0,T=1]`.
    pub treated_negative_mean: f64,
    /// `E[Y*|Y=1,T=1]`; always 1 when positives exist.
    pub treated_positive_mean: f64,
    /// `E[Y*|Y=0,T=0]`; always 0.
    pub control_negative_mean: f64,
    /// Fraction of positive bags whose only causal content is `x`.
    pub p: f64,
    pub constant: f64,
    /// `P(Y=0) E[Y*|Y=0,T=1] + p P(Y=1)`.
    pub decomposed: f64,
}

impl EffectDecomposition {
    pub fn identity_gap(&self) -> f64 {
        (self.tau - self.decomposed).abs()
    }
}

/// Treats every bag of `population` (append `x`) and untreats it (remove
/// every copy of `x`), labeling both with the oracle.
pub fn brute_force_effect(x: &Instance, population: &[Bag]) -> Result<EffectDecomposition> {
    if x.truth == InstanceRole::Unknown {
        return Err(Error::UnknownTruth { bag: "<candidate>".into() });
    }
    if population.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let x_causal = x.truth == InstanceRole::Causal;
    let (mut n_neg, mut n_pos) = (0usize, 0usize);
    let (mut treated_sum, mut control_sum) = (0usize, 0usize);
    let (mut treated_neg, mut treated_pos, mut control_neg, mut only_x) = (0usize, 0usize, 0usize, 0usize);
    for bag in population {
        let roles = bag.instances().iter().map(|i| i.truth);
        let y = oracle_label_of(roles.clone()).ok_or_else(|| Error::UnknownTruth { bag: bag.id().to_string() })?;
        let treated = y.max(u8::from(x_causal));
        let control = oracle_label_of(bag.instances().iter().filter(|i| !i.same_point(x)).map(|i| i.truth))
            .expect("truths checked above");
        treated_sum += treated as usize;
        control_sum += control as usize;
        if y == 0 {
            n_neg += 1;
            treated_neg += treated as usize;
            control_neg += control as usize;
        } else {
            n_pos += 1;
            treated_pos += treated as usize;
            only_x += usize::from(control == 0);
        }
    }
    let n = population.len() as f64;
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let p_negative = n_neg as f64 / n;
    let p_positive = n_pos as f64 / n;
    let treated_negative_mean = ratio(treated_neg, n_neg);
    let p = ratio(only_x, n_pos);
    let constant = p * p_positive;
    Ok(EffectDecomposition {
        tau: treated_sum as f64 / n - control_sum as f64 / n,
        p_negative,
        p_positive,
        treated_negative_mean,
        treated_positive_mean: ratio(treated_pos, n_pos),
        control_negative_mean: ratio(control_neg, n_neg),
        p,
        constant,
        decomposed: p_negative * treated_negative_mean + constant,
    })
}
