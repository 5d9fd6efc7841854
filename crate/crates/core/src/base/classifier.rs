use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::fisher::{fisher_encode, FisherEncoder, FisherNorm, Scratch};
use crate::error::{Error, Result};
use crate::mil::{oracle_label, Bag, MilDataset};
use crate::numopt::gmm::{gmm_fit_with, GmmConfig};
use crate::numopt::kernel::{dot, KernelSpec};
use crate::numopt::smo::{smo_train, SvmConfig, SvmModel};

/// Hyperparameters of the Fisher-vector base learner.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaseConfig {
    pub gmm: GmmConfig,
    pub normalize: FisherNorm,
    pub svm: SvmConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MifvParams {
    encoder: FisherEncoder,
    linear_model: SvmModel,
}

/// GMM + Fisher vectors + linear SVM.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "MifvParams", into = "MifvParams")]
pub struct MifvClassifier {
    encoder: FisherEncoder,
    linear_model: SvmModel,
    weights: Vec<f64>,
}

impl From<MifvParams> for MifvClassifier {
    fn from(p: MifvParams) -> Self {
        MifvClassifier::new(p.encoder, p.linear_model)
    }
}

impl From<MifvClassifier> for MifvParams {
    fn from(c: MifvClassifier) -> Self {
        MifvParams { encoder: c.encoder, linear_model: c.linear_model }
    }
}

impl MifvClassifier {
    pub fn new(encoder: FisherEncoder, linear_model: SvmModel) -> Self {
        let weights = linear_model.linear_weights().unwrap_or_else(|| vec![0.0; encoder.encoding_dim()]);
        Self { encoder, linear_model, weights }
    }

    pub fn encoder(&self) -> &FisherEncoder {
        &self.encoder
    }

    pub fn linear_model(&self) -> &SvmModel {
        &self.linear_model
    }

    pub fn decision_encoded(&self, z: &[f64]) -> f64 {
        dot(&self.weights, z) + self.linear_model.bias
    }

    pub fn decision(&self, bag: &Bag) -> Result<f64> {
        Ok(self.decision_encoded(&fisher_encode(bag, &self.encoder)?))
    }

    /// Label of a bag given the sum of its per-instance statistics.
    pub(crate) fn predict_from_sum(&self, sum: &[f64], count: usize, buf: &mut [f64]) -> u8 {
        self.encoder.finalize_into(sum, count, buf);
        u8::from(self.decision_encoded(buf) >= 0.0)
    }

    pub(crate) fn scratch(&self) -> Scratch {
        self.encoder.scratch()
    }
}

/// A bag-level classifier with hard {0,1} outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BagClassifier {
    Mifv(MifvClassifier),
    /// Labels bags from instance ground truth.
    Oracle,
    /// Fixed lookup table keyed by bag id.
    Stub { table: BTreeMap<String, u8> },
}

impl BagClassifier {
    pub fn kind(&self) -> &'static str {
        match self {
            BagClassifier::Mifv(_) => "mifv",
            BagClassifier::Oracle => "oracle",
            BagClassifier::Stub { .. } => "stub",
        }
    }

    /// Canonical JSON (sorted keys, exact floats).
    pub fn to_json(&self) -> String {
        crate::fmt::to_canonical_json(self).expect("classifier serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidData(format!("classifier JSON: {e}")))
    }
}

/// Predicts the label of `bag`. Pure; safe to call from many threads.
pub fn predict_bag(classifier: &BagClassifier, bag: &Bag) -> Result<u8> {
    match classifier {
        BagClassifier::Mifv(m) => Ok(u8::from(m.decision(bag)? >= 0.0)),
        BagClassifier::Oracle => oracle_label(bag),
        BagClassifier::Stub { table } => {
            table.get(bag.id()).copied().ok_or_else(|| Error::UnknownBag(bag.id().to_string()))
        }
    }
}

/// Fits the GMM on all training instances, encodes every bag, and trains a
/// linear SVM on the encodings.
pub fn train_bag_classifier(train: &MilDataset, config: &BaseConfig, seed: u64) -> Result<BagClassifier> {
    train.require_both_classes()?;
    let pooled: Vec<&[f64]> = train
        .bags()
        .iter()
        .flat_map(|b| b.instances().iter().map(|i| i.features.as_slice()))
        .collect();
    let gmm = gmm_fit_with(&pooled, &config.gmm, seed)?;
    let encoder = FisherEncoder::new(gmm, config.normalize);
    let encodings = train
        .bags()
        .iter()
        .map(|b| fisher_encode(b, &encoder))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<f64> = train.bags().iter().map(|b| if b.label() == 1 { 1.0 } else { -1.0 }).collect();
    let model = smo_train(&encodings, &labels, KernelSpec::Linear, &config.svm)?;
    Ok(BagClassifier::Mifv(MifvClassifier::new(encoder, model)))
}

/// Fraction of bags whose predicted label matches the stored one.
pub fn accuracy(classifier: &BagClassifier, data: &MilDataset) -> Result<f64> {
    let mut correct = 0usize;
    for bag in data.bags() {
        if predict_bag(classifier, bag)? == bag.label() {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
