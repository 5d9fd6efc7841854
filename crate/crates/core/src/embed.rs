//! Bag embedding against a pool of instances and the final classifier.
//!
//! Coordinate `j` of a bag's embedding is `max_i exp(-lambda_j ||x_i - p_j||^2)`
//! over the bag's instances `x_i`, for pool member `p_j`. Bandwidths come
//! from local scaling: `lambda_j = 1 / sigma_j^2` with `sigma_j` the distance
//! from `p_j` to its k-th nearest reference instance.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::fmt_f64;
use crate::mil::{Bag, MilDataset};
use crate::numopt::cv::{grid_search_rbf, GridChoice, SvmGrid};
use crate::numopt::kernel::{rbf_from_sq_dist, sq_dist, KernelSpec};
use crate::numopt::smo::{smo_train, svm_predict, SvmConfig, SvmModel};
use crate::select::StablePool;

pub const SINGLE_FEATURE_DEGENERATE: &str = "SingleFeatureDegenerate";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSet {
    AllTraining,
    PositiveBags,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    /// Neighbor rank used by local scaling.
    pub k: usize,
    /// Overrides local scaling with one bandwidth for every member.
    pub global_lambda: Option<f64>,
    pub reference: ReferenceSet,
    pub grid: SvmGrid,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self { k: 7, global_lambda: None, reference: ReferenceSet::AllTraining, grid: SvmGrid::default() }
    }
}

/// Pool members with their bandwidths (one shared value or one per member).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub members: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
}

impl EmbeddingSpec {
    pub fn new(members: Vec<Vec<f64>>, lambdas: Vec<f64>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyPool);
        }
        if lambdas.len() != 1 && lambdas.len() != members.len() {
            return Err(Error::InvalidConfig(format!(
                "{} bandwidths for {} pool members",
                lambdas.len(),
                members.len()
            )));
        }
        if lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidConfig("bandwidths must be positive".into()));
        }
        let d = members[0].len();
        if let Some(m) = members.iter().find(|m| m.len() != d) {
            return Err(Error::DimMismatch { expected: d, found: m.len() });
        }
        Ok(Self { members, lambdas })
    }

    /// Builds the spec for `pool`, using `train` as the local-scaling reference.
    pub fn from_pool(pool: &StablePool, train: &MilDataset, config: &EmbeddingConfig) -> Result<Self> {
        let members: Vec<Vec<f64>> = pool.members.iter().map(|m| m.instance.features.clone()).collect();
        if members.is_empty() {
            return Err(Error::EmptyPool);
        }
        let lambdas = match config.global_lambda {
            Some(l) => vec![l],
            None => {
                let refs: Vec<&[f64]> = train
                    .bags()
                    .iter()
                    .filter(|b| config.reference == ReferenceSet::AllTraining || b.label() == 1)
                    .flat_map(|b| b.instances().iter().map(|i| i.features.as_slice()))
                    .collect();
                local_scale(&members, &refs, config.k)?
            }
        };
        Self::new(members, lambdas)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].len()
    }

    pub fn lambda(&self, j: usize) -> f64 {
        if self.lambdas.len() == 1 {
            self.lambdas[0]
        } else {
            self.lambdas[j]
        }
    }

    pub fn hash(&self) -> String {
        crate::seeds::sha256_hex(crate::fmt::to_canonical_json(self).expect("spec serializes").as_bytes())[..16]
            .to_string()
    }
}

/// Per-member bandwidths `1 / sigma^2`, where `sigma` is the distance to the
/// `k`-th nearest reference that is not an exact copy of the member. Members
/// with `sigma == 0` get the median of the other bandwidths (1.0 if none).
pub fn local_scale<M: AsRef<[f64]> + Sync, R: AsRef<[f64]> + Sync>(members: &[M], references: &[R], k: usize) -> Result<Vec<f64>> {
    if k == 0 || references.len() <= k {
        return Err(Error::TooFewReferences { k, got: references.len() });
    }
    let sigmas: Vec<f64> = members
        .par_iter()
        .map(|m| {
            let m = m.as_ref();
            let mut d: Vec<f64> = references.iter().map(|r| sq_dist(m, r.as_ref())).filter(|&v| v > 0.0).collect();
            if d.len() < k {
                return 0.0;
            }
            let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
            kth.sqrt()
        })
        .collect();
    let mut positive: Vec<f64> = sigmas.iter().filter(|&&s| s > 0.0).map(|s| 1.0 / (s * s)).collect();
    let fallback = if positive.is_empty() {
        1.0
    } else {
        positive.sort_by(f64::total_cmp);
        let mid = positive.len() / 2;
        if positive.len() % 2 == 1 {
            positive[mid]
        } else {
            0.5 * (positive[mid - 1] + positive[mid])
        }
    };
    Ok(sigmas.into_iter().map(|s| if s > 0.0 { 1.0 / (s * s) } else { fallback }).collect())
}

/// `max` over the bag's instances of `exp(-lambda ||x_i - x||^2)`.
pub fn similarity(bag: &Bag, x: &[f64], lambda: f64) -> Result<f64> {
    if bag.dim() != x.len() {
        return Err(Error::DimMismatch { expected: bag.dim(), found: x.len() });
    }
    let closest = bag
        .instances()
        .iter()
        .map(|i| sq_dist(&i.features, x))
        .fold(f64::INFINITY, f64::min);
    Ok(rbf_from_sq_dist(closest, lambda))
}

pub fn embed_bag(bag: &Bag, spec: &EmbeddingSpec) -> Result<Vec<f64>> {
    if spec.is_empty() {
        return Err(Error::EmptyPool);
    }
    spec.members.iter().enumerate().map(|(j, m)| similarity(bag, m, spec.lambda(j))).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedDataset {
    pub ids: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub spec_hash: String,
}

impl EmbeddedDataset {
    /// CSV with header `bag_id,z_1,...,z_q,label`.
    pub fn to_csv(&self) -> String {
        let q = self.vectors.first().map_or(0, Vec::len);
        let mut out = String::from("bag_id");
        for j in 1..=q {
            write!(out, ",z_{j}").unwrap();
        }
        out.push_str(",label\n");
        for ((id, v), label) in self.ids.iter().zip(&self.vectors).zip(&self.labels) {
            out.push_str(id);
            for x in v {
                out.push(',');
                out.push_str(&fmt_f64(*x));
            }
            writeln!(out, ",{label}").unwrap();
        }
        out
    }
}

pub fn embed_dataset(data: &MilDataset, spec: &EmbeddingSpec) -> Result<EmbeddedDataset> {
    let vectors = data.bags().par_iter().map(|b| embed_bag(b, spec)).collect::<Result<Vec<_>>>()?;
    Ok(EmbeddedDataset {
        ids: data.bags().iter().map(|b| b.id().to_string()).collect(),
        vectors,
        labels: data.labels(),
        spec_hash: spec.hash(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbeddedClassifier {
    Svm(SvmModel),
    /// Constant prediction used when every training embedding is identical.
    Majority { label: u8 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedModel {
    pub spec: EmbeddingSpec,
    pub classifier: EmbeddedClassifier,
    pub choice: Option<GridChoice>,
    pub warnings: Vec<String>,
}

impl EmbeddedModel {
    pub fn predict(&self, bag: &Bag) -> Result<u8> {
        match &self.classifier {
            EmbeddedClassifier::Majority { label } => Ok(*label),
            EmbeddedClassifier::Svm(model) => svm_predict(model, &embed_bag(bag, &self.spec)?),
        }
    }

    pub fn accuracy(&self, data: &MilDataset) -> Result<f64> {
        let correct = data
            .bags()
            .par_iter()
            .map(|b| Ok(usize::from(self.predict(b)? == b.label())))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum::<usize>();
        Ok(correct as f64 / data.len() as f64)
    }
}

/// Embeds the training bags, picks `(C, gamma)` by seeded cross-validation
/// and trains an RBF SVM on the embeddings.
pub fn train_embedded_classifier(
    train: &MilDataset,
    spec: &EmbeddingSpec,
    grid: &SvmGrid,
    seed: u64,
) -> Result<EmbeddedModel> {
    train.require_both_classes()?;
    let embedded = embed_dataset(train, spec)?;
    let all_same = embedded.vectors.windows(2).all(|w| w[0] == w[1]);
    if all_same {
        let pos = train.num_positive();
        let label = u8::from(pos * 2 >= train.len());
        return Ok(EmbeddedModel {
            spec: spec.clone(),
            classifier: EmbeddedClassifier::Majority { label },
            choice: None,
            warnings: vec![SINGLE_FEATURE_DEGENERATE.to_string()],
        });
    }
    let labels: Vec<f64> = embedded.labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let choice = grid_search_rbf(&embedded.vectors, &labels, grid, seed)?;
    let config = SvmConfig { c: choice.c, tol: grid.tol, ..SvmConfig::default() };
    let model = smo_train(&embedded.vectors, &labels, KernelSpec::rbf(choice.gamma)?, &config)?;
    let mut warnings = Vec::new();
    if !model.converged {
        warnings.push("SvmNoConvergence".to_string());
    }
    Ok(EmbeddedModel { spec: spec.clone(), classifier: EmbeddedClassifier::Svm(model), choice: Some(choice), warnings })
}
