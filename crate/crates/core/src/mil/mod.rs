//! Multi-instance data model: instances, bags, datasets, and the oracle
//! labeling rule of the standard multi-instance assumption (a bag is
//! positive iff it holds at least one positive instance).

mod io;

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, save_dataset, write_dataset, DataFormat};

/// Ground-truth role of an instance, when known.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceRole {
    Causal,
    Noisy,
    Negative,
    #[default]
    Unknown,
}

impl InstanceRole {
    pub fn as_str(self) -> &'static str {
        match self {
            InstanceRole::Causal => "causal",
            InstanceRole::Noisy => "noisy",
            InstanceRole::Negative => "negative",
            InstanceRole::Unknown => "unknown",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub features: Vec<f64>,
    #[serde(default)]
    pub truth: InstanceRole,
}

impl Instance {
    pub fn new(features: Vec<f64>) -> Self {
        Self { features, truth: InstanceRole::Unknown }
    }

    pub fn with_truth(features: Vec<f64>, truth: InstanceRole) -> Self {
        Self { features, truth }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    /// Bitwise feature equality; two instances with the same features are the
    /// same point of the instance space regardless of where they came from.
    pub fn same_point(&self, other: &Instance) -> bool {
        self.features.len() == other.features.len()
            && self
                .features
                .iter()
                .zip(&other.features)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// A nonempty multiset of instances with a binary label.
///
/// Bags are immutable once built; "adding" an instance produces a new bag.
#[derive(Clone, Debug, PartialEq)]
pub struct Bag {
    id: String,
    label: u8,
    tag: Option<String>,
    instances: Vec<Instance>,
}

impl Bag {
    pub fn new(id: impl Into<String>, instances: Vec<Instance>, label: u8) -> Result<Self> {
        let id = id.into();
        if label > 1 {
            return Err(Error::InvalidData(format!("bag `{id}` has label {label}, expected 0 or 1")));
        }
        let first = instances
            .first()
            .ok_or_else(|| Error::InvalidData(format!("bag `{id}` has no instances")))?;
        let dim = first.dim();
        if dim == 0 {
            return Err(Error::InvalidData(format!("bag `{id}` has zero-dimensional instances")));
        }
        for inst in &instances {
            if inst.dim() != dim {
                return Err(Error::DimMismatch { expected: dim, found: inst.dim() });
            }
            if inst.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!("bag `{id}` has a non-finite feature")));
            }
        }
        Ok(Self { id, label, tag: None, instances })
    }

    /// Attaches a free-form tag (the synthetic benchmark stores the bag's
    /// background concept here).
    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> u8 {
        self.label
    }

    pub fn tag(&self) -> Option<&str> {
        self.tag.as_deref()
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.instances[0].dim()
    }

    pub fn truths_known(&self) -> bool {
        self.instances.iter().all(|i| i.truth != InstanceRole::Unknown)
    }

    /// New bag holding this bag's instances followed by `extra` (multiset append).
    pub fn appended(&self, id: impl Into<String>, extra: Instance) -> Result<Bag> {
        if extra.dim() != self.dim() {
            return Err(Error::DimMismatch { expected: self.dim(), found: extra.dim() });
        }
        let mut instances = Vec::with_capacity(self.instances.len() + 1);
        instances.extend_from_slice(&self.instances);
        instances.push(extra);
        Bag::new(id, instances, self.label)
    }
}

/// Label under the standard multi-instance assumption: 1 iff some instance is causal.
pub fn oracle_label(bag: &Bag) -> Result<u8> {
    oracle_label_of(bag.instances().iter().map(|i| i.truth))
        .ok_or_else(|| Error::UnknownTruth { bag: bag.id().to_string() })
}

/// Boolean OR over instance roles; `None` if any role is unknown.
pub fn oracle_label_of(roles: impl IntoIterator<Item = InstanceRole>) -> Option<u8> {
    let mut label = 0;
    for role in roles {
        match role {
            InstanceRole::Unknown => return None,
            InstanceRole::Causal => label = 1,
            _ => {}
        }
    }
    Some(label)
}

/// An ordered collection of bags sharing one feature dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct MilDataset {
    bags: Vec<Bag>,
    dim: usize,
    meta: BTreeMap<String, String>,
    source: Option<PathBuf>,
}

impl MilDataset {
    pub fn new(bags: Vec<Bag>) -> Result<Self> {
        Self::with_meta(bags, BTreeMap::new())
    }

    pub fn with_meta(bags: Vec<Bag>, meta: BTreeMap<String, String>) -> Result<Self> {
        let dim = bags.first().ok_or(Error::EmptyDataset)?.dim();
        let mut ids = HashSet::with_capacity(bags.len());
        for bag in &bags {
            if bag.dim() != dim {
                return Err(Error::DimMismatch { expected: dim, found: bag.dim() });
            }
            if !ids.insert(bag.id()) {
                return Err(Error::InvalidData(format!("duplicate bag id `{}`", bag.id())));
            }
        }
        Ok(Self { bags, dim, meta, source: None })
    }

    pub(crate) fn set_source(&mut self, path: PathBuf) {
        self.source = Some(path);
    }

    pub fn bags(&self) -> &[Bag] {
        &self.bags
    }

    pub fn into_bags(self) -> Vec<Bag> {
        self.bags
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.meta
    }

    /// Path the dataset was loaded from, if any.
    pub fn source(&self) -> Option<&std::path::Path> {
        self.source.as_deref()
    }

    /// Seed declared in the metadata under the `seed` key.
    pub fn seed(&self) -> Option<u64> {
        self.meta.get("seed").and_then(|s| s.parse().ok())
    }

    pub fn positives(&self) -> impl Iterator<Item = &Bag> {
        self.bags.iter().filter(|b| b.label() == 1)
    }

    pub fn negatives(&self) -> impl Iterator<Item = &Bag> {
        self.bags.iter().filter(|b| b.label() == 0)
    }

    pub fn num_positive(&self) -> usize {
        self.positives().count()
    }

    pub fn num_negative(&self) -> usize {
        self.len() - self.num_positive()
    }

    pub fn num_instances(&self) -> usize {
        self.bags.iter().map(Bag::len).sum()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.bags.iter().map(Bag::label).collect()
    }

    pub fn require_both_classes(&self) -> Result<()> {
        match (self.num_positive(), self.num_negative()) {
            (0, _) | (_, 0) => Err(Error::SingleClass),
            _ => Ok(()),
        }
    }
}
