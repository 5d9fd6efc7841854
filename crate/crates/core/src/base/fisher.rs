//! Fisher-vector encoding of bags under a diagonal GMM.
//!
//! For instance `x` with posteriors `g_k`, component `k` contributes
//!
//! ```text
//! mean block:      g_k (x - mu_k) / (sigma_k sqrt(w_k))
//! variance block:  g_k ((x - mu_k)^2 / sigma_k^2 - 1) / sqrt(2 w_k)
//! ```
//!
//! and a bag's raw encoding is the average over its instances. Layout is
//! all K mean blocks followed by all K variance blocks (length `2dK`).
//! The weight-gradient block is not included.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mil::Bag;
use crate::numopt::gmm::{normalize_log_posteriors, GmmModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FisherNorm {
    pub power_norm: bool,
    pub l2_norm: bool,
}

impl Default for FisherNorm {
    fn default() -> Self {
        Self { power_norm: true, l2_norm: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct EncoderParams {
    gmm: GmmModel,
    normalize: FisherNorm,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "EncoderParams", into = "EncoderParams")]
pub struct FisherEncoder {
    gmm: GmmModel,
    normalize: FisherNorm,
    log_norms: Vec<f64>,
    inv_std: Vec<Vec<f64>>,
    mean_scale: Vec<f64>,
    var_scale: Vec<f64>,
}

impl From<EncoderParams> for FisherEncoder {
    fn from(p: EncoderParams) -> Self {
        FisherEncoder::new(p.gmm, p.normalize)
    }
}

impl From<FisherEncoder> for EncoderParams {
    fn from(e: FisherEncoder) -> Self {
        EncoderParams { gmm: e.gmm, normalize: e.normalize }
    }
}

/// Reusable buffers so the hot loop does not allocate.
pub(crate) struct Scratch {
    post: Vec<f64>,
}

impl FisherEncoder {
    pub fn new(gmm: GmmModel, normalize: FisherNorm) -> Self {
        let log_norms = gmm.log_norms();
        let inv_std = gmm.variances.iter().map(|v| v.iter().map(|s| 1.0 / s.sqrt()).collect()).collect();
        let mean_scale = gmm.weights.iter().map(|w| if *w > 0.0 { 1.0 / w.sqrt() } else { 0.0 }).collect();
        let var_scale = gmm.weights.iter().map(|w| if *w > 0.0 { 1.0 / (2.0 * w).sqrt() } else { 0.0 }).collect();
        Self { gmm, normalize, log_norms, inv_std, mean_scale, var_scale }
    }

    pub fn gmm(&self) -> &GmmModel {
        &self.gmm
    }

    pub fn normalize(&self) -> FisherNorm {
        self.normalize
    }

    pub fn dim(&self) -> usize {
        self.gmm.dim()
    }

    /// Encoding length `2 d K`.
    pub fn encoding_dim(&self) -> usize {
        2 * self.gmm.dim() * self.gmm.components()
    }

    pub(crate) fn scratch(&self) -> Scratch {
        Scratch { post: vec![0.0; self.gmm.components()] }
    }

    /// Adds the per-instance statistics of `x` into `acc`.
    pub(crate) fn accumulate(&self, x: &[f64], acc: &mut [f64], scratch: &mut Scratch) {
        let d = self.dim();
        let k_total = self.gmm.components();
        self.gmm.log_joint_into(&self.log_norms, x, &mut scratch.post);
        normalize_log_posteriors(&mut scratch.post);
        let var_offset = d * k_total;
        for k in 0..k_total {
            let g = scratch.post[k];
            if g == 0.0 || self.mean_scale[k] == 0.0 {
                continue;
            }
            let mean = &self.gmm.means[k];
            let inv_std = &self.inv_std[k];
            let (ms, vs) = (g * self.mean_scale[k], g * self.var_scale[k]);
            let mean_block = &mut acc[k * d..(k + 1) * d];
            for j in 0..d {
                mean_block[j] += ms * (x[j] - mean[j]) * inv_std[j];
            }
            let var_block = &mut acc[var_offset + k * d..var_offset + (k + 1) * d];
            for j in 0..d {
                let z = (x[j] - mean[j]) * inv_std[j];
                var_block[j] += vs * (z * z - 1.0);
            }
        }
    }

    /// Averages an accumulated sum over `count` instances and applies the
    /// configured normalizations.
    pub(crate) fn finalize_into(&self, sum: &[f64], count: usize, out: &mut [f64]) {
        let inv = 1.0 / count as f64;
        for (o, s) in out.iter_mut().zip(sum) {
            *o = s * inv;
        }
        self.normalize_in_place(out);
    }

    fn normalize_in_place(&self, v: &mut [f64]) {
        if self.normalize.power_norm {
            for x in v.iter_mut() {
                *x = x.signum() * x.abs().sqrt();
            }
        }
        if self.normalize.l2_norm {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
        }
    }

    pub(crate) fn bag_sum(&self, bag: &Bag, scratch: &mut Scratch) -> Vec<f64> {
        let mut acc = vec![0.0; self.encoding_dim()];
        for inst in bag.instances() {
            self.accumulate(&inst.features, &mut acc, scratch);
        }
        acc
    }

    fn check(&self, bag: &Bag) -> Result<()> {
        if bag.dim() != self.dim() {
            return Err(Error::DimMismatch { expected: self.dim(), found: bag.dim() });
        }
        Ok(())
    }

    /// Average per-instance statistics without any normalization.
    pub fn encode_raw(&self, bag: &Bag) -> Result<Vec<f64>> {
        self.check(bag)?;
        let mut scratch = self.scratch();
        let mut v = self.bag_sum(bag, &mut scratch);
        let inv = 1.0 / bag.len() as f64;
        v.iter_mut().for_each(|x| *x *= inv);
        Ok(v)
    }
}

/// Normalized Fisher-vector encoding of `bag`.
pub fn fisher_encode(bag: &Bag, encoder: &FisherEncoder) -> Result<Vec<f64>> {
    encoder.check(bag)?;
    let mut scratch = encoder.scratch();
    let sum = encoder.bag_sum(bag, &mut scratch);
    let mut out = vec![0.0; sum.len()];
    encoder.finalize_into(&sum, bag.len(), &mut out);
    Ok(out)
}
