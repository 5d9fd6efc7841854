use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Rbf { gamma: f64 },
    Linear,
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("rbf gamma must be positive, got {gamma}")));
        }
        Ok(KernelSpec::Rbf { gamma })
    }

    /// Kernel value; callers guarantee equal lengths.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Rbf { gamma } => rbf_from_sq_dist(sq_dist(x, y), gamma),
            KernelSpec::Linear => dot(x, y),
        }
    }
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `exp(-gamma * d2)`, kept strictly positive: values that would underflow
/// are clamped to the smallest normal float.
#[inline]
pub fn rbf_from_sq_dist(d2: f64, gamma: f64) -> f64 {
    (-gamma * d2).exp().max(f64::MIN_POSITIVE)
}

/// Gaussian kernel `exp(-gamma * ||x - y||^2)`.
pub fn rbf(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimMismatch { expected: x.len(), found: y.len() });
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidConfig(format!("rbf gamma must be positive, got {gamma}")));
    }
    Ok(rbf_from_sq_dist(sq_dist(x, y), gamma))
}

/// Row-major Gram matrix of `points` under `kernel`.
pub fn gram_matrix<P: AsRef<[f64]>>(points: &[P], kernel: &KernelSpec) -> Vec<f64> {
    let n = points.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(points[i].as_ref(), points[j].as_ref());
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
    }
    gram
}
