//! Precision-recall evaluation of candidate scores against instance truths.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::fmt_f64;
use crate::mil::InstanceRole;
use crate::select::ScoredCandidate;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrReport {
    pub points: Vec<PrPoint>,
    pub average_precision: f64,
    pub positives: usize,
    pub total: usize,
}

impl PrReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,precision,recall\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", fmt_f64(p.threshold), fmt_f64(p.precision), fmt_f64(p.recall));
        }
        out
    }
}

/// Sweeps the threshold over the distinct scores in descending order,
/// treating `score >= threshold` as predicted causal, and stops once recall
/// reaches 1. Average precision is `sum (R_k - R_{k-1}) P_k`.
pub fn pr_curve(scored: &[ScoredCandidate]) -> Result<PrReport> {
    let mut rows = Vec::with_capacity(scored.len());
    for c in scored {
        if c.instance.truth == InstanceRole::Unknown {
            return Err(Error::UnknownTruth { bag: c.source_bag.clone() });
        }
        rows.push((c.score, c.instance.truth == InstanceRole::Causal));
    }
    Ok(pr_from_labels(&rows))
}

/// Same sweep on raw `(score, is_positive)` pairs.
pub fn pr_from_labels(rows: &[(f64, bool)]) -> PrReport {
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| b.0.total_cmp(&a.0));
    let positives = rows.iter().filter(|r| r.1).count();
    let total = rows.len();
    let mut points = Vec::new();
    let mut ap = 0.0;
    let (mut tp, mut seen, mut last_recall) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < total && positives > 0 {
        let threshold = rows[i].0;
        while i < total && rows[i].0 == threshold {
            tp += usize::from(rows[i].1);
            seen += 1;
            i += 1;
        }
        let precision = tp as f64 / seen as f64;
        let recall = tp as f64 / positives as f64;
        ap += (recall - last_recall) * precision;
        last_recall = recall;
        points.push(PrPoint { threshold, precision, recall });
        if tp == positives {
            break;
        }
    }
    PrReport { points, average_precision: ap, positives, total }
}
