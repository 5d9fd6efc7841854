//! Summary statistics and significance tests over repetition accuracies.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub mean_diff: f64,
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p_value: f64,
}

/// Paired t-test of `a - b`. Constant nonzero differences give `t = +-inf`,
/// `p = 0`; all-zero differences give `t = 0`, `p = 1`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> TTest {
    assert_eq!(a.len(), b.len(), "paired samples differ in length");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    let mean_diff = mean(&diffs);
    let df = n.saturating_sub(1) as f64;
    if n < 2 {
        return TTest { mean_diff, t: f64::NAN, df, p_value: f64::NAN };
    }
    let se = sample_std(&diffs) / (n as f64).sqrt();
    if se == 0.0 {
        return if mean_diff == 0.0 {
            TTest { mean_diff, t: 0.0, df, p_value: 1.0 }
        } else {
            TTest { mean_diff, t: mean_diff.signum() * f64::INFINITY, df, p_value: 0.0 }
        };
    }
    let t = mean_diff / se;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    TTest { mean_diff, t, df, p_value: (2.0 * dist.cdf(-t.abs())).min(1.0) }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSum {
    /// Rank sum of the first sample.
    pub w: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Wilcoxon rank-sum test, normal approximation with tie correction and no
/// continuity correction. Midranks for ties.
pub fn rank_sum_test(a: &[f64], b: &[f64]) -> RankSum {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let mut all: Vec<(f64, usize)> = a.iter().map(|&x| (x, 0)).chain(b.iter().map(|&x| (x, 1))).collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = all.len();
    let mut w = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        w += all[i..=j].iter().filter(|e| e.1 == 0).count() as f64 * rank;
        i = j + 1;
    }
    let nf = n as f64;
    let expected = n1 * (nf + 1.0) / 2.0;
    let var = n1 * n2 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if !(var > 0.0) {
        return RankSum { w, z: 0.0, p_value: 1.0 };
    }
    let z = (w - expected) / var.sqrt();
    let normal = Normal::standard();
    RankSum { w, z, p_value: (2.0 * normal.cdf(-z.abs())).min(1.0) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let xs = [0.9, 0.8, 1.0];
        assert!((mean(&xs) - 0.9).abs() < 1e-15);
        assert!((sample_std(&xs) - 0.1).abs() < 1e-15);
        assert_eq!(sample_std(&[0.7]), 0.0);
    }

    #[test]
    fn degenerate_t_tests() {
        assert_eq!(paired_t_test(&[1.0, 2.0], &[1.0, 2.0]).p_value, 1.0);
        let t = paired_t_test(&[2.0, 3.0], &[1.0, 2.0]);
        assert_eq!(t.p_value, 0.0);
        assert!(t.t.is_infinite());
    }

    #[test]
    fn rank_sum_separated_samples() {
        let r = rank_sum_test(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]);
        assert_eq!(r.w, 6.0);
        assert!(r.z < 0.0);
        let same = rank_sum_test(&[1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(same.p_value, 1.0);
    }
}
