//! Seeded, stratified k-fold grid search for RBF-kernel SVMs.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::kernel::{rbf_from_sq_dist, sq_dist};
use super::smo::{solve_dual, SvmConfig};
use crate::error::{Error, Result};
use crate::seeds;

/// `C` values crossed with `gamma = gamma_median * 2^e` for each exponent `e`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmGrid {
    pub c_values: Vec<f64>,
    pub gamma_exponents: Vec<i32>,
    pub folds: usize,
    pub tol: f64,
}

impl Default for SvmGrid {
    fn default() -> Self {
        Self { c_values: vec![0.1, 1.0, 10.0, 100.0], gamma_exponents: vec![-2, -1, 0, 1, 2], folds: 5, tol: 1e-3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridChoice {
    pub c: f64,
    pub gamma: f64,
    pub cv_accuracy: f64,
}

fn pairwise_sq_dists<P: AsRef<[f64]>>(points: &[P]) -> Vec<f64> {
    let n = points.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = sq_dist(points[i].as_ref(), points[j].as_ref());
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

fn median_of_positive(dists: &[f64], n: usize) -> Option<f64> {
    let mut vals: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| dists[i * n + j])
        .filter(|&v| v > 0.0)
        .collect();
    if vals.is_empty() {
        return None;
    }
    vals.sort_by(f64::total_cmp);
    let mid = vals.len() / 2;
    Some(if vals.len() % 2 == 1 { vals[mid] } else { 0.5 * (vals[mid - 1] + vals[mid]) })
}

/// `1 / median` of the positive pairwise squared distances; `None` when all points coincide.
pub fn median_heuristic_gamma<P: AsRef<[f64]>>(points: &[P]) -> Option<f64> {
    median_of_positive(&pairwise_sq_dists(points), points.len()).map(|m| 1.0 / m)
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[f64], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = seeds::rng(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for class in [-1.0, 1.0] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

/// Picks `(C, gamma)` by cross-validated accuracy. Ties keep the earlier grid point.
pub fn grid_search_rbf<P: AsRef<[f64]>>(points: &[P], labels: &[f64], grid: &SvmGrid, seed: u64) -> Result<GridChoice> {
    let n = points.len();
    if !(labels.contains(&1.0) && labels.contains(&-1.0)) {
        return Err(Error::SingleClass);
    }
    if grid.c_values.is_empty() || grid.gamma_exponents.is_empty() || grid.folds < 2 {
        return Err(Error::InvalidConfig("SVM grid needs C values, gamma exponents and >= 2 folds".into()));
    }
    let dists = pairwise_sq_dists(points);
    let base_gamma = median_of_positive(&dists, n)
        .map(|m| 1.0 / m)
        .ok_or_else(|| Error::InvalidData("all training points coincide".into()))?;
    let folds = stratified_folds(labels, grid.folds.min(n), seed);
    let n_folds = grid.folds.min(n);

    let mut best: Option<GridChoice> = None;
    let mut gram = vec![0.0; n * n];
    for &c in &grid.c_values {
        for &e in &grid.gamma_exponents {
            let gamma = base_gamma * 2f64.powi(e);
            for (g, d) in gram.iter_mut().zip(&dists) {
                *g = rbf_from_sq_dist(*d, gamma);
            }
            let mut correct = 0usize;
            for fold in 0..n_folds {
                let train: Vec<usize> = (0..n).filter(|&i| folds[i] != fold).collect();
                let test: Vec<usize> = (0..n).filter(|&i| folds[i] == fold).collect();
                correct += fold_correct(&gram, n, labels, &train, &test, c, grid.tol);
            }
            let acc = correct as f64 / n as f64;
            if best.is_none_or(|b| acc > b.cv_accuracy) {
                best = Some(GridChoice { c, gamma, cv_accuracy: acc });
            }
        }
    }
    Ok(best.expect("nonempty grid"))
}

fn fold_correct(gram: &[f64], n: usize, labels: &[f64], train: &[usize], test: &[usize], c: f64, tol: f64) -> usize {
    let y: Vec<f64> = train.iter().map(|&i| labels[i]).collect();
    let has_both = y.contains(&1.0) && y.contains(&-1.0);
    if !has_both {
        let constant = y.first().copied().unwrap_or(1.0);
        return test.iter().filter(|&&i| labels[i] == constant).count();
    }
    let m = train.len();
    let mut sub = vec![0.0; m * m];
    for (a, &i) in train.iter().enumerate() {
        for (b, &j) in train.iter().enumerate() {
            sub[a * m + b] = gram[i * n + j];
        }
    }
    let sol = solve_dual(&sub, &y, &SvmConfig { c, tol, max_iter: None, trace: false });
    test.iter()
        .filter(|&&t| {
            let f: f64 = train
                .iter()
                .zip(&sol.alpha)
                .filter(|(_, &a)| a > 0.0)
                .map(|(&i, &a)| a * labels[i] * gram[i * n + t])
                .sum::<f64>()
                + sol.bias;
            let predicted = if f >= 0.0 { 1.0 } else { -1.0 };
            predicted == labels[t]
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<f64> = (0..50).map(|i| if i < 20 { 1.0 } else { -1.0 }).collect();
        let folds = stratified_folds(&labels, 5, 3);
        for f in 0..5 {
            let pos = (0..50).filter(|&i| folds[i] == f && labels[i] > 0.0).count();
            assert_eq!(pos, 4);
        }
        assert_eq!(folds, stratified_folds(&labels, 5, 3));
    }

    #[test]
    fn median_heuristic() {
        let pts = vec![vec![0.0], vec![1.0], vec![3.0]];
        // squared distances 1, 9, 4 -> median 4
        assert_eq!(median_heuristic_gamma(&pts), Some(0.25));
        assert_eq!(median_heuristic_gamma(&[vec![1.0], vec![1.0]]), None);
    }

    #[test]
    fn separable_data_cross_validates_perfectly() {
        let pts: Vec<Vec<f64>> = (0..40).map(|i| vec![if i < 20 { 0.0 } else { 5.0 } + (i % 7) as f64 * 0.1]).collect();
        let labels: Vec<f64> = (0..40).map(|i| if i < 20 { -1.0 } else { 1.0 }).collect();
        let choice = grid_search_rbf(&pts, &labels, &SvmGrid::default(), 1).unwrap();
        assert_eq!(choice.cv_accuracy, 1.0);
    }
}
