use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use super::pipeline::{run_repetitions, RepetitionRecord};
use super::stats::{mean, paired_t_test, rank_sum_test, sample_std, RankSum, TTest};
use crate::error::Result;
use crate::fmt::fmt_f64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; 0 with one repetition.
    pub std: f64,
}

/// StableMIL against one other method over paired repetitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: Method,
    pub t_test: TTest,
    pub rank_sum: RankSum,
}

/// Mean and sample std of every method present in the records.
pub fn summarize(records: &[RepetitionRecord], methods: &[Method]) -> Vec<MethodSummary> {
    methods
        .iter()
        .map(|&method| {
            let accuracies: Vec<f64> = records.iter().filter_map(|r| r.accuracy(method)).collect();
            MethodSummary { method, mean: mean(&accuracies), std: sample_std(&accuracies), accuracies }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub repetitions: Vec<RepetitionRecord>,
    pub summaries: Vec<MethodSummary>,
    pub comparisons: Vec<Comparison>,
}

/// Runs every repetition of `config` and assembles the report.
pub fn reproduce(config: &ExperimentConfig, jobs: usize) -> Result<RunReport> {
    let repetitions = run_repetitions(config, jobs)?;
    Ok(RunReport::new(config.clone(), repetitions))
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

impl RunReport {
    pub fn new(config: ExperimentConfig, repetitions: Vec<RepetitionRecord>) -> Self {
        let summaries = summarize(&repetitions, &config.methods);
        let mut comparisons = Vec::new();
        if let Some(stable) = summaries.iter().find(|s| s.method == Method::Stablemil) {
            for other in summaries.iter().filter(|s| s.method != Method::Stablemil) {
                comparisons.push(Comparison {
                    baseline: other.method,
                    t_test: paired_t_test(&stable.accuracies, &other.accuracies),
                    rank_sum: rank_sum_test(&stable.accuracies, &other.accuracies),
                });
            }
        }
        Self { config_hash: config.hash(), config, repetitions, summaries, comparisons }
    }

    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    pub fn comparison(&self, baseline: Method) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.baseline == baseline)
    }

    /// One row per method: `method,repetitions,mean,std,config_hash`.
    pub fn report_csv(&self) -> String {
        let mut out = String::from("method,repetitions,mean,std,config_hash\n");
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.method,
                s.accuracies.len(),
                fmt_f64(s.mean),
                fmt_f64(s.std),
                self.config_hash
            );
        }
        out
    }

    /// One row per repetition and method.
    pub fn repetitions_csv(&self) -> String {
        let mut out = String::from("repetition,seed,a_used,train_bags,test_bags,method,accuracy,pool_size,tau,average_precision\n");
        for r in &self.repetitions {
            for m in &r.results {
                let stable = m.method == Method::Stablemil;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.index,
                    r.seed,
                    opt(r.a_used),
                    r.train_bags,
                    r.test_bags,
                    m.method,
                    fmt_f64(m.accuracy),
                    m.pool_size.map(|q| q.to_string()).unwrap_or_default(),
                    if stable { opt(r.tau) } else { String::new() },
                    if stable { opt(r.pr.as_ref().map(|p| p.average_precision)) } else { String::new() },
                );
            }
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("repetition,stage,seconds\n");
        for r in &self.repetitions {
            for (stage, secs) in &r.timings {
                let _ = writeln!(out, "{},{},{:.6}", r.index, stage, secs);
            }
        }
        out
    }

    /// Canonical JSON of the first repetition's stable pool.
    pub fn pool_json(&self) -> Option<String> {
        self.repetitions.first()?.pool.as_ref().map(|p| p.to_json())
    }

    /// PR curve of the first repetition's candidate scores.
    pub fn pr_csv(&self) -> Option<String> {
        self.repetitions.first()?.pr.as_ref().map(|p| p.to_csv())
    }

    pub fn report_txt(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "config hash: {}", self.config_hash);
        let _ = writeln!(out, "repetitions: {}", self.repetitions.len());
        let _ = writeln!(out, "\n{:<24} {:>18}", "method", "accuracy % (mean ± std)");
        for s in &self.summaries {
            let _ = writeln!(out, "{:<24} {:>9.2} ± {:<6.2}", s.method.as_str(), 100.0 * s.mean, 100.0 * s.std);
        }
        if !self.comparisons.is_empty() {
            let _ = writeln!(out);
        }
        for c in &self.comparisons {
            let _ = writeln!(
                out,
                "stablemil vs {}: diff {:+.2} points, paired t = {:.3} (p = {:.3e}), rank-sum z = {:.3} (p = {:.3e})",
                c.baseline,
                100.0 * c.t_test.mean_diff,
                c.t_test.t,
                c.t_test.p_value,
                c.rank_sum.z,
                c.rank_sum.p_value
            );
        }
        let pools: Vec<f64> = self
            .repetitions
            .iter()
            .filter_map(|r| r.results.iter().find(|m| m.method == Method::Stablemil)?.pool_size)
            .map(|q| q as f64)
            .collect();
        if !pools.is_empty() {
            let taus: Vec<f64> = self.repetitions.iter().filter_map(|r| r.tau).collect();
            let fallbacks = self.repetitions.iter().filter(|r| r.fallback == Some(true)).count();
            let _ = writeln!(out, "\npool size q: mean {:.1}, min {}, max {}", mean(&pools), min(&pools), max(&pools));
            let _ = writeln!(out, "threshold tau: mean {:.4}, min {}, max {}", mean(&taus), min(&taus), max(&taus));
            let _ = writeln!(out, "fallback pools: {fallbacks}");
            let aps: Vec<f64> = self.repetitions.iter().filter_map(|r| r.pr.as_ref().map(|p| p.average_precision)).collect();
            if !aps.is_empty() {
                let _ = writeln!(out, "causal-instance average precision: mean {:.4}", mean(&aps));
            }
        }
        let a: Vec<f64> = self.repetitions.iter().filter_map(|r| r.a_used).collect();
        if !a.is_empty() {
            let _ = writeln!(out, "split ratio a: mean {:.4}, min {:.4}, max {:.4}", mean(&a), min(&a), max(&a));
        }
        out
    }

    /// Writes `report.csv`, `report.txt`, `repetitions.csv`, `timing.csv`
    /// and, when a pool exists, `pool.json` and `pr.csv`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.csv"), self.report_csv())?;
        std::fs::write(dir.join("report.txt"), self.report_txt())?;
        std::fs::write(dir.join("repetitions.csv"), self.repetitions_csv())?;
        std::fs::write(dir.join("timing.csv"), self.timing_csv())?;
        if let Some(pool) = self.pool_json() {
            std::fs::write(dir.join("pool.json"), pool)?;
        }
        if let Some(pr) = self.pr_csv() {
            std::fs::write(dir.join("pr.csv"), pr)?;
        }
        Ok(())
    }
}

fn min(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
