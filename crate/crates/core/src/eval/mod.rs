//! Experiment orchestration: the end-to-end pipeline, baselines, repeated
//! seeded runs, significance tests, PR curves and report files.

mod config;
mod pipeline;
mod pr;
mod report;
mod stats;

pub use config::{BaseKind, ExperimentConfig, Method, SelectionConfig, SplitMode};
pub use pipeline::{
    repetition_data, repetition_seed, run_baseline, run_repetition, run_repetitions, run_stablemil,
    stablemil_with_base, train_base, BaselineRun, MethodResult, RepetitionData, RepetitionRecord, StableMilRun,
    Timings,
};
pub use pr::{pr_curve, pr_from_labels, PrPoint, PrReport};
pub use report::{reproduce, summarize, Comparison, MethodSummary, RunReport};
pub use stats::{mean, paired_t_test, rank_sum_test, sample_std, RankSum, TTest};
