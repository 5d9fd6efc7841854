use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BaseKind, ExperimentConfig, Method, SplitMode};
use super::pr::{pr_curve, PrReport};
use crate::base::{accuracy, train_bag_classifier, BagClassifier};
use crate::bench::{biased_split, draw_a, generate_population, ShiftConfig};
use crate::embed::{train_embedded_classifier, EmbeddedModel, EmbeddingSpec};
use crate::error::{Error, Result};
use crate::mil::{load_dataset, Bag, DataFormat, MilDataset};
use crate::seeds;
use crate::select::{all_instance_pool, learn_stable_instances_with, select_threshold, SelectionOptions, StablePool};

/// Wall-clock seconds per pipeline stage.
pub type Timings = BTreeMap<String, f64>;

fn timed<T>(timings: &mut Timings, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f()?;
    *timings.entry(stage.to_string()).or_insert(0.0) += start.elapsed().as_secs_f64();
    Ok(out)
}

/// Base classifier for one repetition.
pub fn train_base(train: &MilDataset, config: &ExperimentConfig, seed: u64) -> Result<BagClassifier> {
    match config.base_classifier {
        BaseKind::Mifv => train_bag_classifier(train, &config.base, seeds::substream(seed, seeds::GMM, 0)),
        BaseKind::Oracle => {
            train.require_both_classes()?;
            Ok(BagClassifier::Oracle)
        }
    }
}

/// Artifacts of one StableMIL run.
#[derive(Clone, Debug)]
pub struct StableMilRun {
    pub accuracy: f64,
    pub base: BagClassifier,
    pub tau: f64,
    pub pool: StablePool,
    pub model: EmbeddedModel,
    pub timings: Timings,
}

/// Threshold, stable pool, embedding and final SVM on top of a trained base
/// classifier.
pub fn stablemil_with_base(
    train: &MilDataset,
    test: &MilDataset,
    base: BagClassifier,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<StableMilRun> {
    let mut timings = Timings::new();
    let tau = match config.selection.fixed_tau {
        Some(t) => t,
        None => timed(&mut timings, "threshold", || {
            let negatives: Vec<Bag> = train.negatives().cloned().collect();
            select_threshold(&negatives, &base, seeds::substream(seed, seeds::THRESHOLD_SPLIT, 0))
        })?,
    };
    let options = SelectionOptions {
        rule: config.selection.rule,
        subsample_negatives: config.selection.subsample_negatives,
        subsample_seed: seeds::substream(seed, "subsample", 0),
    };
    let pool = timed(&mut timings, "selection", || learn_stable_instances_with(train, &base, tau, &options))?;
    let model = timed(&mut timings, "embedding", || fit_embedding(train, &pool, config, seed))?;
    let acc = timed(&mut timings, "evaluation", || model.accuracy(test))?;
    Ok(StableMilRun { accuracy: acc, base, tau, pool, model, timings })
}

fn fit_embedding(train: &MilDataset, pool: &StablePool, config: &ExperimentConfig, seed: u64) -> Result<EmbeddedModel> {
    let spec = EmbeddingSpec::from_pool(pool, train, &config.embedding)?;
    train_embedded_classifier(train, &spec, &config.embedding.grid, seeds::substream(seed, seeds::SVM_CV, 0))
}

/// Full pipeline: base classifier, threshold, pool, embedding, final SVM,
/// test accuracy.
pub fn run_stablemil(train: &MilDataset, test: &MilDataset, config: &ExperimentConfig, seed: u64) -> Result<StableMilRun> {
    let start = Instant::now();
    let base = train_base(train, config, seed)?;
    let base_secs = start.elapsed().as_secs_f64();
    let mut run = stablemil_with_base(train, test, base, config, seed)?;
    run.timings.insert("base".into(), base_secs);
    Ok(run)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRun {
    pub method: Method,
    pub accuracy: f64,
    pub pool_size: Option<usize>,
}

/// `base_only` classifies test bags with the base classifier;
/// `all_instance_embedding` embeds against every positive-bag instance.
pub fn run_baseline(
    method: Method,
    train: &MilDataset,
    test: &MilDataset,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<BaselineRun> {
    match method {
        Method::BaseOnly => {
            let base = train_base(train, config, seed)?;
            Ok(BaselineRun { method, accuracy: accuracy(&base, test)?, pool_size: None })
        }
        Method::AllInstanceEmbedding => {
            train.require_both_classes()?;
            let pool = all_instance_pool(train);
            let model = fit_embedding(train, &pool, config, seed)?;
            Ok(BaselineRun { method, accuracy: model.accuracy(test)?, pool_size: Some(pool.len()) })
        }
        Method::Stablemil => {
            let run = run_stablemil(train, test, config, seed)?;
            Ok(BaselineRun { method, accuracy: run.accuracy, pool_size: Some(run.pool.len()) })
        }
    }
}

/// Train/test data of one repetition.
#[derive(Clone, Debug)]
pub struct RepetitionData {
    pub train: MilDataset,
    pub test: MilDataset,
    pub a_used: Option<f64>,
}

/// Seed of repetition `index` under root `seed`.
pub fn repetition_seed(seed: u64, index: usize) -> u64 {
    seeds::substream(seed, "repetition", index as u64)
}

/// Generates (or loads) the data of one repetition.
pub fn repetition_data(config: &ExperimentConfig, rep_seed: u64) -> Result<RepetitionData> {
    if let (Some(train), Some(test)) = (&config.train_path, &config.test_path) {
        let train = load_dataset(train, DataFormat::from_path(train))?;
        let test = load_dataset(test, DataFormat::from_path(test))?;
        if train.dim() != test.dim() {
            return Err(Error::DimMismatch { expected: train.dim(), found: test.dim() });
        }
        return Ok(RepetitionData { train, test, a_used: None });
    }
    let shift = ShiftConfig { seed: seeds::substream(rep_seed, seeds::DATAGEN, 0), ..config.shift.clone() };
    let population = generate_population(&shift)?;
    let a = match config.split {
        SplitMode::Biased => draw_a(shift.a_range, seeds::substream(rep_seed, seeds::SPLIT_RATIO, 0)),
        SplitMode::Iid => 0.5,
    };
    let split = biased_split(&population, a, seeds::substream(rep_seed, seeds::SPLIT, 0))?;
    Ok(RepetitionData { train: split.train, test: split.test, a_used: Some(a) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub accuracy: f64,
    pub pool_size: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct RepetitionRecord {
    pub index: usize,
    pub seed: u64,
    pub a_used: Option<f64>,
    pub train_bags: usize,
    pub test_bags: usize,
    pub results: Vec<MethodResult>,
    pub tau: Option<f64>,
    pub fallback: Option<bool>,
    pub pool: Option<StablePool>,
    /// Present when the pool's candidates carry truths.
    pub pr: Option<PrReport>,
    pub timings: Timings,
}

impl RepetitionRecord {
    pub fn accuracy(&self, method: Method) -> Option<f64> {
        self.results.iter().find(|r| r.method == method).map(|r| r.accuracy)
    }
}

/// Runs every configured method on one repetition. The base classifier is
/// trained once and shared between `stablemil` and `base_only`.
pub fn run_repetition(config: &ExperimentConfig, index: usize) -> Result<RepetitionRecord> {
    let seed = repetition_seed(config.seed, index);
    let mut timings = Timings::new();
    let data = timed(&mut timings, "data", || repetition_data(config, seed))?;
    let (train, test) = (&data.train, &data.test);
    train.require_both_classes()?;
    let needs_base = config.methods.iter().any(|m| matches!(m, Method::Stablemil | Method::BaseOnly));
    let base = if needs_base { Some(timed(&mut timings, "base", || train_base(train, config, seed))?) } else { None };

    let mut record = RepetitionRecord {
        index,
        seed,
        a_used: data.a_used,
        train_bags: train.len(),
        test_bags: test.len(),
        results: Vec::new(),
        tau: None,
        fallback: None,
        pool: None,
        pr: None,
        timings: Timings::new(),
    };
    for &method in &config.methods {
        let result = match method {
            Method::BaseOnly => {
                let base = base.as_ref().expect("base trained");
                let acc = timed(&mut timings, "base_eval", || accuracy(base, test))?;
                MethodResult { method, accuracy: acc, pool_size: None }
            }
            Method::Stablemil => {
                let run = stablemil_with_base(train, test, base.clone().expect("base trained"), config, seed)?;
                for (k, v) in &run.timings {
                    *timings.entry(k.clone()).or_insert(0.0) += v;
                }
                record.tau = Some(run.tau);
                record.fallback = Some(run.pool.fallback);
                record.pr = pr_curve(&run.pool.all_scores).ok();
                let size = run.pool.len();
                record.pool = Some(run.pool);
                MethodResult { method, accuracy: run.accuracy, pool_size: Some(size) }
            }
            Method::AllInstanceEmbedding => {
                let run = timed(&mut timings, "all_instance", || run_baseline(method, train, test, config, seed))?;
                MethodResult { method, accuracy: run.accuracy, pool_size: run.pool_size }
            }
        };
        record.results.push(result);
    }
    record.timings = timings;
    Ok(record)
}

/// Runs all repetitions on `jobs` worker threads (0 = rayon default).
/// Results do not depend on `jobs`.
pub fn run_repetitions(config: &ExperimentConfig, jobs: usize) -> Result<Vec<RepetitionRecord>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| (0..config.repetitions).into_par_iter().map(|i| run_repetition(config, i)).collect())
}
