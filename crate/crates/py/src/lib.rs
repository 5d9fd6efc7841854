//! Python bindings. Bags cross the boundary as plain lists; models and
//! pools can be round-tripped through their canonical JSON.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use stablemil_core::base::{accuracy, predict_bag, train_bag_classifier, BagClassifier, BaseConfig};
use stablemil_core::bench::{biased_split as split_population, generate_population, ShiftConfig};
use stablemil_core::embed::{embed_dataset, train_embedded_classifier, EmbeddedModel, EmbeddingConfig, EmbeddingSpec};
use stablemil_core::eval::{reproduce as run_reproduce, run_stablemil as run_pipeline, ExperimentConfig, Method};
use stablemil_core::mil::{load_dataset, save_dataset, Bag, DataFormat, Instance, InstanceRole, MilDataset};
use stablemil_core::select::{
    learn_stable_instances as learn_pool, score_instance as score_one, select_threshold as threshold, StablePool,
};
use stablemil_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn role(name: &str) -> PyResult<InstanceRole> {
    match name {
        "causal" => Ok(InstanceRole::Causal),
        "noisy" => Ok(InstanceRole::Noisy),
        "negative" => Ok(InstanceRole::Negative),
        "unknown" => Ok(InstanceRole::Unknown),
        other => Err(PyValueError::new_err(format!("unknown role `{other}`"))),
    }
}

/// A labeled collection of bags.
#[pyclass(module = "stablemil", frozen)]
struct Dataset {
    inner: MilDataset,
}

#[pymethods]
impl Dataset {
    /// Builds a dataset from `(id, label, instances[, truths])` tuples.
    #[new]
    fn new(bags: Vec<(String, u8, Vec<Vec<f64>>, Option<Vec<String>>)>) -> PyResult<Self> {
        let mut out = Vec::with_capacity(bags.len());
        for (id, label, instances, truths) in bags {
            let roles = match truths {
                Some(t) if t.len() != instances.len() => {
                    return Err(PyValueError::new_err(format!("bag {id}: truths and instances differ in length")))
                }
                Some(t) => t.iter().map(|s| role(s)).collect::<PyResult<Vec<_>>>()?,
                None => vec![InstanceRole::Unknown; instances.len()],
            };
            let instances = instances.into_iter().zip(roles).map(|(f, r)| Instance::with_truth(f, r)).collect();
            out.push(Bag::new(id, instances, label).map_err(py_err)?);
        }
        Ok(Self { inner: MilDataset::new(out).map_err(py_err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let path = std::path::Path::new(path);
        Ok(Self { inner: load_dataset(path, DataFormat::from_path(path)).map_err(py_err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let path = std::path::Path::new(path);
        save_dataset(&self.inner, path, DataFormat::from_path(path)).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.bags().iter().map(|b| b.id().to_string()).collect()
    }

    fn labels(&self) -> Vec<u32> {
        self.inner.labels().into_iter().map(u32::from).collect()
    }

    fn instances(&self, index: usize) -> PyResult<Vec<Vec<f64>>> {
        let bag = self.inner.bags().get(index).ok_or_else(|| PyValueError::new_err("bag index out of range"))?;
        Ok(bag.instances().iter().map(|i| i.features.clone()).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(bags={}, positive={}, dim={})",
            self.inner.len(),
            self.inner.num_positive(),
            self.inner.dim()
        )
    }
}

/// Samples a pinned shift-bench population (setting 1 or 2).
#[pyfunction]
#[pyo3(signature = (setting=1, seed=0, bags_total=None))]
fn generate(setting: u32, seed: u64, bags_total: Option<usize>) -> PyResult<Dataset> {
    let mut cfg = ShiftConfig::setting(setting).map_err(py_err)?;
    cfg.seed = seed;
    if let Some(m) = bags_total {
        cfg.bags_total = m;
    }
    Ok(Dataset { inner: generate_population(&cfg).map_err(py_err)? })
}

/// Selection-variable split; returns `(train, test)`.
#[pyfunction]
fn biased_split(population: &Dataset, a: f64, seed: u64) -> PyResult<(Dataset, Dataset)> {
    let split = split_population(&population.inner, a, seed).map_err(py_err)?;
    Ok((Dataset { inner: split.train }, Dataset { inner: split.test }))
}

/// Base bag classifier (Fisher-vector + linear SVM, or the truth oracle).
#[pyclass(module = "stablemil", frozen)]
struct Classifier {
    inner: BagClassifier,
}

#[pymethods]
impl Classifier {
    #[staticmethod]
    #[pyo3(signature = (train, seed=0, components=5, c=1.0))]
    fn train(train: &Dataset, seed: u64, components: usize, c: f64) -> PyResult<Self> {
        let mut cfg = BaseConfig::default();
        cfg.gmm.components = components;
        cfg.svm.c = c;
        Ok(Self { inner: train_bag_classifier(&train.inner, &cfg, seed).map_err(py_err)? })
    }

    #[staticmethod]
    fn oracle() -> Self {
        Self { inner: BagClassifier::Oracle }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: BagClassifier::from_json(text).map_err(py_err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind()
    }

    fn predict(&self, data: &Dataset) -> PyResult<Vec<u32>> {
        data.inner.bags().iter().map(|b| predict_bag(&self.inner, b).map(u32::from).map_err(py_err)).collect()
    }

    fn accuracy(&self, data: &Dataset) -> PyResult<f64> {
        accuracy(&self.inner, &data.inner).map_err(py_err)
    }
}

/// Stable instance pool with the full candidate score list.
#[pyclass(module = "stablemil", frozen)]
struct Pool {
    inner: StablePool,
}

#[pymethods]
impl Pool {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: StablePool::from_json(text).map_err(py_err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau
    }

    #[getter]
    fn fallback(&self) -> bool {
        self.inner.fallback
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn members(&self) -> Vec<Vec<f64>> {
        self.inner.members.iter().map(|m| m.instance.features.clone()).collect()
    }

    /// `(source_bag, index, score, truth)` for every candidate.
    fn scores(&self) -> Vec<(String, usize, f64, &'static str)> {
        self.inner
            .all_scores
            .iter()
            .map(|c| (c.source_bag.clone(), c.index, c.score, c.instance.truth.as_str()))
            .collect()
    }
}

/// Fraction of the negative bags of `data` predicted positive once `x` is appended.
#[pyfunction]
fn score_instance(x: Vec<f64>, data: &Dataset, classifier: &Classifier) -> PyResult<f64> {
    let negatives: Vec<Bag> = data.inner.negatives().cloned().collect();
    score_one(&Instance::new(x), &negatives, &classifier.inner).map_err(py_err)
}

#[pyfunction]
fn select_threshold(train: &Dataset, classifier: &Classifier, seed: u64) -> PyResult<f64> {
    let negatives: Vec<Bag> = train.inner.negatives().cloned().collect();
    threshold(&negatives, &classifier.inner, seed).map_err(py_err)
}

#[pyfunction]
fn learn_stable_instances(train: &Dataset, classifier: &Classifier, tau: f64) -> PyResult<Pool> {
    Ok(Pool { inner: learn_pool(&train.inner, &classifier.inner, tau).map_err(py_err)? })
}

/// Final classifier on pool embeddings.
#[pyclass(module = "stablemil", frozen)]
struct EmbeddingModel {
    inner: EmbeddedModel,
}

#[pymethods]
impl EmbeddingModel {
    #[staticmethod]
    #[pyo3(signature = (train, pool, seed=0, k=7))]
    fn train(train: &Dataset, pool: &Pool, seed: u64, k: usize) -> PyResult<Self> {
        let cfg = EmbeddingConfig { k, ..EmbeddingConfig::default() };
        let spec = EmbeddingSpec::from_pool(&pool.inner, &train.inner, &cfg).map_err(py_err)?;
        Ok(Self { inner: train_embedded_classifier(&train.inner, &spec, &cfg.grid, seed).map_err(py_err)? })
    }

    fn embed(&self, data: &Dataset) -> PyResult<Vec<Vec<f64>>> {
        Ok(embed_dataset(&data.inner, &self.inner.spec).map_err(py_err)?.vectors)
    }

    fn predict(&self, data: &Dataset) -> PyResult<Vec<u32>> {
        data.inner.bags().iter().map(|b| self.inner.predict(b).map(u32::from).map_err(py_err)).collect()
    }

    fn accuracy(&self, data: &Dataset) -> PyResult<f64> {
        self.inner.accuracy(&data.inner).map_err(py_err)
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }
}

fn experiment_config(config_toml: Option<&str>) -> PyResult<ExperimentConfig> {
    match config_toml {
        Some(text) => ExperimentConfig::from_toml(text).map_err(py_err),
        None => Ok(ExperimentConfig::default()),
    }
}

/// End-to-end pipeline on fixed data; returns accuracy, tau and pool size.
#[pyfunction]
#[pyo3(signature = (train, test, seed=0, config_toml=None))]
fn run_stablemil<'py>(
    py: Python<'py>,
    train: &Dataset,
    test: &Dataset,
    seed: u64,
    config_toml: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = experiment_config(config_toml)?;
    let run = py.detach(|| run_pipeline(&train.inner, &test.inner, &cfg, seed)).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("accuracy", run.accuracy)?;
    out.set_item("tau", run.tau)?;
    out.set_item("pool_size", run.pool.len())?;
    out.set_item("fallback", run.pool.fallback)?;
    Ok(out)
}

/// Repeated runs on a pinned setting; returns per-method accuracy lists
/// plus the report text.
#[pyfunction]
#[pyo3(signature = (setting=1, seed=0, repetitions=30, config_toml=None))]
fn reproduce<'py>(
    py: Python<'py>,
    setting: u32,
    seed: u64,
    repetitions: usize,
    config_toml: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = experiment_config(config_toml)?;
    cfg.shift = ShiftConfig::setting(setting).map_err(py_err)?;
    cfg.seed = seed;
    cfg.repetitions = repetitions;
    let report = py.detach(|| run_reproduce(&cfg, 0)).map_err(py_err)?;
    let out = PyDict::new(py);
    for m in Method::ALL {
        if let Some(s) = report.summary(m) {
            out.set_item(m.as_str(), s.accuracies.clone())?;
        }
    }
    out.set_item("config_hash", report.config_hash.clone())?;
    out.set_item("report", report.report_txt())?;
    Ok(out)
}

#[pymodule]
fn stablemil(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Classifier>()?;
    m.add_class::<Pool>()?;
    m.add_class::<EmbeddingModel>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(biased_split, m)?)?;
    m.add_function(wrap_pyfunction!(score_instance, m)?)?;
    m.add_function(wrap_pyfunction!(select_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(learn_stable_instances, m)?)?;
    m.add_function(wrap_pyfunction!(run_stablemil, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce, m)?)?;
    Ok(())
}
