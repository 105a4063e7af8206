//! Python bindings: graphs, training configs, ensembles and metrics.
//!
//! ```python
//! import rfgnn_py as rf
//! g = rf.Graph.synthetic(n=300, seed=1)
//! ens = rf.Ensemble.train(g, rf.TrainConfig(preset="twibot20", epochs=50))
//! print(ens.evaluate(g)["accuracy"])
//! ```

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rfgnn::backbones::BackboneKind;
use rfgnn::ensemble::{self as ens, EnsembleModel, Variant};
use rfgnn::experiment::{self, RunConfig};
use rfgnn::graphstore::{self as gs, MultiRelationGraph, SyntheticParams};
use rfgnn::metrics::{self, Confusion, RunMetrics};
use rfgnn::numkit::DenseMatrix;

fn py_err(e: rfgnn::Error) -> PyErr {
    match e {
        rfgnn::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        rfgnn::Error::Parameter(_) | rfgnn::Error::Dimension { .. } | rfgnn::Error::Load { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn parse<T: std::str::FromStr<Err = rfgnn::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn metrics_dict<'py>(py: Python<'py>, m: &RunMetrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("accuracy", m.accuracy)?;
    d.set_item("precision", m.precision)?;
    d.set_item("recall", m.recall)?;
    d.set_item("f1", m.f1)?;
    if let Some(c) = &m.confusion {
        d.set_item("tp", c.tp)?;
        d.set_item("tn", c.tn)?;
        d.set_item("fp", c.fp)?;
        d.set_item("fn", c.fn_)?;
    }
    Ok(d)
}

/// A multi-relation attributed graph with labels and train/val/test splits.
#[pyclass(frozen)]
struct Graph {
    inner: MultiRelationGraph,
}

#[pymethods]
impl Graph {
    /// Two-block stochastic block model with informative, redundant and noise features.
    #[staticmethod]
    #[pyo3(signature = (n=600, classes=2, relations=1, p_in=None, p_out=None, informative=16, redundant=32, noise_dims=80, separation=None, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn synthetic(
        n: usize,
        classes: usize,
        relations: usize,
        p_in: Option<f64>,
        p_out: Option<f64>,
        informative: usize,
        redundant: usize,
        noise_dims: usize,
        separation: Option<f64>,
        seed: u64,
    ) -> PyResult<Self> {
        let d = SyntheticParams::default();
        let p = SyntheticParams {
            n,
            classes,
            relations,
            p_in: p_in.unwrap_or(d.p_in),
            p_out: p_out.unwrap_or(d.p_out),
            informative_dims: informative,
            redundant_dims: redundant,
            noise_dims,
            class_separation: separation.unwrap_or(d.class_separation),
            seed,
            ..d
        };
        Ok(Self {
            inner: gs::generate_synthetic(&p).map_err(py_err)?,
        })
    }

    /// Reads a dataset directory (manifest.json, features.csv, edges.csv, labels.csv, splits.json).
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: gs::load_dataset(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        gs::save_dataset(&self.inner, path).map_err(py_err)
    }

    /// A copy with `fraction` of the feature entries perturbed by unit Gaussian noise.
    fn with_noise(&self, fraction: f64, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: gs::inject_feature_noise(&self.inner, fraction, seed).map_err(py_err)?,
        })
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn num_features(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn num_relations(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    fn features(&self) -> Vec<Vec<f64>> {
        rows(self.inner.features())
    }

    fn labels(&self) -> Vec<usize> {
        self.inner.labels().to_vec()
    }

    fn edges(&self, relation: usize) -> PyResult<Vec<(usize, usize)>> {
        if relation >= self.inner.k() {
            return Err(PyValueError::new_err(format!(
                "relation {relation} out of range (graph has {})",
                self.inner.k()
            )));
        }
        Ok(self.inner.edges(relation).to_vec())
    }

    /// `{"train": [...], "val": [...], "test": [...]}`
    fn splits<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.splits();
        let d = PyDict::new(py);
        d.set_item("train", s.train.clone())?;
        d.set_item("val", s.val.clone())?;
        d.set_item("test", s.test.clone())?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(nodes={}, features={}, relations={}, edges={}, classes={})",
            self.inner.n(),
            self.inner.m(),
            self.inner.k(),
            self.inner.num_edges(),
            self.inner.num_classes()
        )
    }
}

/// Training hyperparameters. Unset keywords keep the library defaults,
/// after applying `preset` when one is named.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct TrainConfig {
    inner: ens::TrainConfig,
}

#[pymethods]
impl TrainConfig {
    #[new]
    #[pyo3(signature = (*, preset=None, branches=None, alpha=None, beta=None, gamma=None, epochs=None, lr=None, weight_decay=None, backbone=None, layers=None, hidden=None, out_dim=None, dropout=None, sgc_power=None, seed=None, best_val=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        preset: Option<&str>,
        branches: Option<usize>,
        alpha: Option<f64>,
        beta: Option<f64>,
        gamma: Option<f64>,
        epochs: Option<usize>,
        lr: Option<f64>,
        weight_decay: Option<f64>,
        backbone: Option<&str>,
        layers: Option<usize>,
        hidden: Option<usize>,
        out_dim: Option<usize>,
        dropout: Option<f64>,
        sgc_power: Option<usize>,
        seed: Option<u64>,
        best_val: bool,
    ) -> PyResult<Self> {
        let mut c = match preset {
            Some(name) => ens::TrainConfig::preset(name).map_err(py_err)?,
            None => ens::TrainConfig::default(),
        };
        let b = &mut c.backbone;
        if let Some(kind) = backbone {
            b.kind = parse::<BackboneKind>(kind)?;
        }
        b.layers = layers.unwrap_or(b.layers);
        b.hidden = hidden.unwrap_or(b.hidden);
        b.out_dim = out_dim.unwrap_or(b.out_dim);
        b.dropout = dropout.unwrap_or(b.dropout);
        b.sgc_power = sgc_power.unwrap_or(b.sgc_power);
        c.branches = branches.unwrap_or(c.branches);
        c.alpha = alpha.unwrap_or(c.alpha);
        c.beta = beta.unwrap_or(c.beta);
        c.gamma = gamma.unwrap_or(c.gamma);
        c.epochs = epochs.unwrap_or(c.epochs);
        c.lr = lr.unwrap_or(c.lr);
        c.weight_decay = weight_decay.unwrap_or(c.weight_decay);
        c.master_seed = seed.unwrap_or(c.master_seed);
        c.select_best_val = best_val;
        c.validate().map_err(py_err)?;
        Ok(Self { inner: c })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: ens::TrainConfig = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.inner).expect("serializable config")
    }

    #[getter]
    fn branches(&self) -> usize {
        self.inner.branches
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn epochs(&self) -> usize {
        self.inner.epochs
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.master_seed
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "TrainConfig(branches={}, alpha={}, beta={}, gamma={}, epochs={}, backbone={}, seed={})",
            c.branches,
            c.alpha,
            c.beta,
            c.gamma,
            c.epochs,
            c.backbone.kind.as_str(),
            c.master_seed
        )
    }
}

/// A trained ensemble of S branches.
#[pyclass(frozen)]
struct Ensemble {
    inner: EnsembleModel,
}

#[pymethods]
impl Ensemble {
    /// Trains every branch; `variant` is "e", "es" or "full". Releases the GIL while training.
    #[staticmethod]
    #[pyo3(signature = (graph, config, variant="full"))]
    fn train(py: Python<'_>, graph: &Graph, config: TrainConfig, variant: &str) -> PyResult<Self> {
        let variant: Variant = parse(variant)?;
        let g = &graph.inner;
        let inner = py
            .detach(|| ens::train_ensemble(g, &config.inner, variant))
            .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ens::load_ensemble(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        ens::save_ensemble(&self.inner, &path).map_err(py_err)
    }

    /// Summed branch probabilities (rows sum to S) and the voted class per node.
    fn predict(&self, py: Python<'_>, graph: &Graph) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
        let g = &graph.inner;
        let (scores, labels) = py.detach(|| ens::ensemble_predict(g, &self.inner)).map_err(py_err)?;
        Ok((rows(&scores), labels))
    }

    /// Test-split metrics as a dict.
    fn evaluate<'py>(&self, py: Python<'py>, graph: &Graph) -> PyResult<Bound<'py, PyDict>> {
        let g = &graph.inner;
        let run = py
            .detach(|| experiment::ensemble_run(g, &self.inner, self.inner.config.master_seed))
            .map_err(py_err)?;
        let d = metrics_dict(py, &run.metrics)?;
        d.set_item("branch_accuracies", run.branch_accuracies)?;
        Ok(d)
    }

    /// Pairwise mean row cosine between branch outputs.
    fn branch_similarity(&self, py: Python<'_>, graph: &Graph) -> PyResult<Vec<Vec<f64>>> {
        let g = &graph.inner;
        let m = py.detach(|| ens::branch_similarity(&self.inner, g)).map_err(py_err)?;
        Ok(rows(&m))
    }

    /// Aligned embedding of branch `index` for every node.
    fn embedding(&self, graph: &Graph, index: usize) -> PyResult<Vec<Vec<f64>>> {
        let b = self
            .inner
            .branches
            .get(index)
            .ok_or_else(|| PyValueError::new_err(format!("branch {index} out of range (ensemble has {})", self.inner.len())))?;
        let z = ens::branch_embedding(&graph.inner, &b.spec, &b.model).map_err(py_err)?;
        Ok(rows(&z))
    }

    #[getter]
    fn variant(&self) -> &'static str {
        self.inner.variant.as_str()
    }

    #[getter]
    fn config(&self) -> TrainConfig {
        TrainConfig {
            inner: self.inner.config.clone(),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Ensemble(variant={}, branches={})", self.inner.variant.as_str(), self.inner.len())
    }
}

/// Trains a single backbone plus head on the whole training split and
/// returns its predicted class per node.
#[pyfunction]
fn baseline_predict(py: Python<'_>, graph: &Graph, config: TrainConfig) -> PyResult<Vec<usize>> {
    let g = &graph.inner;
    let probs = py
        .detach(|| ens::train_standalone(g, &config.inner).and_then(|m| ens::standalone_predict(g, &m)))
        .map_err(py_err)?;
    Ok(probs.argmax_rows())
}

/// Accuracy, precision, recall and F1 of a binary confusion matrix.
#[pyfunction]
#[pyo3(signature = (tp, tn, fp, fn_))]
fn metrics_from_confusion<'py>(py: Python<'py>, tp: u64, tn: u64, fp: u64, fn_: u64) -> PyResult<Bound<'py, PyDict>> {
    let m = metrics::metrics_from_confusion(&Confusion { tp, tn, fp, fn_ });
    let d = PyDict::new(py);
    d.set_item("accuracy", m.accuracy)?;
    d.set_item("precision", m.precision)?;
    d.set_item("recall", m.recall)?;
    d.set_item("f1", m.f1)?;
    Ok(d)
}

/// Scores predictions on the given node subset.
#[pyfunction]
fn evaluate_predictions<'py>(
    py: Python<'py>,
    pred: Vec<usize>,
    labels: Vec<usize>,
    nodes: Vec<usize>,
    num_classes: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let m = metrics::evaluate(&pred, &labels, &nodes, num_classes).map_err(py_err)?;
    metrics_dict(py, &m)
}

/// Runs the baseline/E/ES/FULL comparison from a JSON run config and
/// returns the report as JSON.
#[pyfunction]
fn ablate(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg = RunConfig::from_json_str(config_json).map_err(py_err)?;
    let outcome = py.detach(|| experiment::ablate(&cfg)).map_err(py_err)?;
    if let Some(f) = outcome.failures.first() {
        return Err(PyRuntimeError::new_err(format!("seed {} ({}) failed: {}", f.seed, f.context, f.message)));
    }
    Ok(outcome.report.to_json())
}

#[pymodule]
fn rfgnn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graph>()?;
    m.add_class::<TrainConfig>()?;
    m.add_class::<Ensemble>()?;
    m.add_function(wrap_pyfunction!(baseline_predict, m)?)?;
    m.add_function(wrap_pyfunction!(metrics_from_confusion, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_predictions, m)?)?;
    m.add_function(wrap_pyfunction!(ablate, m)?)?;
    Ok(())
}
