//! Python bindings: datasets, identification, scoring and the HMM primitives.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use blpv::cli::{self, PipelineConfig};
use blpv::hmm::{self, EmissionTable, HmmParams, InitialDist, TransitionMatrix};
use blpv::io::{self, ResultFile};

fn py_err(e: blpv::Error) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.kind()))
}

/// Input/output record with an optional true scheduling path.
#[pyclass(name = "Dataset", module = "blpv_py")]
struct PyDataset {
    inner: blpv::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (u, y, p=None))]
    fn new(u: Vec<f64>, y: Vec<f64>, p: Option<Vec<f64>>) -> PyResult<Self> {
        let mut inner = blpv::Dataset::new(u, y).map_err(py_err)?;
        if let Some(p) = p {
            inner = inner.with_truth(p).map_err(py_err)?;
        }
        Ok(Self { inner })
    }

    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: io::read_dataset(&path).map_err(py_err)?,
        })
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        io::write_dataset(&path, &self.inner).map_err(py_err)
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.inner.u.clone()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y.clone()
    }

    #[getter]
    fn p(&self) -> Option<Vec<f64>> {
        self.inner.p_true.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Identification result: coefficients, chain, decoded path and trace.
#[pyclass(name = "IdentificationResult", module = "blpv_py")]
struct PyIdentification {
    inner: ResultFile,
}

#[pymethods]
impl PyIdentification {
    #[staticmethod]
    fn read_json(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: io::read_json(&path).map_err(py_err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        let bytes = io::to_json_bytes(&self.inner).map_err(py_err)?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }

    #[getter(H)]
    fn h(&self) -> Vec<Vec<f64>> {
        self.inner.h.clone()
    }

    #[getter(A)]
    fn a(&self) -> Vec<Vec<f64>> {
        self.inner.a.clone()
    }

    #[getter]
    fn pi(&self) -> Vec<f64> {
        self.inner.pi.clone()
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.inner.sigma2
    }

    #[getter]
    fn path(&self) -> Vec<f64> {
        self.inner.path.clone()
    }

    #[getter]
    fn loglik_trace(&self) -> Vec<f64> {
        self.inner.loglik_trace.clone()
    }

    #[getter]
    fn chosen_degree(&self) -> usize {
        self.inner.chosen_degree
    }

    #[getter]
    fn iterations_run(&self) -> usize {
        self.inner.iterations_run
    }
}

fn pipeline_config(config_json: Option<&str>, seed: Option<u64>) -> PyResult<PipelineConfig> {
    let cfg = match config_json {
        Some(text) => PipelineConfig::from_json(text.as_bytes()).map_err(py_err)?,
        None => PipelineConfig::default(),
    };
    Ok(cfg.with_seed(seed))
}

/// Benchmark record: sinusoidal input, piecewise-constant scheduling path.
#[pyfunction]
#[pyo3(signature = (n_samples=500, snr_db=21.57, seed=0))]
fn benchmark_dataset(n_samples: usize, snr_db: f64, seed: u64) -> PyResult<PyDataset> {
    Ok(PyDataset {
        inner: blpv::model::benchmark_generator(n_samples, snr_db, seed).map_err(py_err)?,
    })
}

/// Identifies a model from the training prefix of `dataset`. `config_json`
/// uses the same layout as the CLI config file.
#[pyfunction]
#[pyo3(signature = (dataset, config_json=None, seed=None))]
fn identify(py: Python<'_>, dataset: &PyDataset, config_json: Option<&str>, seed: Option<u64>) -> PyResult<PyIdentification> {
    let cfg = pipeline_config(config_json, seed)?;
    let data = dataset.inner.clone();
    let inner = py
        .detach(move || -> blpv::Result<ResultFile> {
            let n = data.len();
            let n_train = cfg.n_train.unwrap_or(n / 2);
            if n_train == 0 || n_train > n {
                return Err(blpv::Error::InvalidInput(format!("n_train {n_train} out of range")));
            }
            let train = if n_train < n {
                blpv::eval::split(&data, n_train)?.0
            } else {
                data
            };
            let result = blpv::qsvbw::run(&train, &cfg.identify)?;
            Ok(ResultFile::from_result(&result, Some(n_train)))
        })
        .map_err(py_err)?;
    Ok(PyIdentification { inner })
}

/// Scores a result on the held-out part of `dataset`; returns a dict.
#[pyfunction]
#[pyo3(signature = (result, dataset, benchmark_truth=false))]
fn evaluate<'py>(
    py: Python<'py>,
    result: &PyIdentification,
    dataset: &PyDataset,
    benchmark_truth: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let score = cli::evaluate(&result.inner, &dataset.inner, benchmark_truth).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("bfr_output", score.bfr_output)?;
    out.set_item("bfr_output_noise_free", score.bfr_output_noise_free)?;
    out.set_item("bfr_scheduling", score.bfr_scheduling)?;
    out.set_item("snr_db", score.snr_db)?;
    out.set_item("state_accuracy", score.state_accuracy)?;
    Ok(out)
}

#[pyfunction]
fn bfr(x_true: Vec<f64>, x_est: Vec<f64>) -> PyResult<f64> {
    blpv::eval::bfr(&x_true, &x_est).map_err(py_err)
}

#[pyfunction]
fn snr_db(y_clean: Vec<f64>, noise: Vec<f64>) -> PyResult<f64> {
    blpv::eval::snr_db(&y_clean, &noise).map_err(py_err)
}

fn hmm_inputs(a: Vec<Vec<f64>>, pi: Vec<f64>, log_b: Vec<Vec<f64>>) -> PyResult<(HmmParams, EmissionTable)> {
    let params = HmmParams::new(
        TransitionMatrix::from_rows(&a).map_err(py_err)?,
        InitialDist::new(pi).map_err(py_err)?,
        1.0,
    )
    .map_err(py_err)?;
    let n = log_b.len();
    let m = params.n_states();
    let emis = EmissionTable::new(n, m, log_b.concat()).map_err(py_err)?;
    Ok((params, emis))
}

/// Most probable state path for a chain `(A, pi)` and per-sample log
/// emission rows. Returns `(states, log_score)`.
#[pyfunction]
fn viterbi(a: Vec<Vec<f64>>, pi: Vec<f64>, log_b: Vec<Vec<f64>>) -> PyResult<(Vec<usize>, f64)> {
    let (params, emis) = hmm_inputs(a, pi, log_b)?;
    let v = hmm::viterbi(&params, &emis).map_err(py_err)?;
    Ok((v.states, v.log_score))
}

/// Log-likelihood of the emission rows under the chain `(A, pi)`.
#[pyfunction]
fn log_likelihood(a: Vec<Vec<f64>>, pi: Vec<f64>, log_b: Vec<Vec<f64>>) -> PyResult<f64> {
    let (params, emis) = hmm_inputs(a, pi, log_b)?;
    Ok(hmm::log_forward(&params, &emis).map_err(py_err)?.0)
}

#[pymodule]
fn blpv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyIdentification>()?;
    m.add_function(wrap_pyfunction!(benchmark_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(identify, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(bfr, m)?)?;
    m.add_function(wrap_pyfunction!(snr_db, m)?)?;
    m.add_function(wrap_pyfunction!(viterbi, m)?)?;
    m.add_function(wrap_pyfunction!(log_likelihood, m)?)?;
    Ok(())
}
