//! Python bindings: data matrices, recoveries, dual bounds and sweeps.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qer::bounds::{self, DualPoint, IterativeOptions};
use qer::channels::{encoded_tensor_pow, PauliChannelSpec};
use qer::codes::syndrome_decomposition;
use qer::fidelity::{build_data_matrix, Ensemble};
use qer::recovery::{self, EigQerOptions};
use qer::sdp::{solve_qer_sdp, QerSdpProblem, SdpOptions};
use qer::sweep::{self, ChannelId, CodeId, ExperimentSpec};
use qer::QerError;

fn err(e: QerError) -> PyErr {
    match e {
        QerError::Parameter(_) | QerError::Dimension(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Data matrix of an encoded channel against the completely mixed source.
#[pyclass(name = "DataMatrix", module = "qer_py", frozen)]
struct PyDataMatrix {
    inner: qer::fidelity::DataMatrix,
    code: CodeId,
}

#[pymethods]
impl PyDataMatrix {
    /// `code` is five_qubit, steane, shor or random:N:K:SEED; `channel` is
    /// amplitude_damping, depolarizing or pure_state_rotation[:THETA].
    #[new]
    fn new(code: &str, channel: &str, param: f64) -> PyResult<Self> {
        let code: CodeId = code.parse().map_err(err)?;
        let channel: ChannelId = channel.parse().map_err(err)?;
        let enc = code.encoding().map_err(err)?;
        let ch = channel.qubit_channel(param).map_err(err)?;
        let encoded = encoded_tensor_pow(&ch, enc.n, &enc.u_c, None).map_err(err)?;
        let inner = build_data_matrix(&Ensemble::maximally_mixed(enc.d_s()), &encoded).map_err(err)?;
        Ok(PyDataMatrix { inner, code })
    }

    #[getter]
    fn d_s(&self) -> usize {
        self.inner.d_s
    }

    #[getter]
    fn d_c(&self) -> usize {
        self.inner.d_c
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    /// Row-major nested lists of complex entries.
    fn matrix(&self) -> Vec<Vec<Complex64>> {
        let m = &self.inner.c;
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
    }

    fn __repr__(&self) -> String {
        format!("DataMatrix(code={}, d_s={}, d_c={})", self.code, self.inner.d_s, self.inner.d_c)
    }
}

/// A recovery operation evaluated against one data matrix.
#[pyclass(name = "Recovery", module = "qer_py", frozen)]
struct PyRecovery {
    #[pyo3(get)]
    method: String,
    #[pyo3(get)]
    fidelity: f64,
    /// Operator elements or blocks.
    #[pyo3(get)]
    elements: usize,
    /// Running fidelity after each element, for EigQER.
    #[pyo3(get)]
    cumulative: Vec<f64>,
    partition: Vec<qer::opalg::CMatrix>,
    block_duals: Vec<(qer::opalg::CMatrix, qer::opalg::CMatrix)>,
}

#[pymethods]
impl PyRecovery {
    fn __repr__(&self) -> String {
        format!("Recovery(method={}, fidelity={:.10}, elements={})", self.method, self.fidelity, self.elements)
    }
}

/// A dual feasible point; `bound` upper-bounds every recovery when `feasible`.
#[pyclass(name = "DualBound", module = "qer_py", frozen)]
struct PyDualBound {
    #[pyo3(get)]
    kind: String,
    #[pyo3(get)]
    bound: f64,
    #[pyo3(get)]
    margin: f64,
    #[pyo3(get)]
    feasible: bool,
    #[pyo3(get)]
    updates: usize,
}

impl From<DualPoint> for PyDualBound {
    fn from(d: DualPoint) -> Self {
        PyDualBound { kind: d.provenance, bound: d.bound, margin: d.margin, feasible: d.feasible, updates: d.updates }
    }
}

#[pymethods]
impl PyDualBound {
    fn __repr__(&self) -> String {
        format!("DualBound(kind={}, bound={:.10}, margin={:.3e})", self.kind, self.bound, self.margin)
    }
}

#[pyfunction]
fn eig_qer(dm: &PyDataMatrix) -> PyResult<PyRecovery> {
    let r = recovery::eig_qer(&dm.inner, EigQerOptions::complete()).map_err(err)?;
    Ok(PyRecovery {
        method: "eigqer".into(),
        fidelity: r.fidelity(&dm.inner),
        elements: r.elements.len(),
        cumulative: r.cumulative(),
        partition: r.partition(),
        block_duals: Vec::new(),
    })
}

#[pyfunction]
fn block_eig_qer(dm: &PyDataMatrix, m: usize) -> PyResult<PyRecovery> {
    let r = recovery::block_eig_qer(&dm.inner, m, SdpOptions::default()).map_err(err)?;
    Ok(PyRecovery {
        method: format!("blockeig_m{m}"),
        fidelity: r.fidelity(&dm.inner),
        elements: r.blocks.len(),
        cumulative: Vec::new(),
        partition: r.partition(),
        block_duals: r.block_duals(&dm.inner),
    })
}

#[pyfunction]
fn standard_qec(dm: &PyDataMatrix) -> PyResult<PyRecovery> {
    let code = dm.code.stabilizer().ok_or_else(|| PyValueError::new_err("standard QEC needs a stabilizer code"))?;
    let r = recovery::standard_qec_recovery(&code).map_err(err)?;
    Ok(PyRecovery {
        method: "qec".into(),
        fidelity: r.fidelity(&dm.inner),
        elements: r.elements.len(),
        cumulative: r.cumulative(),
        partition: r.partition(),
        block_duals: Vec::new(),
    })
}

/// Optimal fidelity and the matching dual bound from the full SDP.
#[pyfunction]
fn optimal(dm: &PyDataMatrix) -> PyResult<(f64, f64)> {
    let sol = solve_qer_sdp(&QerSdpProblem::from_data(&dm.inner), SdpOptions::default()).map_err(err)?;
    Ok((sol.primal_value, sol.dual_value))
}

/// Dual bound from a recovery's partition: gersgorin, svd, iterative or
/// iterated_block (the last needs a BlockEigQER recovery).
#[pyfunction]
#[pyo3(signature = (dm, rec, kind = "iterative"))]
fn dual_bound(dm: &PyDataMatrix, rec: &PyRecovery, kind: &str) -> PyResult<PyDualBound> {
    let c = &dm.inner;
    let opts = IterativeOptions::default();
    let d = match kind {
        "gersgorin" => bounds::gersgorin_dual(c, &rec.partition),
        "svd" => bounds::svd_dual(c, &rec.partition),
        "iterative" => {
            let y0 = if rec.block_duals.is_empty() {
                bounds::init_block_lambda_max(c, &rec.partition)
            } else {
                bounds::init_block_sdp_duals(&rec.block_duals, c.d_c)
            };
            y0.and_then(|y0| bounds::iterative_dual(c, &y0, opts))
        }
        "iterated_block" => {
            if rec.block_duals.is_empty() {
                return Err(PyValueError::new_err("iterated_block needs a block recovery"));
            }
            bounds::iterated_block_dual(c, &rec.block_duals, opts)
        }
        _ => return Err(PyValueError::new_err(format!("unknown bound kind '{kind}'"))),
    };
    d.map(Into::into).map_err(err)
}

/// Maximum-likelihood recovery value and its dual bound for a stabilizer code
/// under independent depolarizing noise.
#[pyfunction]
fn pauli_certificate(code: &str, p: f64) -> PyResult<(f64, PyDualBound)> {
    let id: CodeId = code.parse().map_err(err)?;
    let code = id.stabilizer().ok_or_else(|| PyValueError::new_err("certificate needs a stabilizer code"))?;
    let decomp = syndrome_decomposition(&code).map_err(err)?;
    let spec = PauliChannelSpec::depolarizing(p).map_err(err)?.tensor_pow(code.n);
    let (cert, c) = bounds::pauli_certificate(&code, &decomp, &spec).map_err(err)?;
    Ok((cert.recovery.fidelity(&c), cert.dual.into()))
}

/// Runs a sweep and returns `(rows, violations)`; rows are dicts keyed by the
/// CSV columns plus `error`.
#[pyfunction]
#[pyo3(signature = (code, channel, grid = None, methods = vec![], bounds = vec![], threads = None))]
fn run_sweep<'py>(
    py: Python<'py>,
    code: &str,
    channel: &str,
    grid: Option<Vec<f64>>,
    methods: Vec<String>,
    bounds: Vec<String>,
    threads: Option<usize>,
) -> PyResult<(Vec<Bound<'py, PyDict>>, Vec<String>)> {
    let mut spec = ExperimentSpec::new(code.parse().map_err(err)?, channel.parse().map_err(err)?);
    if let Some(g) = grid {
        spec.grid = g;
    }
    spec.methods = methods.iter().map(|m| m.parse()).collect::<qer::Result<_>>().map_err(err)?;
    spec.bounds = bounds.iter().map(|b| b.parse()).collect::<qer::Result<_>>().map_err(err)?;
    spec.threads = threads;
    let res = py.detach(|| sweep::run_sweep(&spec)).map_err(err)?;
    let mut rows = Vec::with_capacity(res.rows.len());
    for r in res.rows {
        let d = PyDict::new(py);
        d.set_item("code", r.code)?;
        d.set_item("channel", r.channel)?;
        d.set_item("param_name", r.param_name)?;
        d.set_item("param_value", r.param_value)?;
        d.set_item("method", r.method)?;
        d.set_item("value", r.value)?;
        d.set_item("margin", r.margin)?;
        d.set_item("elements", r.elements)?;
        d.set_item("seconds", r.seconds)?;
        d.set_item("error", r.error)?;
        rows.push(d);
    }
    Ok((rows, res.violations))
}

/// Fidelity of one unencoded qubit sent through the channel.
#[pyfunction]
fn baseline_fidelity(channel: &str, param: f64) -> PyResult<f64> {
    let ch: ChannelId = channel.parse().map_err(err)?;
    let k = ch.qubit_channel(param).map_err(err)?;
    qer::fidelity::baseline_fidelity(&Ensemble::maximally_mixed(2), &k).map_err(err)
}

#[pymodule]
fn qer_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataMatrix>()?;
    m.add_class::<PyRecovery>()?;
    m.add_class::<PyDualBound>()?;
    m.add_function(wrap_pyfunction!(eig_qer, m)?)?;
    m.add_function(wrap_pyfunction!(block_eig_qer, m)?)?;
    m.add_function(wrap_pyfunction!(standard_qec, m)?)?;
    m.add_function(wrap_pyfunction!(optimal, m)?)?;
    m.add_function(wrap_pyfunction!(dual_bound, m)?)?;
    m.add_function(wrap_pyfunction!(pauli_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_fidelity, m)?)?;
    Ok(())
}
