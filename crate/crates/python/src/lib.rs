//! Python module `energymimo`: consumption models, channel draws, the
//! precoders and the asymptotic antenna planner.

use energymimo::channel::{
    self, stream_rng, ChannelKind, ChannelRealization, FrequencyCorrelation, LosPhase, QosTargets,
};
use energymimo::model::{self, SolverKind, SystemKind};
use energymimo::oracle::{self, OracleSettings};
use energymimo::precoding::{self, FixedPointConfig, PrecoderSolution};
use energymimo::{asymptotic, CMatrix, Complex64, Error};
use pyo3::create_exception;
use pyo3::exceptions::{PyValueError, PyZeroDivisionError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(energymimo, InfeasibleError, PyValueError, "The QoS targets cannot be met under the power caps.");

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Infeasible(_) | Error::PowerConstraint { .. } => InfeasibleError::new_err(e.to_string()),
        Error::ZeroConsumption(_) => PyZeroDivisionError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

type PyRes<T> = PyResult<T>;

trait OrPy<T> {
    fn py(self) -> PyRes<T>;
}

impl<T> OrPy<T> for energymimo::Result<T> {
    fn py(self) -> PyRes<T> {
        self.map_err(py_err)
    }
}

/// Amplifier with efficiency growing as the square root of output power.
#[pyclass(name = "PaModel", frozen, from_py_object)]
#[derive(Clone)]
struct PyPaModel(model::PaModel);

#[pymethods]
impl PyPaModel {
    /// `backoff` is a linear ratio (10 for 10 dB).
    #[new]
    #[pyo3(signature = (p_max = 1.0, eta_max = 0.22, backoff = 10.0))]
    fn new(p_max: f64, eta_max: f64, backoff: f64) -> PyRes<Self> {
        model::PaModel::new(p_max, eta_max, backoff).py().map(Self)
    }

    #[getter]
    fn p_max(&self) -> f64 {
        self.0.p_max()
    }

    #[getter]
    fn eta_max(&self) -> f64 {
        self.0.eta_max()
    }

    #[getter]
    fn backoff(&self) -> f64 {
        self.0.backoff()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha()
    }

    /// Power drawn by the PAs for the given per-antenna output powers.
    fn consumed_power(&self, powers: Vec<f64>) -> PyRes<f64> {
        model::pa_consumed_power(&powers, &self.0).py()
    }

    fn __repr__(&self) -> String {
        format!("PaModel(p_max={}, eta_max={}, backoff={})", self.0.p_max(), self.0.eta_max(), self.0.backoff())
    }
}

/// Static, per-antenna circuit and PA consumption of the base station.
#[pyclass(name = "BsModel", frozen, from_py_object)]
#[derive(Clone)]
struct PyBsModel(model::BsModel);

#[pymethods]
impl PyBsModel {
    #[new]
    #[pyo3(signature = (p_fix = 15.0, circuit_per_antenna = 0.7, active_power_threshold = 1e-9))]
    fn new(p_fix: f64, circuit_per_antenna: f64, active_power_threshold: f64) -> PyRes<Self> {
        model::BsModel::new(p_fix, circuit_per_antenna, active_power_threshold).py().map(Self)
    }

    #[getter]
    fn p_fix(&self) -> f64 {
        self.0.p_fix
    }

    #[getter]
    fn circuit_per_antenna(&self) -> f64 {
        self.0.circuit_per_antenna
    }

    /// Full breakdown as a dict: p_tx, p_pas, p_bs, m_active, shares.
    fn report<'py>(&self, py: Python<'py>, powers: Vec<f64>, pa: &PyPaModel) -> PyRes<Bound<'py, PyDict>> {
        let r = model::bs_consumed_power(&powers, &pa.0, &self.0).py()?;
        report_dict(py, &r)
    }
}

fn report_dict<'py>(py: Python<'py>, r: &model::PowerReport) -> PyRes<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("p_tx", r.p_tx)?;
    d.set_item("p_pas", r.p_pas)?;
    d.set_item("p_bs", r.p_bs)?;
    d.set_item("m_active", r.m_active)?;
    d.set_item("shares", r.shares)?;
    Ok(d)
}

/// Channel realization: one K x M complex matrix per subcarrier.
#[pyclass(name = "Channel", frozen)]
struct PyChannel(ChannelRealization);

#[pymethods]
impl PyChannel {
    /// Builds a channel from nested lists indexed `[q][k][m]`.
    #[new]
    #[pyo3(signature = (matrices, large_scale = None))]
    fn new(matrices: Vec<Vec<Vec<Complex64>>>, large_scale: Option<Vec<f64>>) -> PyRes<Self> {
        let mats = matrices.iter().map(|m| to_matrix(m)).collect::<PyRes<Vec<_>>>()?;
        let k = mats.first().map_or(0, |m| m.nrows());
        let beta = large_scale.unwrap_or_else(|| vec![1.0; k]);
        ChannelRealization::new(mats, beta, ChannelKind::Rayleigh).py().map(Self)
    }

    /// i.i.d. Rayleigh draw with per-user large-scale gains `beta`.
    #[staticmethod]
    #[pyo3(signature = (m, q, beta, seed = 0))]
    fn rayleigh(m: usize, q: usize, beta: Vec<f64>, seed: u64) -> PyRes<Self> {
        let mut rng = stream_rng(seed, 0);
        channel::draw_rayleigh_channel(m, beta.len(), q, &beta, FrequencyCorrelation::Independent, &mut rng)
            .py()
            .map(Self)
    }

    /// Unit-modulus line-of-sight draw.
    #[staticmethod]
    #[pyo3(signature = (m, k, q, seed = 0))]
    fn line_of_sight(m: usize, k: usize, q: usize, seed: u64) -> PyRes<Self> {
        let mut rng = stream_rng(seed, 0);
        channel::draw_los_channel(m, k, q, LosPhase::Random, &mut rng).py().map(Self)
    }

    #[getter]
    fn antennas(&self) -> usize {
        self.0.antennas()
    }

    #[getter]
    fn users(&self) -> usize {
        self.0.users()
    }

    #[getter]
    fn subcarriers(&self) -> usize {
        self.0.subcarriers()
    }

    fn matrices(&self) -> Vec<Vec<Vec<Complex64>>> {
        self.0.per_subcarrier.iter().map(from_matrix).collect()
    }
}

fn to_matrix(rows: &[Vec<Complex64>]) -> PyRes<CMatrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("ragged matrix rows"));
    }
    Ok(CMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn from_matrix(m: &CMatrix) -> Vec<Vec<Complex64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Precoder output: per-subcarrier M x K matrices and per-antenna powers.
#[pyclass(name = "Precoder", frozen)]
struct PyPrecoder(PrecoderSolution);

#[pymethods]
impl PyPrecoder {
    #[getter]
    fn powers(&self) -> Vec<f64> {
        self.0.powers.clone()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.iterations
    }

    #[getter]
    fn converged(&self) -> bool {
        self.0.converged
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.0.residual
    }

    #[getter]
    fn active_set(&self) -> Vec<usize> {
        self.0.active_set.clone()
    }

    #[getter]
    fn p_tx(&self) -> f64 {
        self.0.p_tx()
    }

    /// Matrices indexed `[q][m][k]`.
    fn matrices(&self) -> Vec<Vec<Vec<Complex64>>> {
        self.0.matrices.iter().map(from_matrix).collect()
    }

    fn report<'py>(&self, py: Python<'py>, pa: &PyPaModel, bs: &PyBsModel) -> PyRes<Bound<'py, PyDict>> {
        report_dict(py, &self.0.report(&pa.0, &bs.0).py()?)
    }
}

fn qos(h: &PyChannel, gamma: Vec<f64>, noise_power: f64) -> PyRes<QosTargets> {
    QosTargets::new(gamma, noise_power, h.0.subcarriers()).py()
}

/// Conventional zero-forcing precoder.
#[pyfunction]
fn zf_precoder(h: &PyChannel, gamma: Vec<f64>, noise_power: f64) -> PyRes<PyPrecoder> {
    precoding::zf_precoder(&h.0, &qos(h, gamma, noise_power)?).py().map(PyPrecoder)
}

/// Fixed-point precoder minimizing the PA consumption under ZF.
#[pyfunction]
#[pyo3(signature = (h, gamma, noise_power, tolerance = 1e-4, max_iterations = 2000))]
fn min_pa_precoder(
    py: Python<'_>,
    h: &PyChannel,
    gamma: Vec<f64>,
    noise_power: f64,
    tolerance: f64,
    max_iterations: usize,
) -> PyRes<PyPrecoder> {
    let targets = qos(h, gamma, noise_power)?;
    let cfg = FixedPointConfig { tolerance, max_iterations, ..Default::default() };
    py.detach(|| precoding::min_pa_precoder(&h.0, &targets, &cfg)).py().map(PyPrecoder)
}

/// ZF residual `max |H_q W_q - target|` of a precoder on a channel.
#[pyfunction]
fn zf_residual(h: &PyChannel, gamma: Vec<f64>, noise_power: f64, precoder: &PyPrecoder) -> PyRes<f64> {
    Ok(precoding::zf_residual(&h.0, &qos(h, gamma, noise_power)?, &precoder.0))
}

/// Single-user narrowband optimum: all power on the strongest antenna.
#[pyfunction]
fn single_user_precoder(h: Vec<Complex64>, gamma: f64, sigma: f64) -> PyRes<PyPrecoder> {
    precoding::single_user_narrowband_precoder(&h, gamma, sigma).py().map(PyPrecoder)
}

/// Single-user narrowband precoder that saturates antennas up to `p_max`.
#[pyfunction]
fn saturating_precoder(h: Vec<Complex64>, gamma: f64, sigma: f64, p_max: f64) -> PyRes<PyPrecoder> {
    precoding::single_user_saturating_precoder(&h, gamma, sigma, p_max).py().map(PyPrecoder)
}

/// Brute-force minimum PA consumption for small instances.
#[pyfunction]
#[pyo3(signature = (h, gamma, noise_power, pa, starts = 8, seed = 0))]
fn bruteforce_min_pa(
    py: Python<'_>,
    h: &PyChannel,
    gamma: Vec<f64>,
    noise_power: f64,
    pa: &PyPaModel,
    starts: usize,
    seed: u64,
) -> PyRes<(Vec<f64>, f64)> {
    let targets = qos(h, gamma, noise_power)?;
    let settings = OracleSettings { starts, seed, ..Default::default() };
    let r = py.detach(|| oracle::solve_min_pa_bruteforce(&h.0, &targets, &pa.0, &settings)).py()?;
    Ok((r.powers, r.objective))
}

#[pyfunction]
fn large_scale_fading(distance_m: f64) -> PyRes<f64> {
    channel::large_scale_fading(distance_m).py()
}

#[pyfunction]
#[pyo3(signature = (beta, reference = channel::DEFAULT_SINR_REFERENCE))]
fn target_sinr(beta: f64, reference: f64) -> f64 {
    channel::target_sinr(beta, reference)
}

#[pyfunction]
fn trace_term(beta: Vec<f64>, gamma: Vec<f64>, noise_power: f64) -> PyRes<f64> {
    asymptotic::trace_term(&beta, &gamma, noise_power).py()
}

/// Large-Q PA consumption with `m_active` active antennas.
#[pyfunction]
fn asymptotic_pa_power(m_active: f64, k: usize, trace: f64, pa: &PyPaModel) -> PyRes<f64> {
    asymptotic::asymptotic_pa_power(m_active, k, trace, &pa.0).py()
}

#[pyfunction]
fn asymptotic_bs_power(m_active: f64, k: usize, trace: f64, pa: &PyPaModel, bs: &PyBsModel) -> PyRes<f64> {
    asymptotic::asymptotic_bs_power(m_active, k, trace, &pa.0, &bs.0).py()
}

/// Root `x > k` of `x (x - k)^3 = constant`.
#[pyfunction]
fn solve_quartic(k: usize, constant: f64) -> PyRes<f64> {
    asymptotic::solve_quartic(k, constant).py()
}

/// Optimal number of active antennas; raises InfeasibleError when even `m`
/// antennas break the per-antenna cap.
#[pyfunction]
fn plan_antennas<'py>(
    py: Python<'py>,
    m: usize,
    k: usize,
    trace: f64,
    pa: &PyPaModel,
    bs: &PyBsModel,
) -> PyRes<Bound<'py, PyDict>> {
    let p = asymptotic::optimal_ma_constrained(m, k, trace, &pa.0, &bs.0, pa.0.p_max()).py()?;
    let d = PyDict::new(py);
    d.set_item("m_tilde", p.m_tilde)?;
    d.set_item("m_hat", p.m_hat)?;
    d.set_item("m_dagger", p.m_dagger)?;
    d.set_item("p_bar", p.p_bar)?;
    d.set_item("p_pas_bar", p.p_pas_bar)?;
    d.set_item("p_bs_bar", p.p_bs_bar)?;
    Ok(d)
}

/// Exhaustive-search counterpart of `plan_antennas`.
#[pyfunction]
fn grid_antennas(m: usize, k: usize, trace: f64, pa: &PyPaModel, bs: &PyBsModel) -> PyRes<usize> {
    oracle::grid_min_bs(m, k, trace, &pa.0, &bs.0, pa.0.p_max()).py()
}

/// Flop estimate; `system` is wideband, narrowband or asymptotic and
/// `solver` is proposed or conventional.
#[pyfunction]
#[pyo3(signature = (system, solver, k, m, q, iterations = 1))]
fn estimate_flops(system: &str, solver: &str, k: usize, m: usize, q: usize, iterations: usize) -> PyRes<f64> {
    let system = match system {
        "wideband" => SystemKind::Wideband,
        "narrowband" => SystemKind::Narrowband,
        "asymptotic" => SystemKind::Asymptotic,
        other => return Err(PyValueError::new_err(format!("unknown system `{other}`"))),
    };
    let solver = match solver {
        "proposed" => SolverKind::Proposed,
        "conventional" => SolverKind::Conventional,
        other => return Err(PyValueError::new_err(format!("unknown solver `{other}`"))),
    };
    Ok(model::estimate_flops(system, solver, k, m, q, iterations))
}

#[pyfunction]
fn dbm_to_watts(dbm: f64) -> f64 {
    energymimo::dbm_to_watts(dbm)
}

#[pymodule]
#[pyo3(name = "energymimo")]
fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add_class::<PyPaModel>()?;
    m.add_class::<PyBsModel>()?;
    m.add_class::<PyChannel>()?;
    m.add_class::<PyPrecoder>()?;
    m.add_function(wrap_pyfunction!(zf_precoder, m)?)?;
    m.add_function(wrap_pyfunction!(min_pa_precoder, m)?)?;
    m.add_function(wrap_pyfunction!(zf_residual, m)?)?;
    m.add_function(wrap_pyfunction!(single_user_precoder, m)?)?;
    m.add_function(wrap_pyfunction!(saturating_precoder, m)?)?;
    m.add_function(wrap_pyfunction!(bruteforce_min_pa, m)?)?;
    m.add_function(wrap_pyfunction!(large_scale_fading, m)?)?;
    m.add_function(wrap_pyfunction!(target_sinr, m)?)?;
    m.add_function(wrap_pyfunction!(trace_term, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_pa_power, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_bs_power, m)?)?;
    m.add_function(wrap_pyfunction!(solve_quartic, m)?)?;
    m.add_function(wrap_pyfunction!(plan_antennas, m)?)?;
    m.add_function(wrap_pyfunction!(grid_antennas, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_flops, m)?)?;
    m.add_function(wrap_pyfunction!(dbm_to_watts, m)?)?;
    Ok(())
}
