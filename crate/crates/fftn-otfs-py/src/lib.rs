//! Python bindings for the FTN-OTFS link simulator.
//!
//! Exposes the main types and operations of the core crate as the
//! `fftn_otfs` extension module: frame configuration, the delay-Doppler
//! transforms, effective-channel construction, the transmit/detect chain,
//! scenario-level sweeps (as CSV text, matching the CLI), the link-budget
//! scalars, and the self-check suite.
//!
//! Grids cross the boundary as NumPy arrays with the delay axis first;
//! serialized vectors are delay-fastest, i.e. `grid.flatten(order="F")`.

use ndarray::Array1;
use numpy::{
    Complex64, IntoPyArray, PyArray1, PyArray2, PyReadonlyArray1, PyReadonlyArray2,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fftn_otfs::adapt::{self, Lut};
use fftn_otfs::channel::DelayQuant;
use fftn_otfs::detector;
use fftn_otfs::frame::{self, FrameConfig, Modulation};
use fftn_otfs::linkbudget::{self, GeometryConfig};
use fftn_otfs::modem::{self, DdObservation, EffectiveChannel, PulseMode};
use fftn_otfs::pulse::{dd_noise_covariance, DdNoiseCov};
use fftn_otfs::scenario::{ChannelModel, Scenario, SweepGrid};
use fftn_otfs::sweep;
use fftn_otfs::transform;

fn py_err(e: fftn_otfs::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

// ---------------------------------------------------------------------------
// Frame configuration
// ---------------------------------------------------------------------------

/// Dimensions and waveform parameters of one frame.
#[pyclass(module = "fftn_otfs", frozen)]
struct Frame {
    inner: FrameConfig,
}

impl Frame {
    fn cov(&self) -> PyResult<DdNoiseCov> {
        dd_noise_covariance(&self.inner).map_err(py_err)
    }

    /// Wraps a NumPy matrix as an effective channel for this frame.
    fn wrap_heff(&self, h: PyReadonlyArray2<'_, Complex64>) -> PyResult<EffectiveChannel> {
        let h = h.as_array().to_owned();
        let mn = self.inner.mn();
        if h.nrows() != mn || h.ncols() != mn {
            return Err(PyValueError::new_err(format!(
                "channel matrix must be {mn}x{mn} for this frame, got {}x{}",
                h.nrows(),
                h.ncols()
            )));
        }
        Ok(EffectiveChannel {
            h,
            path_gain: 1.0,
            m: self.inner.m,
            n: self.inner.n,
            delta_tau_s: self.inner.delay_resolution_s(),
            delta_nu_hz: self.inner.doppler_resolution_hz(),
        })
    }
}

#[pymethods]
impl Frame {
    #[new]
    #[pyo3(signature = (m, n, *, delta_f_hz=15e3, alpha=1.0, beta=0.3, l_span=6, oversampling=8, modulation="qpsk"))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        m: usize,
        n: usize,
        delta_f_hz: f64,
        alpha: f64,
        beta: f64,
        l_span: usize,
        oversampling: usize,
        modulation: &str,
    ) -> PyResult<Self> {
        let modulation = match modulation.to_ascii_lowercase().as_str() {
            "bpsk" => Modulation::Bpsk,
            "qpsk" => Modulation::Qpsk,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown modulation '{other}' (expected 'bpsk' or 'qpsk')"
                )))
            }
        };
        let inner = FrameConfig {
            m,
            n,
            delta_f_hz,
            alpha,
            beta,
            l_span,
            oversampling,
            modulation,
        };
        inner.validate().map_err(py_err)?;
        Ok(Frame { inner })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn delta_f_hz(&self) -> f64 {
        self.inner.delta_f_hz
    }

    #[getter]
    fn modulation(&self) -> &'static str {
        match self.inner.modulation {
            Modulation::Bpsk => "bpsk",
            Modulation::Qpsk => "qpsk",
        }
    }

    /// Grid size `M * N`.
    #[getter]
    fn mn(&self) -> usize {
        self.inner.mn()
    }

    /// Payload bits per frame.
    #[getter]
    fn n_bits(&self) -> usize {
        self.inner.n_bits()
    }

    /// Delay resolution `1 / (M delta_f)` in seconds.
    #[getter]
    fn delay_resolution_s(&self) -> f64 {
        self.inner.delay_resolution_s()
    }

    /// Doppler resolution of the compressed frame in Hz.
    #[getter]
    fn doppler_resolution_hz(&self) -> f64 {
        self.inner.doppler_resolution_hz()
    }

    /// Frame duration at the compressed symbol interval, in seconds.
    #[getter]
    fn frame_duration_s(&self) -> f64 {
        self.inner.ftn_frame_duration_s()
    }

    /// Default Doppler spread (two Doppler bins) in Hz.
    #[getter]
    fn default_nu_max_hz(&self) -> f64 {
        self.inner.default_nu_max_hz()
    }

    fn __repr__(&self) -> String {
        format!(
            "Frame(m={}, n={}, delta_f_hz={}, alpha={}, beta={}, l_span={}, oversampling={}, modulation='{}')",
            self.inner.m,
            self.inner.n,
            self.inner.delta_f_hz,
            self.inner.alpha,
            self.inner.beta,
            self.inner.l_span,
            self.inner.oversampling,
            self.modulation()
        )
    }
}

// ---------------------------------------------------------------------------
// Transforms and bit mapping
// ---------------------------------------------------------------------------

/// Maps a delay-Doppler grid to the time-frequency grid (unitary).
#[pyfunction]
fn isfft<'py>(
    py: Python<'py>,
    grid: PyReadonlyArray2<'py, Complex64>,
) -> Bound<'py, PyArray2<Complex64>> {
    transform::isfft(&grid.as_array().to_owned()).into_pyarray(py)
}

/// Maps a time-frequency grid back to the delay-Doppler grid (unitary).
#[pyfunction]
fn sfft<'py>(
    py: Python<'py>,
    grid: PyReadonlyArray2<'py, Complex64>,
) -> Bound<'py, PyArray2<Complex64>> {
    transform::sfft(&grid.as_array().to_owned()).into_pyarray(py)
}

/// Maps payload bits onto a delay-Doppler symbol grid.
#[pyfunction]
fn map_bits<'py>(
    py: Python<'py>,
    frame: &Frame,
    bits: Vec<u8>,
) -> PyResult<Bound<'py, PyArray2<Complex64>>> {
    let grid = frame::map_bits(&bits, &frame.inner).map_err(py_err)?;
    Ok(grid.into_pyarray(py))
}

/// Hard-demaps a delay-Doppler symbol grid back to bits.
#[pyfunction]
fn demap_grid(frame: &Frame, grid: PyReadonlyArray2<'_, Complex64>) -> Vec<u8> {
    frame::demap_symbols(&grid.as_array().to_owned(), &frame.inner)
}

// ---------------------------------------------------------------------------
// Channel construction and the transmit/detect chain
// ---------------------------------------------------------------------------

/// Draws one channel realization and builds its effective delay-Doppler
/// matrix (`MN x MN`, acting on delay-fastest serialized grids).
#[pyfunction]
#[pyo3(signature = (frame, model, *, nu_max_hz=None, seed=0))]
fn effective_channel<'py>(
    py: Python<'py>,
    frame: &Frame,
    model: &str,
    nu_max_hz: Option<f64>,
    seed: u64,
) -> PyResult<Bound<'py, PyArray2<Complex64>>> {
    let model = ChannelModel::resolve(model).map_err(py_err)?;
    let nu = nu_max_hz.unwrap_or_else(|| frame.inner.default_nu_max_hz());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chan = model
        .realize(&frame.inner, nu, DelayQuant::default(), &mut rng)
        .map_err(py_err)?;
    let heff = modem::build_heff(&frame.inner, &chan, 0.0, PulseMode::Rrc).map_err(py_err)?;
    Ok(heff.h.into_pyarray(py))
}

/// Effective channel of the deterministic single-tap line-of-sight
/// reference (no randomness).
#[pyfunction]
fn pure_los_effective_channel<'py>(
    py: Python<'py>,
    frame: &Frame,
) -> PyResult<Bound<'py, PyArray2<Complex64>>> {
    let chan = fftn_otfs::channel::pure_los_realization();
    let heff = modem::build_heff(&frame.inner, &chan, 0.0, PulseMode::Rrc).map_err(py_err)?;
    Ok(heff.h.into_pyarray(py))
}

/// Passes a serialized delay-Doppler vector through the channel and adds
/// colored noise of variance `sigma2` (matched-filter correlation included).
#[pyfunction]
#[pyo3(signature = (frame, h, x, sigma2, *, seed=0))]
fn transmit<'py>(
    py: Python<'py>,
    frame: &Frame,
    h: PyReadonlyArray2<'py, Complex64>,
    x: PyReadonlyArray1<'py, Complex64>,
    sigma2: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyArray1<Complex64>>> {
    let heff = frame.wrap_heff(h)?;
    let cov = frame.cov()?;
    let x = x.as_array().to_owned();
    if x.len() != frame.inner.mn() {
        return Err(PyValueError::new_err(format!(
            "input vector must have length {}, got {}",
            frame.inner.mn(),
            x.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs = modem::transmit_through(&heff, &x, sigma2, &cov, &mut rng);
    Ok(obs.y.into_pyarray(py))
}

/// LMMSE detection with full error statistics.
///
/// Returns `(x_hat, mse, sinr)`; the detector accounts for the correlated
/// matched-filter noise of the compressed pulse train.
#[pyfunction]
fn detect<'py>(
    py: Python<'py>,
    frame: &Frame,
    h: PyReadonlyArray2<'py, Complex64>,
    y: PyReadonlyArray1<'py, Complex64>,
    sigma2: f64,
) -> PyResult<(
    Bound<'py, PyArray1<Complex64>>,
    Bound<'py, PyArray1<f64>>,
    Bound<'py, PyArray1<f64>>,
)> {
    let heff = frame.wrap_heff(h)?;
    let cov = frame.cov()?;
    let obs = DdObservation {
        y: y.as_array().to_owned(),
        noise_var: sigma2,
    };
    let result = detector::lmmse_detect(&heff, &obs, sigma2, &cov).map_err(py_err)?;
    Ok((
        result.x_hat.into_pyarray(py),
        Array1::from_vec(result.mse).into_pyarray(py),
        Array1::from_vec(result.sinr).into_pyarray(py),
    ))
}

/// Semi-analytic average bit-error probability of the LMMSE detector for
/// one channel realization.
#[pyfunction]
fn theoretical_ber(
    frame: &Frame,
    h: PyReadonlyArray2<'_, Complex64>,
    sigma2: f64,
) -> PyResult<f64> {
    let heff = frame.wrap_heff(h)?;
    let cov = frame.cov()?;
    let est = detector::theoretical_ber(&heff, sigma2, &cov, frame.inner.modulation)
        .map_err(py_err)?;
    Ok(est.pb)
}

/// Gaussian tail probability `Q(x)`.
#[pyfunction]
fn q_function(x: f64) -> f64 {
    detector::q_function(x)
}

// ---------------------------------------------------------------------------
// Scenario-level operations (CSV text, matching the CLI)
// ---------------------------------------------------------------------------

/// JSON text of the default scenario, as accepted by the sweep functions
/// and the CLI `--config` flag.
#[pyfunction]
fn default_scenario_json() -> String {
    Scenario::default().echo_json()
}

/// Runs the scenario's BER sweep and returns the CSV text.
#[pyfunction]
fn ber_sweep_csv(config_json: &str) -> PyResult<String> {
    let s = Scenario::from_json(config_json).map_err(py_err)?;
    let result = sweep::ber_sweep(&s).map_err(py_err)?;
    Ok(sweep::sweep_csv(&s, &result))
}

/// Runs the fixed-factor baselines plus the adaptive policy and returns
/// `(label, csv)` pairs, followed by the adaptive factor trace CSV.
#[pyfunction]
fn throughput_sweep_csv(config_json: &str) -> PyResult<(Vec<(String, String)>, String)> {
    let s = Scenario::from_json(config_json).map_err(py_err)?;
    let (results, trace) = sweep::throughput_sweep(&s).map_err(py_err)?;
    let label = results.last().map(|r| r.label.clone()).unwrap_or_default();
    let pairs = results
        .iter()
        .map(|r| (r.label.clone(), sweep::sweep_csv(&s, r)))
        .collect();
    Ok((pairs, sweep::alpha_trace_csv(&s, &label, &trace)))
}

/// Deterministic link-budget table over an elevation grid, as CSV text.
#[pyfunction]
#[pyo3(signature = (config_json=None, theta="5:90:5"))]
fn linkbudget_csv(config_json: Option<&str>, theta: &str) -> PyResult<String> {
    let s = match config_json {
        Some(json) => Scenario::from_json(json).map_err(py_err)?,
        None => Scenario::default(),
    };
    let grid = SweepGrid::parse(theta).map_err(py_err)?;
    sweep::linkbudget_csv(&s, &grid).map_err(py_err)
}

/// Runs the numerical self-check suite; returns `(passed, report_text)`.
#[pyfunction]
fn validate_chain() -> PyResult<(bool, String)> {
    let report = sweep::validate(false).map_err(py_err)?;
    Ok((report.passed(), report.to_string()))
}

// ---------------------------------------------------------------------------
// Adaptation and link budget scalars
// ---------------------------------------------------------------------------

/// Compression factor selected by a mode-table preset at the given SNR.
#[pyfunction]
#[pyo3(signature = (gamma_db, preset="default"))]
fn select_alpha(gamma_db: f64, preset: &str) -> PyResult<f64> {
    let lut = Lut::preset(preset).map_err(py_err)?;
    Ok(adapt::select_alpha(gamma_db, &lut))
}

/// Ground-to-satellite slant distance in meters.
#[pyfunction]
#[pyo3(signature = (theta_deg, *, h0_m=780e3))]
fn slant_distance_m(theta_deg: f64, h0_m: f64) -> PyResult<f64> {
    let geo = GeometryConfig {
        h0_m,
        ..GeometryConfig::default()
    };
    linkbudget::slant_distance_m(theta_deg, &geo).map_err(py_err)
}

/// Free-space path loss in dB.
#[pyfunction]
fn fspl_db(d_m: f64, fc_ghz: f64) -> f64 {
    linkbudget::fspl_db(d_m, fc_ghz)
}

/// Atmospheric gas attenuation in dB (cosecant path-length model).
#[pyfunction]
#[pyo3(signature = (theta_deg, *, a_zenith_db=0.22))]
fn gas_attenuation_db(theta_deg: f64, a_zenith_db: f64) -> PyResult<f64> {
    linkbudget::gas_attenuation_db(theta_deg, a_zenith_db).map_err(py_err)
}

/// Version string, identical to the CSV metadata tag.
#[pyfunction]
fn version() -> &'static str {
    sweep::VERSION_TAG
}

// ---------------------------------------------------------------------------
// Module definition
// ---------------------------------------------------------------------------

#[pymodule(name = "fftn_otfs")]
fn fftn_otfs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Frame>()?;
    m.add_function(wrap_pyfunction!(isfft, m)?)?;
    m.add_function(wrap_pyfunction!(sfft, m)?)?;
    m.add_function(wrap_pyfunction!(map_bits, m)?)?;
    m.add_function(wrap_pyfunction!(demap_grid, m)?)?;
    m.add_function(wrap_pyfunction!(effective_channel, m)?)?;
    m.add_function(wrap_pyfunction!(pure_los_effective_channel, m)?)?;
    m.add_function(wrap_pyfunction!(transmit, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(theoretical_ber, m)?)?;
    m.add_function(wrap_pyfunction!(q_function, m)?)?;
    m.add_function(wrap_pyfunction!(default_scenario_json, m)?)?;
    m.add_function(wrap_pyfunction!(ber_sweep_csv, m)?)?;
    m.add_function(wrap_pyfunction!(throughput_sweep_csv, m)?)?;
    m.add_function(wrap_pyfunction!(linkbudget_csv, m)?)?;
    m.add_function(wrap_pyfunction!(validate_chain, m)?)?;
    m.add_function(wrap_pyfunction!(select_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(slant_distance_m, m)?)?;
    m.add_function(wrap_pyfunction!(fspl_db, m)?)?;
    m.add_function(wrap_pyfunction!(gas_attenuation_db, m)?)?;
    m.add_function(wrap_pyfunction!(version, m)?)?;
    Ok(())
}
