//! Root-raised-cosine pulse, ambiguity function, and pulse-train Gram matrix
//!
//! The transmit pulse is a unit-energy root-raised-cosine (RRC) with roll-off
//! `beta`, Nyquist interval `T0`, truncated to `|t| <= l_span * T0`:
//!
//! ```text
//! g(t) = [ sin(pi x (1-beta)) + 4 beta x cos(pi x (1+beta)) ]
//!        / [ pi x (1 - (4 beta x)^2) ] / sqrt(T0),      x = t / T0
//! ```
//!
//! Its matched-filter autocorrelation is the raised-cosine function
//!
//! ```text
//! rho(tau) = sinc(x) cos(pi beta x) / (1 - (2 beta x)^2),   x = tau / T0,
//! ```
//!
//! which vanishes at every nonzero multiple of `T0` — the Nyquist property.
//! Compressing the pulse train to spacing `T_F = alpha * T0 < T0` samples
//! `rho` off its zeros, giving the banded symmetric Toeplitz Gram matrix
//!
//! ```text
//! G[i, j] = rho((i - j) * alpha * T0)
//! ```
//!
//! that drives both the intersymbol interference and the colored noise at the
//! matched-filter output. The receiver carries the serial matched-filter
//! outputs to the delay-Doppler domain through `U^H` (the inverse of the
//! transmit map `U`), so the delay-Doppler noise covariance is the
//! receiver-side unitary image `sigma^2 * U^H G U` of that Gram matrix.
//!
//! The cross-ambiguity function used by the effective-channel builder is
//!
//! ```text
//! A(tau, nu) = integral g(t) g(t - tau) exp(-j 2 pi nu t) dt,
//! ```
//!
//! evaluated numerically on a grid of `oversampling` samples per `T0`.
//!
//! ## Example
//!
//! ```rust
//! use fftn_otfs::pulse::{PulseShape, rrc_value, raised_cosine_autocorr};
//!
//! let shape = PulseShape { t0_s: 1.0, beta: 0.3, l_span: 6, oversampling: 8 };
//! // Unit-energy peak: g(0) = (1 - beta + 4 beta / pi) / sqrt(T0).
//! assert!((rrc_value(0.0, &shape) - 1.0819718634).abs() < 1e-9);
//! // Nyquist zeros are exact.
//! assert_eq!(raised_cosine_autocorr(3.0, &shape), 0.0);
//! ```

use crate::error::Result;
use crate::frame::FrameConfig;
use crate::linalg::BandedCholesky;
use crate::transform;
use crate::C64;
use ndarray::Array2;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

// ---------------------------------------------------------------------------
// Pulse shape
// ---------------------------------------------------------------------------

/// Parameters of the truncated RRC pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseShape {
    /// Nyquist interval `T0` in seconds.
    pub t0_s: f64,
    /// Roll-off factor in `[0, 1]`.
    pub beta: f64,
    /// One-sided truncation in units of `T0`.
    pub l_span: usize,
    /// Samples per `T0` for numerical integrals.
    pub oversampling: usize,
}

impl PulseShape {
    /// Pulse shape implied by a frame configuration.
    pub fn from_frame(cfg: &FrameConfig) -> Self {
        PulseShape {
            t0_s: cfg.t0_s(),
            beta: cfg.beta,
            l_span: cfg.l_span,
            oversampling: cfg.oversampling,
        }
    }

    /// One-sided pulse support `l_span * T0` in seconds.
    pub fn support_s(&self) -> f64 {
        self.l_span as f64 * self.t0_s
    }
}

/// `sin(pi x) / (pi x)` with exact zeros at nonzero integers.
fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x == x.trunc() {
        0.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Unit-energy RRC pulse value at time `t_s`, truncated to the shape support.
pub fn rrc_value(t_s: f64, shape: &PulseShape) -> f64 {
    if t_s.abs() > shape.support_s() {
        return 0.0;
    }
    let x = t_s / shape.t0_s;
    let b = shape.beta;
    let scale = 1.0 / shape.t0_s.sqrt();
    if x.abs() < 1e-10 {
        return scale * (1.0 - b + 4.0 * b / PI);
    }
    if b > 0.0 && ((4.0 * b * x).abs() - 1.0).abs() < 1e-8 {
        // Removable singularity at t = ±T0 / (4 beta).
        let a = PI / (4.0 * b);
        return scale * (b / std::f64::consts::SQRT_2)
            * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * x * (1.0 - b)).sin() + 4.0 * b * x * (PI * x * (1.0 + b)).cos();
    let den = PI * x * (1.0 - (4.0 * b * x) * (4.0 * b * x));
    scale * num / den
}

/// Raised-cosine autocorrelation `rho(tau)` of the unit-energy RRC pulse
/// (dimensionless; `rho(0) = 1`). Zero beyond the truncated overlap
/// `|tau| >= 2 * l_span * T0`, and exactly zero at nonzero multiples of `T0`.
pub fn raised_cosine_autocorr(tau_s: f64, shape: &PulseShape) -> f64 {
    if tau_s.abs() >= 2.0 * shape.support_s() {
        return 0.0;
    }
    let x = tau_s / shape.t0_s;
    let b = shape.beta;
    if b > 0.0 {
        let u = 2.0 * b * x;
        if (u.abs() - 1.0).abs() < 1e-8 {
            // Removable singularity at tau = ±T0 / (2 beta).
            return (PI / 4.0) * sinc(x);
        }
        sinc(x) * (PI * b * x).cos() / (1.0 - u * u)
    } else {
        sinc(x)
    }
}

/// Cross-ambiguity `A(tau, nu) = integral g(t) g(t - tau) e^{-j2pi nu t} dt`,
/// evaluated by the trapezoid rule with `oversampling` points per `T0` over
/// the overlap of the two truncated pulses.
pub fn ambiguity(tau_s: f64, nu_hz: f64, shape: &PulseShape) -> C64 {
    let support = shape.support_s();
    if tau_s.abs() >= 2.0 * support {
        return C64::new(0.0, 0.0);
    }
    if nu_hz == 0.0 {
        // At nu = 0 the integral is the matched-filter autocorrelation, which
        // has a closed form. Using it keeps the Nyquist zeros exact instead of
        // inheriting the trapezoid rule's ~1e-4 bias at integer lags, and makes
        // the effective channel agree exactly with the Gram matrix at alpha = 1.
        return C64::new(raised_cosine_autocorr(tau_s, shape), 0.0);
    }
    let dt = shape.t0_s / shape.oversampling as f64;
    let lo = (-support).max(tau_s - support);
    let hi = support.min(tau_s + support);
    let k_lo = (lo / dt).ceil() as i64;
    let k_hi = (hi / dt).floor() as i64;
    let mut acc = C64::new(0.0, 0.0);
    for k in k_lo..=k_hi {
        let t = k as f64 * dt;
        let mut w = rrc_value(t, shape) * rrc_value(t - tau_s, shape);
        if k == k_lo || k == k_hi {
            w *= 0.5;
        }
        if w != 0.0 {
            acc += C64::from_polar(w, -2.0 * PI * nu_hz * t);
        }
    }
    acc * dt
}

// ---------------------------------------------------------------------------
// Pulse-train Gram matrix
// ---------------------------------------------------------------------------

/// Banded Toeplitz Gram matrix of the compressed pulse train and its
/// Cholesky factor. Obtained via [`gram_matrix`], which caches per
/// `(M*N, alpha, beta, l_span)`.
#[derive(Debug)]
pub struct Gram {
    mn: usize,
    band: usize,
    row0: Vec<f64>,
    chol: BandedCholesky,
    ridge: f64,
}

impl Gram {
    /// Matrix dimension `M * N`.
    pub fn dim(&self) -> usize {
        self.mn
    }

    /// Bandwidth (largest lag with a nonzero entry).
    pub fn band(&self) -> usize {
        self.band
    }

    /// Entry `G[i, j] = rho((i - j) alpha T0)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let lag = i.abs_diff(j);
        if lag <= self.band {
            self.row0[lag]
        } else {
            0.0
        }
    }

    /// First row (lags `0..=band`).
    pub fn row0(&self) -> &[f64] {
        &self.row0
    }

    /// Lower Cholesky factor of `G` (including any stabilizing ridge).
    pub fn cholesky(&self) -> &BandedCholesky {
        &self.chol
    }

    /// Diagonal ridge added to make the factorization succeed (0 normally).
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Dense copy (small sizes, for tests).
    pub fn to_dense(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.mn, self.mn), |(i, j)| self.entry(i, j))
    }
}

fn build_gram(mn: usize, alpha: f64, shape: &PulseShape) -> Result<Gram> {
    let band = ((2.0 * shape.l_span as f64 / alpha).floor() as usize).min(mn.saturating_sub(1));
    let row0: Vec<f64> = (0..=band)
        .map(|lag| raised_cosine_autocorr(lag as f64 * alpha * shape.t0_s, shape))
        .collect();
    // The closed-form autocorrelation is positive definite for the supported
    // compression range; escalate a tiny diagonal ridge if roundoff or an
    // aggressive alpha pushes an eigenvalue below zero.
    let mut row = row0.clone();
    for (attempt, ridge) in [0.0, 1e-12, 1e-10, 1e-8].iter().enumerate() {
        row[0] = row0[0] + ridge;
        match BandedCholesky::from_toeplitz(&row, mn) {
            Ok(chol) => {
                if attempt > 0 {
                    log::warn!(
                        "gram matrix (alpha={alpha}, beta={}) needed ridge {ridge:.0e}",
                        shape.beta
                    );
                }
                return Ok(Gram {
                    mn,
                    band,
                    row0: row,
                    chol,
                    ridge: *ridge,
                });
            }
            Err(_) if attempt + 1 < 4 => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!("ridge escalation loop returns or errors");
}

type GramKey = (usize, u64, u64, usize);

fn gram_cache() -> &'static Mutex<HashMap<GramKey, Arc<Gram>>> {
    static CACHE: OnceLock<Mutex<HashMap<GramKey, Arc<Gram>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached Gram matrix of the frame's compressed pulse train.
pub fn gram_matrix(cfg: &FrameConfig) -> Result<Arc<Gram>> {
    let key: GramKey = (
        cfg.mn(),
        cfg.alpha.to_bits(),
        cfg.beta.to_bits(),
        cfg.l_span,
    );
    if let Some(g) = gram_cache().lock().expect("gram cache poisoned").get(&key) {
        return Ok(g.clone());
    }
    let gram = Arc::new(build_gram(cfg.mn(), cfg.alpha, &PulseShape::from_frame(cfg))?);
    gram_cache()
        .lock()
        .expect("gram cache poisoned")
        .entry(key)
        .or_insert_with(|| gram.clone());
    Ok(gram)
}

// ---------------------------------------------------------------------------
// Delay-Doppler noise covariance
// ---------------------------------------------------------------------------

/// Noise covariance at the detector input, up to the `sigma^2` scale.
///
/// The structured variant represents `U^H G U` implicitly through the banded
/// Gram factor and FFTs — whitening and coloring cost `O(MN (log MN + band))`
/// and no dense matrix is ever formed. The dense variant wraps an explicit
/// covariance (test scale) with an eigenvalue-clipped Cholesky factor.
#[derive(Debug)]
pub enum DdNoiseCov {
    /// Implicit `U^H G U` for the frame's Gram matrix.
    Structured {
        /// Delay bins.
        m: usize,
        /// Doppler bins.
        n: usize,
        /// Shared pulse-train Gram matrix.
        gram: Arc<Gram>,
    },
    /// Explicit covariance with its lower-triangular factor.
    Dense {
        /// The covariance matrix itself.
        cov: Array2<C64>,
        /// Lower-triangular `C` with `C C^H = cov` (eigen-clipped if needed).
        factor: Array2<C64>,
    },
}

/// Delay-Doppler noise covariance (implicit form) for a frame configuration.
pub fn dd_noise_covariance(cfg: &FrameConfig) -> Result<DdNoiseCov> {
    Ok(DdNoiseCov::Structured {
        m: cfg.m,
        n: cfg.n,
        gram: gram_matrix(cfg)?,
    })
}

impl DdNoiseCov {
    /// Wraps an explicit covariance matrix, factoring it immediately
    /// (eigenvalues clipped at zero if roundoff made it indefinite).
    pub fn from_dense(cov: Array2<C64>) -> Result<Self> {
        let factor = crate::linalg::eigen_clipped_factor(&cov)?;
        Ok(DdNoiseCov::Dense { cov, factor })
    }

    /// Dimension `M * N`.
    pub fn dim(&self) -> usize {
        match self {
            DdNoiseCov::Structured { m, n, .. } => m * n,
            DdNoiseCov::Dense { cov, .. } => cov.nrows(),
        }
    }

    /// Whitens a delay-Doppler vector in place: `v <- W v` with
    /// `W Cov W^H = I` (`W = L^{-1} U` structured, `C^{-1}` dense).
    pub fn whiten_inplace(&self, v: &mut [C64]) {
        match self {
            DdNoiseCov::Structured { m, n, gram } => {
                transform::isfft_vec_inplace(v, *m, *n);
                gram.cholesky().solve_lower_inplace(v);
            }
            DdNoiseCov::Dense { factor, .. } => {
                let n = factor.nrows();
                assert_eq!(v.len(), n);
                for i in 0..n {
                    let mut s = v[i];
                    for j in 0..i {
                        s -= factor[[i, j]] * v[j];
                    }
                    v[i] = s / factor[[i, i]];
                }
            }
        }
    }

    /// Colors a unit-variance white vector: returns `z` with
    /// `E[z z^H] = Cov` (`z = U^H L w` structured, `C w` dense).
    pub fn color(&self, w: &[C64]) -> Vec<C64> {
        match self {
            DdNoiseCov::Structured { m, n, gram } => {
                let mut z = gram.cholesky().mul_lower(w);
                transform::sfft_vec_inplace(&mut z, *m, *n);
                z
            }
            DdNoiseCov::Dense { factor, .. } => {
                let n = factor.nrows();
                assert_eq!(w.len(), n);
                let mut z = vec![C64::new(0.0, 0.0); n];
                for i in 0..n {
                    let mut s = C64::new(0.0, 0.0);
                    for j in 0..=i {
                        s += factor[[i, j]] * w[j];
                    }
                    z[i] = s;
                }
                z
            }
        }
    }

    /// Dense covariance matrix (small sizes, for tests and inspection).
    pub fn dense_cov(&self) -> Array2<C64> {
        match self {
            DdNoiseCov::Structured { m, n, gram } => {
                let mn = m * n;
                // U^H G U column by column: col_j(U^H G U) = U^H G (U e_j).
                let mut out = Array2::zeros((mn, mn));
                for j in 0..mn {
                    let mut e = vec![C64::new(0.0, 0.0); mn];
                    e[j] = C64::new(1.0, 0.0);
                    transform::isfft_vec_inplace(&mut e, *m, *n);
                    let mut col = vec![C64::new(0.0, 0.0); mn];
                    for i in 0..mn {
                        let lo = i.saturating_sub(gram.band());
                        let hi = (i + gram.band()).min(mn - 1);
                        let mut s = C64::new(0.0, 0.0);
                        for k in lo..=hi {
                            s += e[k] * gram.entry(i, k);
                        }
                        col[i] = s;
                    }
                    transform::sfft_vec_inplace(&mut col, *m, *n);
                    for i in 0..mn {
                        out[[i, j]] = col[i];
                    }
                }
                out
            }
            DdNoiseCov::Dense { cov, .. } => cov.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
