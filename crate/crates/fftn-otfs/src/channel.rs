//! Tapped-delay-line satellite channel profiles and per-frame realizations
//!
//! Five built-in three-tap profiles (`TDL-A` … `TDL-E`) cover the usual
//! elevation/blockage regimes, from dense-urban NLOS Rayleigh fading at 20
//! degrees to open-rural near-LOS Ricean fading at 85 degrees. Each profile
//! carries its tap delays, relative tap powers, a Ricean K-factor (absent for
//! Rayleigh profiles), a nominal elevation, and the matching large-scale loss
//! coefficients.
//!
//! A per-frame realization draws, for every tap,
//!
//! ```text
//! h_p = sqrt(P_p) ( sqrt(K/(K+1)) e^{j phi}  +  sqrt(1/(K+1)) h_sc ),
//! ```
//!
//! with `h_sc` standard complex Gaussian and `phi` uniform on `[0, 2 pi)`,
//! plus a per-tap Doppler shift uniform on `[-nu_max, nu_max]`. Delays are
//! quantized to the delay grid, `l_p = quant(tau_p * M * delta_f)`, and the
//! Doppler shift splits into integer and fractional bin parts,
//!
//! ```text
//! nu_p / delta_nu = r_p + kappa_p,    kappa_p in [-1/2, 1/2),
//! ```
//!
//! where `delta_nu = 1/(M N T_F)` is the Doppler resolution of the
//! `alpha`-compressed frame. Tap powers are normalized so the mean channel
//! energy is one; the frame is block-fading (one realization per frame).
//!
//! ## Example
//!
//! ```rust
//! use fftn_otfs::channel::{builtin_profile, realize, DelayQuant};
//! use fftn_otfs::frame::FrameConfig;
//! use rand::SeedableRng;
//!
//! let cfg = FrameConfig { m: 16, n: 16, ..FrameConfig::default() };
//! let profile = builtin_profile("tdl-a").unwrap();
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
//! let chan = realize(&profile, &cfg, cfg.default_nu_max_hz(),
//!                    DelayQuant::Floor, &mut rng).unwrap();
//! assert_eq!(chan.taps.len(), 3);
//! // Nanosecond tap delays all land on the first delay bin at this scale.
//! assert!(chan.taps.iter().all(|t| t.l == 0));
//! ```

use crate::error::{Error, Result};
use crate::frame::FrameConfig;
use crate::linkbudget::LossParams;
use crate::C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

/// A compressed three-tap delay-line profile with its large-scale parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdlProfile {
    /// Display name of the profile.
    #[serde(default = "default_profile_name")]
    pub name: String,
    /// Per-tap excess delays in nanoseconds.
    pub delays_ns: Vec<f64>,
    /// Per-tap relative powers in dB (normalized to unit total internally).
    pub powers_db: Vec<f64>,
    /// Ricean K-factor in dB; `None` means Rayleigh fading (K of minus
    /// infinity). `Some(f64::INFINITY)` degenerates to a pure LOS tap.
    #[serde(default)]
    pub k_db: Option<f64>,
    /// Nominal elevation angle of the scenario in degrees.
    #[serde(default = "default_nominal_elevation")]
    pub theta_nominal_deg: f64,
    /// Large-scale loss coefficients matching the scenario.
    #[serde(default)]
    pub loss_params: LossParams,
}

fn default_profile_name() -> String {
    "custom".to_owned()
}

fn default_nominal_elevation() -> f64 {
    90.0
}

impl TdlProfile {
    /// Checks the compressed-representation shape and value sanity.
    pub fn validate(&self) -> Result<()> {
        if self.delays_ns.len() != 3 || self.powers_db.len() != 3 {
            return Err(Error::Config(format!(
                "profile '{}' must use the compressed three-tap representation \
                 (got {} delays, {} powers)",
                self.name,
                self.delays_ns.len(),
                self.powers_db.len()
            )));
        }
        if self.delays_ns.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::Config(format!(
                "profile '{}' has a negative or non-finite tap delay",
                self.name
            )));
        }
        if self.powers_db.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config(format!(
                "profile '{}' has a non-finite tap power",
                self.name
            )));
        }
        if !(self.theta_nominal_deg > 0.0 && self.theta_nominal_deg <= 90.0) {
            return Err(Error::Config(format!(
                "profile '{}' nominal elevation must lie in (0, 90], got {}",
                self.name, self.theta_nominal_deg
            )));
        }
        self.loss_params.validate()
    }

    /// Linear tap powers normalized so they sum to one.
    pub fn normalized_powers(&self) -> Vec<f64> {
        let lin: Vec<f64> = self.powers_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
        let total: f64 = lin.iter().sum();
        lin.into_iter().map(|p| p / total).collect()
    }

    /// Linear Ricean K-factor; zero for Rayleigh profiles.
    pub fn k_linear(&self) -> f64 {
        match self.k_db {
            None => 0.0,
            Some(db) if db == f64::INFINITY => f64::INFINITY,
            Some(db) => 10f64.powf(db / 10.0),
        }
    }

    /// Parses a profile from its JSON representation (same fields as the
    /// built-in tables) and validates it.
    pub fn from_json(json: &str) -> Result<TdlProfile> {
        let profile: TdlProfile = serde_json::from_str(json)?;
        profile.validate()?;
        Ok(profile)
    }
}

/// Returns one of the built-in profiles by name (`"tdl-a"` … `"tdl-e"`,
/// case-insensitive, bare letter accepted).
pub fn builtin_profile(name: &str) -> Result<TdlProfile> {
    let urban = LossParams {
        a_cl_db: 15.0,
        b_cl_db: 5.0,
        sigma_sf_db: 6.0,
        ..LossParams::default()
    };
    let rural = LossParams {
        a_cl_db: 5.0,
        b_cl_db: 2.0,
        sigma_sf_db: 6.0,
        ..LossParams::default()
    };
    match name.to_ascii_lowercase().as_str() {
        "tdl-a" | "a" => Ok(TdlProfile {
            name: "TDL-A".to_owned(),
            delays_ns: vec![0.0, 110.0, 285.0],
            powers_db: vec![0.0, -4.7, -6.5],
            k_db: None,
            theta_nominal_deg: 20.0,
            loss_params: urban,
        }),
        "tdl-b" | "b" => Ok(TdlProfile {
            name: "TDL-B".to_owned(),
            delays_ns: vec![0.0, 105.0, 275.0],
            powers_db: vec![0.0, -3.8, -5.2],
            k_db: None,
            theta_nominal_deg: 30.0,
            loss_params: urban,
        }),
        "tdl-c" | "c" => Ok(TdlProfile {
            name: "TDL-C".to_owned(),
            delays_ns: vec![0.0, 260.0, 830.0],
            powers_db: vec![0.0, -3.5, -5.8],
            k_db: None,
            theta_nominal_deg: 30.0,
            loss_params: rural,
        }),
        "tdl-d" | "d" => Ok(TdlProfile {
            name: "TDL-D".to_owned(),
            delays_ns: vec![0.0, 290.0, 895.0],
            powers_db: vec![0.0, -4.2, -6.1],
            k_db: Some(13.3),
            theta_nominal_deg: 60.0,
            loss_params: LossParams {
                sigma_sf_db: 2.0,
                ..rural
            },
        }),
        "tdl-e" | "e" => Ok(TdlProfile {
            name: "TDL-E".to_owned(),
            delays_ns: vec![0.0, 150.0, 350.0],
            powers_db: vec![0.0, -8.0, -12.0],
            k_db: Some(22.0),
            theta_nominal_deg: 85.0,
            loss_params: LossParams {
                a_cl_db: 0.0,
                b_cl_db: 0.0,
                sigma_sf_db: 2.0,
                ..LossParams::default()
            },
        }),
        other => Err(Error::Config(format!(
            "unknown channel profile '{other}' (expected tdl-a through tdl-e)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Realizations
// ---------------------------------------------------------------------------

/// Delay-to-grid quantization rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelayQuant {
    /// Truncate `tau * M * delta_f` toward zero (the default).
    #[default]
    Floor,
    /// Round `tau * M * delta_f` to the nearest grid tap.
    Round,
}

/// One realized channel tap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelTap {
    /// Complex tap gain.
    pub gain: C64,
    /// Tap delay in seconds, quantized to the delay grid: `l / (M delta_f)`.
    pub tau_s: f64,
    /// Tap Doppler shift in Hz.
    pub nu_hz: f64,
    /// Integer delay bin, `0 <= l < M`.
    pub l: usize,
    /// Integer part of the Doppler shift in bins.
    pub r: i64,
    /// Fractional part of the Doppler shift in bins, in `[-1/2, 1/2)`.
    pub kappa: f64,
}

/// A block-fading channel realization for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Realized taps, in profile order.
    pub taps: Vec<ChannelTap>,
}

impl ChannelRealization {
    /// Instantaneous channel energy `sum_p |h_p|^2`.
    pub fn total_power(&self) -> f64 {
        self.taps.iter().map(|t| t.gain.norm_sqr()).sum()
    }
}

/// The degenerate calibration channel: one unit-gain tap at zero delay and
/// zero Doppler. Through the ideal pulse chain this is the AWGN anchor.
pub fn pure_los_realization() -> ChannelRealization {
    ChannelRealization {
        taps: vec![ChannelTap {
            gain: C64::new(1.0, 0.0),
            tau_s: 0.0,
            nu_hz: 0.0,
            l: 0,
            r: 0,
            kappa: 0.0,
        }],
    }
}

/// Draws one Ricean tap gain with linear power `p_lin`, linear K-factor
/// `k_lin` (0 = Rayleigh, infinity = pure LOS), and LOS phase `phi`.
///
/// Consumes exactly two Gaussian draws unless `k_lin` is infinite (none).
pub fn ricean_tap<R: Rng + ?Sized>(p_lin: f64, k_lin: f64, phi: f64, rng: &mut R) -> C64 {
    let amp = p_lin.sqrt();
    let los = C64::from_polar(1.0, phi);
    if k_lin.is_infinite() {
        return amp * los;
    }
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let h_sc = C64::new(re, im) / std::f64::consts::SQRT_2;
    let los_frac = (k_lin / (k_lin + 1.0)).sqrt();
    let scatter_frac = (1.0 / (k_lin + 1.0)).sqrt();
    amp * (los_frac * los + scatter_frac * h_sc)
}

/// Draws a block-fading realization of `profile` on the grid of `cfg`.
///
/// Per tap, in order: the Doppler shift (uniform on `[-nu_max_hz, nu_max_hz]`,
/// skipped when `nu_max_hz` is zero), the LOS phase, then the scatter
/// component. Delays are quantized per `quant` and must land inside the
/// delay grid; `nu_max_hz` must stay below half the subcarrier spacing.
pub fn realize<R: Rng + ?Sized>(
    profile: &TdlProfile,
    cfg: &FrameConfig,
    nu_max_hz: f64,
    quant: DelayQuant,
    rng: &mut R,
) -> Result<ChannelRealization> {
    profile.validate()?;
    if !(nu_max_hz >= 0.0) {
        return Err(Error::Config(format!(
            "Doppler spread must be non-negative, got {nu_max_hz} Hz"
        )));
    }
    if nu_max_hz >= cfg.delta_f_hz / 2.0 {
        return Err(Error::Config(format!(
            "Doppler spread {nu_max_hz} Hz must stay below half the subcarrier \
             spacing {} Hz",
            cfg.delta_f_hz
        )));
    }
    let delta_tau = cfg.delay_resolution_s();
    let delta_nu = cfg.doppler_resolution_hz();
    let powers = profile.normalized_powers();
    let k_lin = profile.k_linear();

    let mut taps = Vec::with_capacity(powers.len());
    for (p_lin, delay_ns) in powers.iter().zip(&profile.delays_ns) {
        let nu_hz = if nu_max_hz > 0.0 {
            rng.gen_range(-nu_max_hz..nu_max_hz)
        } else {
            0.0
        };
        let phi = rng.gen_range(0.0..TAU);
        let gain = ricean_tap(*p_lin, k_lin, phi, rng);

        let bins = delay_ns * 1e-9 / delta_tau;
        let l_real = match quant {
            DelayQuant::Floor => bins.floor(),
            DelayQuant::Round => bins.round(),
        };
        if l_real >= cfg.m as f64 {
            return Err(Error::Config(format!(
                "tap delay {delay_ns} ns quantizes to bin {l_real}, outside the \
                 {}-bin delay grid",
                cfg.m
            )));
        }
        let l = l_real as usize;

        // Split the Doppler shift into integer and fractional bins; the
        // subtraction is exact, so r + kappa reconstructs nu/delta_nu.
        let x = nu_hz / delta_nu;
        let r = (x + 0.5).floor() as i64;
        let kappa = x - r as f64;

        taps.push(ChannelTap {
            gain,
            tau_s: l as f64 * delta_tau,
            nu_hz,
            l,
            r,
            kappa,
        });
    }
    Ok(ChannelRealization { taps })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
