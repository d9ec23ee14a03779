//! Experiment scenarios: sweep grids, policies, and their JSON form
//!
//! A [`Scenario`] bundles everything one sweep needs — frame configuration,
//! channel model, SNR grid, compression policy, trial budget, seed — and is
//! the unit echoed into every CSV header, so a result file always carries the
//! exact configuration that produced it. All fields have defaults; a scenario
//! JSON only needs to state what differs from them.
//!
//! Two sweep modes exist. In `direct-snr` mode each grid value is the target
//! SNR itself: the noise variance is set to `10^(-snr_db/10)` against
//! unit-energy symbols, a unit-power channel, and no large-scale loss. In
//! `linkbudget` mode each grid value is an elevation angle in degrees; the
//! deterministic loss budget and the configured power pair produce the SNR,
//! which then drives the same normalized simulation.
//!
//! ## Example
//!
//! ```rust
//! use fftn_otfs::scenario::{AlphaPolicy, Scenario};
//!
//! let s: Scenario = serde_json::from_str(r#"{"model": "tdl-b", "trials": 500}"#).unwrap();
//! assert_eq!(s.trials, 500);
//! assert_eq!(s.alpha_policy, AlphaPolicy::Fixed(1.0));
//! s.validate().unwrap();
//! ```

use crate::adapt::{Lut, PassConfig, ProfileByElevation};
use crate::channel::{builtin_profile, pure_los_realization, ChannelRealization, DelayQuant, TdlProfile};
use crate::error::{Error, Result};
use crate::frame::{FrameConfig, Modulation};
use crate::linkbudget::GeometryConfig;
use crate::metrics::{DEFAULT_CIRCUIT_POWER_W, DEFAULT_PA_EFFICIENCY, DEFAULT_TX_POWER_W};
use crate::modem::PulseMode;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Default Monte-Carlo trials per sweep point.
pub const DEFAULT_TRIALS: u64 = 6000;
/// Reduced trial budget selected by the `--fast` flag.
pub const FAST_TRIALS: u64 = 500;
/// Channel draws averaged into each point's theoretical error probability.
pub const DEFAULT_THEORY_DRAWS: u64 = 100;

// ---------------------------------------------------------------------------
// Sweep grid
// ---------------------------------------------------------------------------

/// Inclusive arithmetic grid `start, start+step, …, stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    /// First value.
    pub start: f64,
    /// Last value (included up to a half-step tolerance).
    pub stop: f64,
    /// Positive increment.
    pub step: f64,
}

impl SweepGrid {
    /// Parses the `start:stop:step` CLI form.
    pub fn parse(text: &str) -> Result<SweepGrid> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "grid must be start:stop:step, got '{text}'"
            )));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad grid number '{p}' in '{text}'")))
            })
            .collect::<Result<_>>()?;
        let grid = SweepGrid {
            start: nums[0],
            stop: nums[1],
            step: nums[2],
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Checks the grid is finite, ordered, and non-empty.
    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.step.is_finite()) {
            return Err(Error::Config("grid endpoints must be finite".into()));
        }
        if !(self.step > 0.0) {
            return Err(Error::Config(format!(
                "grid step must be positive, got {}",
                self.step
            )));
        }
        if self.stop < self.start {
            return Err(Error::Config(format!(
                "grid stop {} precedes start {}",
                self.stop, self.start
            )));
        }
        Ok(())
    }

    /// Materializes the grid; the endpoint is kept despite rounding drift.
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 0.5).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            start: 0.0,
            stop: 30.0,
            step: 2.0,
        }
    }
}

// ---------------------------------------------------------------------------
// Policy and mode
// ---------------------------------------------------------------------------

/// Compression policy of a sweep: one fixed factor, or table-driven
/// selection from the SNR estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaPolicy {
    /// The same factor at every point.
    Fixed(f64),
    /// Mode-table preset name (`"default"` or `"footnote-modes"`).
    Lut(String),
}

impl AlphaPolicy {
    /// Parses the CLI form: a bare factor or `lut:<preset>`.
    pub fn parse(text: &str) -> Result<AlphaPolicy> {
        if let Some(preset) = text.strip_prefix("lut:") {
            Lut::preset(preset)?;
            return Ok(AlphaPolicy::Lut(preset.to_owned()));
        }
        let alpha: f64 = text
            .parse()
            .map_err(|_| Error::Config(format!("bad compression factor '{text}'")))?;
        Ok(AlphaPolicy::Fixed(alpha))
    }

    /// Resolves the table behind a `Lut` policy.
    pub fn lut(&self) -> Result<Option<Lut>> {
        match self {
            AlphaPolicy::Fixed(_) => Ok(None),
            AlphaPolicy::Lut(preset) => Lut::preset(preset).map(Some),
        }
    }

    /// Checks factor range or preset existence.
    pub fn validate(&self) -> Result<()> {
        match self {
            AlphaPolicy::Fixed(alpha) => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(Error::Config(format!(
                        "fixed factor must lie in (0, 1], got {alpha}"
                    )));
                }
                Ok(())
            }
            AlphaPolicy::Lut(preset) => Lut::preset(preset).map(|_| ()),
        }
    }
}

/// How a sweep grid value turns into a noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Grid values are target SNRs in dB; `sigma^2 = 10^(-snr/10)`.
    #[default]
    DirectSnr,
    /// Grid values are elevation angles in degrees; the SNR comes from the
    /// deterministic link budget and the configured power pair.
    Linkbudget,
}

// ---------------------------------------------------------------------------
// Channel model resolution
// ---------------------------------------------------------------------------

/// A resolved channel model: fading profile or the deterministic single-tap
/// line-of-sight reference.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    /// Block-fading tapped delay line.
    Profile(TdlProfile),
    /// One unit tap at the origin; no randomness.
    PureLos,
}

impl ChannelModel {
    /// Resolves a model name: `"los"` or a built-in profile name.
    pub fn resolve(name: &str) -> Result<ChannelModel> {
        if name.eq_ignore_ascii_case("los") {
            return Ok(ChannelModel::PureLos);
        }
        builtin_profile(name).map(ChannelModel::Profile)
    }

    /// Draws one realization (the LOS reference ignores the RNG).
    pub fn realize<R: Rng + ?Sized>(
        &self,
        cfg: &FrameConfig,
        nu_max_hz: f64,
        quant: DelayQuant,
        rng: &mut R,
    ) -> Result<ChannelRealization> {
        match self {
            ChannelModel::Profile(p) => crate::channel::realize(p, cfg, nu_max_hz, quant, rng),
            ChannelModel::PureLos => Ok(pure_los_realization()),
        }
    }

    /// The loss parameters of the underlying profile (free-space defaults
    /// for the LOS reference).
    pub fn loss_params(&self) -> crate::linkbudget::LossParams {
        match self {
            ChannelModel::Profile(p) => p.loss_params,
            ChannelModel::PureLos => crate::linkbudget::LossParams {
                a_cl_db: 0.0,
                b_cl_db: 0.0,
                sigma_sf_db: 0.0,
                ..Default::default()
            },
        }
    }
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    /// Frame configuration (the policy may override `alpha` per point).
    pub frame: FrameConfig,
    /// Channel model name: `tdl-a` … `tdl-e`, or `los`.
    pub model: String,
    /// Doppler spread in Hz; `None` uses the frame's default two-bin spread.
    pub nu_max_hz: Option<f64>,
    /// Delay quantization rule.
    pub quant: DelayQuant,
    /// Effective-channel construction mode.
    pub pulse_mode: PulseMode,
    /// Compression policy.
    pub alpha_policy: AlphaPolicy,
    /// Sweep grid (SNR in dB, or degrees in link-budget mode).
    pub snr: SweepGrid,
    /// Monte-Carlo trials per point.
    pub trials: u64,
    /// Channel draws behind each theoretical-BER value; 0 skips the
    /// semi-analytic column entirely (it reports NaN), which avoids its
    /// error-statistics solve on very large grids.
    pub theory_draws: u64,
    /// Master seed; every random draw derives from it.
    pub seed: u64,
    /// Worker threads (results are identical for any count).
    pub workers: usize,
    /// SNR-estimation error stds for the robustness sweep, in dB.
    pub sigma_e_list_db: Vec<f64>,
    /// Grid-value interpretation.
    pub mode: SweepMode,
    /// Transmit power in watts (energy metrics; SNR in link-budget mode).
    pub p_tx_w: f64,
    /// Power-amplifier drain efficiency.
    pub xi: f64,
    /// Static circuit power in watts.
    pub p_c_w: f64,
    /// Receiver noise power in watts (link-budget mode).
    pub noise_power_w: f64,
    /// Orbit and carrier geometry (link-budget mode and pass simulation).
    pub geometry: GeometryConfig,
    /// Satellite-pass parameters (pass simulation only).
    pub pass: PassConfig,
    /// Elevation-to-profile map (pass simulation only).
    pub profile_map: ProfileByElevation,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            frame: FrameConfig {
                m: 16,
                n: 16,
                delta_f_hz: 15e3,
                alpha: 1.0,
                beta: 0.3,
                l_span: 6,
                oversampling: 8,
                modulation: Modulation::Qpsk,
            },
            model: "tdl-a".to_owned(),
            nu_max_hz: None,
            quant: DelayQuant::default(),
            pulse_mode: PulseMode::default(),
            alpha_policy: AlphaPolicy::Fixed(1.0),
            snr: SweepGrid::default(),
            trials: DEFAULT_TRIALS,
            theory_draws: DEFAULT_THEORY_DRAWS,
            seed: 1,
            workers: 1,
            sigma_e_list_db: vec![0.0, 3.0, 5.0],
            mode: SweepMode::default(),
            p_tx_w: DEFAULT_TX_POWER_W,
            xi: DEFAULT_PA_EFFICIENCY,
            p_c_w: DEFAULT_CIRCUIT_POWER_W,
            noise_power_w: 1e-13,
            geometry: GeometryConfig::default(),
            pass: PassConfig::default(),
            profile_map: ProfileByElevation::default_map(),
        }
    }
}

impl Scenario {
    /// Parses a scenario from JSON and validates it.
    pub fn from_json(json: &str) -> Result<Scenario> {
        let s: Scenario = serde_json::from_str(json)?;
        s.validate()?;
        Ok(s)
    }

    /// Checks every field and cross-field constraint.
    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        ChannelModel::resolve(&self.model)?;
        if let Some(nu) = self.nu_max_hz {
            if !(nu >= 0.0 && nu < self.frame.delta_f_hz / 2.0) {
                return Err(Error::Config(format!(
                    "Doppler spread {nu} Hz must lie in [0, {}) Hz",
                    self.frame.delta_f_hz / 2.0
                )));
            }
        }
        self.alpha_policy.validate()?;
        self.snr.validate()?;
        if self.mode == SweepMode::Linkbudget {
            for theta in self.snr.points() {
                if !(theta > 0.0 && theta <= 90.0) {
                    return Err(Error::Config(format!(
                        "link-budget sweeps are over elevations in (0, 90] degrees, \
                         the grid contains {theta}"
                    )));
                }
            }
        }
        if self.trials < 1 {
            return Err(Error::Config("need at least one trial per point".into()));
        }
        if self.workers < 1 {
            return Err(Error::Config("need at least one worker".into()));
        }
        if self.sigma_e_list_db.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config(
                "estimation-error stds must be non-negative".into(),
            ));
        }
        if !(self.p_tx_w > 0.0) {
            return Err(Error::Config(format!(
                "transmit power must be positive, got {} W",
                self.p_tx_w
            )));
        }
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return Err(Error::Config(format!(
                "PA efficiency must lie in (0, 1], got {}",
                self.xi
            )));
        }
        if !(self.p_c_w >= 0.0) {
            return Err(Error::Config(format!(
                "circuit power must be non-negative, got {} W",
                self.p_c_w
            )));
        }
        if !(self.noise_power_w > 0.0) {
            return Err(Error::Config(format!(
                "noise power must be positive, got {} W",
                self.noise_power_w
            )));
        }
        self.geometry.validate()?;
        self.pass.validate()?;
        self.profile_map.validate()?;
        Ok(())
    }

    /// The resolved channel model.
    pub fn channel_model(&self) -> Result<ChannelModel> {
        ChannelModel::resolve(&self.model)
    }

    /// Doppler spread for a frame at compression factor `alpha`.
    pub fn nu_max_for(&self, cfg: &FrameConfig) -> f64 {
        self.nu_max_hz.unwrap_or_else(|| cfg.default_nu_max_hz())
    }

    /// Canonical one-line JSON echo for result-file headers.
    pub fn echo_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
