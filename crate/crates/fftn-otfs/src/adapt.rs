//! SNR-aware compression control and the satellite-pass loop
//!
//! The controller holds an ordered lookup table of adjustment modes
//! `{(alpha_k, Gamma_k)}`: thresholds `Gamma_k` strictly increase, factors
//! `alpha_k` strictly decrease, and the first mode is the Nyquist fallback
//! `(1.0, -inf)`. Mode selection picks the highest-threshold mode whose
//! threshold does not exceed the (possibly noisy) SNR estimate,
//!
//! ```text
//! alpha(gamma) = alpha_k   for   Gamma_k <= gamma < Gamma_{k+1} ,
//! ```
//!
//! a constant-time decision over the fixed mode list. Estimation error is a
//! Gaussian perturbation in dB, `gamma_hat = gamma + N(0, sigma_e^2)`; it
//! only affects which mode is selected, never the detector's noise variance.
//!
//! A satellite pass is swept slot by slot: a pluggable elevation trajectory
//! (default: symmetric triangular between the 5-degree mask and the maximum
//! elevation) feeds the link budget, the resulting SNR drives mode selection,
//! and one frame is simulated per slot at the selected compression factor.
//!
//! ## Example
//!
//! ```rust
//! use fftn_otfs::adapt::{select_alpha, Lut};
//!
//! let lut = Lut::default_modes();
//! assert_eq!(select_alpha(-5.0, &lut), 1.0);
//! assert_eq!(select_alpha(20.0, &lut), 0.9);
//! assert_eq!(select_alpha(30.0, &lut), 0.8);
//! ```

use crate::channel::{builtin_profile, realize, DelayQuant, TdlProfile};
use crate::detector::{detect_and_count, theoretical_ber};
use crate::error::{Error, Result};
use crate::frame::{self, FrameConfig};
use crate::linkbudget::{GeometryConfig, LinkState, MIN_ELEVATION_DEG};
use crate::metrics::effective_throughput;
use crate::modem::{build_heff, transmit_through, PulseMode};
use crate::pulse::dd_noise_covariance;
use crate::seeding::{domain, trial_rng, Purpose};
use ndarray::Array1;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// Lookup table
// ---------------------------------------------------------------------------

/// One adjustment mode: use compression factor `alpha` once the SNR estimate
/// reaches `threshold_db`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LutMode {
    /// Compression factor in `(0, 1]`.
    pub alpha: f64,
    /// Activation threshold in dB (`-inf` for the fallback mode).
    pub threshold_db: f64,
}

/// Ordered mode table mapping SNR estimates to compression factors.
///
/// Constructed from `alphas` (strictly decreasing, starting at the Nyquist
/// fallback 1.0) and `thresholds_db` (strictly increasing, one per non-Nyquist
/// mode), which keeps the implicit `-inf` threshold of the fallback out of any
/// serialized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "LutSpec", into = "LutSpec")]
pub struct Lut {
    modes: Vec<LutMode>,
}

/// Serialized shape of a [`Lut`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LutSpec {
    alphas: Vec<f64>,
    thresholds_db: Vec<f64>,
}

impl TryFrom<LutSpec> for Lut {
    type Error = Error;
    fn try_from(spec: LutSpec) -> Result<Lut> {
        Lut::new(&spec.alphas, &spec.thresholds_db)
    }
}

impl From<Lut> for LutSpec {
    fn from(lut: Lut) -> LutSpec {
        LutSpec {
            alphas: lut.modes.iter().map(|m| m.alpha).collect(),
            thresholds_db: lut.modes[1..].iter().map(|m| m.threshold_db).collect(),
        }
    }
}

impl Lut {
    /// Builds and validates a table from its factors and thresholds.
    ///
    /// `thresholds_db` holds one entry per mode after the first; the first
    /// mode must be the fallback `alpha = 1.0` (its threshold is `-inf`).
    pub fn new(alphas: &[f64], thresholds_db: &[f64]) -> Result<Lut> {
        if alphas.is_empty() {
            return Err(Error::Config("mode table must be non-empty".into()));
        }
        if alphas.len() != thresholds_db.len() + 1 {
            return Err(Error::Config(format!(
                "{} factors need {} thresholds, got {}",
                alphas.len(),
                alphas.len() - 1,
                thresholds_db.len()
            )));
        }
        if alphas[0] != 1.0 {
            return Err(Error::Config(format!(
                "first mode must be the Nyquist fallback alpha = 1.0, got {}",
                alphas[0]
            )));
        }
        for pair in alphas.windows(2) {
            if !(pair[1] > 0.0 && pair[1] < pair[0]) {
                return Err(Error::Config(format!(
                    "factors must decrease strictly within (0, 1], got {} after {}",
                    pair[1], pair[0]
                )));
            }
        }
        for pair in thresholds_db.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(Error::Config(format!(
                    "thresholds must increase strictly, got {} after {}",
                    pair[1], pair[0]
                )));
            }
        }
        if thresholds_db.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config(
                "non-fallback thresholds must be finite".into(),
            ));
        }
        let mut modes = vec![LutMode {
            alpha: 1.0,
            threshold_db: f64::NEG_INFINITY,
        }];
        modes.extend(
            alphas[1..]
                .iter()
                .zip(thresholds_db)
                .map(|(&alpha, &threshold_db)| LutMode {
                    alpha,
                    threshold_db,
                }),
        );
        Ok(Lut { modes })
    }

    /// Default table: Nyquist below 14 dB, `alpha = 0.9` to 26 dB, `alpha = 0.8` above.
    pub fn default_modes() -> Lut {
        Lut::new(&[1.0, 0.9, 0.8], &[14.0, 26.0]).expect("built-in table is valid")
    }

    /// Alternative preset with a gentler first step:
    /// `alpha = 0.95` from 0 dB and `alpha = 0.9` from 15 dB.
    pub fn footnote_modes() -> Lut {
        Lut::new(&[1.0, 0.95, 0.9], &[0.0, 15.0]).expect("built-in table is valid")
    }

    /// Looks up a named preset (`"default"` or `"footnote-modes"`).
    pub fn preset(name: &str) -> Result<Lut> {
        match name {
            "default" => Ok(Lut::default_modes()),
            "footnote-modes" => Ok(Lut::footnote_modes()),
            other => Err(Error::Config(format!(
                "unknown mode-table preset '{other}' (expected 'default' or 'footnote-modes')"
            ))),
        }
    }

    /// The validated mode list, fallback first.
    pub fn modes(&self) -> &[LutMode] {
        &self.modes
    }

    /// The most aggressive (smallest) compression factor in the table.
    pub fn min_alpha(&self) -> f64 {
        self.modes.last().expect("table is non-empty").alpha
    }
}

/// Compression factor of the highest-threshold mode with `threshold <= gamma_db`.
///
/// The lower boundary is closed: exactly at a threshold the smaller factor is
/// selected. The scan over the fixed mode list is constant-time for a given
/// table.
pub fn select_alpha(gamma_db: f64, lut: &Lut) -> f64 {
    let mut alpha = lut.modes[0].alpha;
    for mode in &lut.modes[1..] {
        if mode.threshold_db <= gamma_db {
            alpha = mode.alpha;
        } else {
            break;
        }
    }
    alpha
}

// ---------------------------------------------------------------------------
// SNR estimation error
// ---------------------------------------------------------------------------

/// Gaussian SNR estimation error in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrErrorModel {
    /// Standard deviation of the estimation error in dB (non-negative).
    pub sigma_e_db: f64,
}

impl SnrErrorModel {
    /// Zero-error model: estimates pass through exactly.
    pub fn exact() -> SnrErrorModel {
        SnrErrorModel { sigma_e_db: 0.0 }
    }

    /// Checks non-negativity.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_e_db >= 0.0) {
            return Err(Error::Config(format!(
                "estimation-error std must be non-negative, got {} dB",
                self.sigma_e_db
            )));
        }
        Ok(())
    }
}

/// `gamma_true_db` plus one draw from `N(0, sigma_e^2)`.
///
/// With `sigma_e = 0` the true value passes through exactly and the RNG is
/// untouched, so disabling the error model never shifts other streams.
pub fn estimate_snr<R: Rng + ?Sized>(
    gamma_true_db: f64,
    model: &SnrErrorModel,
    rng: &mut R,
) -> f64 {
    if model.sigma_e_db == 0.0 {
        return gamma_true_db;
    }
    let z: f64 = rng.sample(StandardNormal);
    gamma_true_db + model.sigma_e_db * z
}

// ---------------------------------------------------------------------------
// Elevation trajectory and profile map
// ---------------------------------------------------------------------------

/// Elevation angle as a function of time into the pass.
///
/// The default implementation below is parametric; a real orbit propagator
/// can drop in behind this trait.
pub trait ElevationTrajectory {
    /// Elevation in degrees at `t_s` seconds into the pass.
    fn theta_deg(&self, t_s: f64) -> f64;
}

/// Symmetric triangular pass: rise from the elevation mask to the maximum
/// elevation at mid-pass, then fall back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangularPass {
    /// Peak elevation in degrees.
    pub max_elevation_deg: f64,
    /// Total pass duration in seconds.
    pub duration_s: f64,
}

impl ElevationTrajectory for TriangularPass {
    fn theta_deg(&self, t_s: f64) -> f64 {
        let u = (t_s / self.duration_s).clamp(0.0, 1.0);
        MIN_ELEVATION_DEG + (self.max_elevation_deg - MIN_ELEVATION_DEG) * (1.0 - (2.0 * u - 1.0).abs())
    }
}

/// One elevation band: use `profile` for elevations below `upper_deg`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElevationBand {
    /// Exclusive upper edge of the band in degrees.
    pub upper_deg: f64,
    /// Built-in profile name for the band.
    pub profile: String,
}

/// Piecewise-constant map from elevation angle to channel profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileByElevation {
    /// Bands with strictly increasing upper edges; the last band's edge must
    /// cover 90 degrees. Profile names resolve lazily, per slot.
    pub bands: Vec<ElevationBand>,
}

impl ProfileByElevation {
    /// Default map: dense urban at low elevation, then urban, suburban LOS,
    /// and open LOS near zenith.
    pub fn default_map() -> ProfileByElevation {
        let band = |upper_deg: f64, profile: &str| ElevationBand {
            upper_deg,
            profile: profile.to_owned(),
        };
        ProfileByElevation {
            bands: vec![
                band(25.0, "tdl-a"),
                band(45.0, "tdl-b"),
                band(72.5, "tdl-d"),
                band(90.5, "tdl-e"),
            ],
        }
    }

    /// Checks band ordering and coverage.
    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::Config("elevation map must be non-empty".into()));
        }
        for pair in self.bands.windows(2) {
            if !(pair[1].upper_deg > pair[0].upper_deg) {
                return Err(Error::Config(
                    "elevation band edges must increase strictly".into(),
                ));
            }
        }
        let top = self.bands.last().expect("non-empty").upper_deg;
        if !(top > 90.0) {
            return Err(Error::Config(format!(
                "elevation bands must cover up to 90 degrees, top edge is {top}"
            )));
        }
        Ok(())
    }

    /// Name of the profile covering `theta_deg`.
    pub fn profile_name(&self, theta_deg: f64) -> &str {
        for band in &self.bands {
            if theta_deg < band.upper_deg {
                return &band.profile;
            }
        }
        &self.bands.last().expect("non-empty").profile
    }

    /// Resolves the profile covering `theta_deg` from the built-in tables.
    pub fn resolve(&self, theta_deg: f64) -> Result<TdlProfile> {
        builtin_profile(self.profile_name(theta_deg))
    }
}

// ---------------------------------------------------------------------------
// Satellite pass
// ---------------------------------------------------------------------------

/// Parameters of one simulated satellite pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PassConfig {
    /// Orbit and carrier geometry.
    pub geometry: GeometryConfig,
    /// Peak elevation of the pass in degrees.
    pub max_elevation_deg: f64,
    /// Pass duration in seconds.
    pub duration_s: f64,
    /// Number of equally spaced slots (at least 2, endpoints included).
    pub slots: usize,
    /// Transmit power in watts.
    pub p_tx_w: f64,
    /// Receiver noise power in watts.
    pub noise_power_w: f64,
    /// Draw one shadow-fading value per slot when set.
    pub include_shadowing: bool,
    /// SNR estimation error feeding mode selection.
    pub sigma_e_db: f64,
    /// Doppler spread override; `None` uses each slot's default spread.
    pub nu_max_hz: Option<f64>,
}

impl Default for PassConfig {
    fn default() -> Self {
        PassConfig {
            geometry: GeometryConfig::default(),
            max_elevation_deg: 85.0,
            duration_s: 480.0,
            slots: 97,
            p_tx_w: 1.0,
            noise_power_w: 1e-19,
            include_shadowing: false,
            sigma_e_db: 0.0,
            nu_max_hz: None,
        }
    }
}

impl PassConfig {
    /// Checks ranges of every pass parameter.
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.slots < 2 {
            return Err(Error::Config(format!(
                "a pass needs at least 2 slots, got {}",
                self.slots
            )));
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::Config(format!(
                "pass duration must be positive, got {} s",
                self.duration_s
            )));
        }
        if !(self.max_elevation_deg > MIN_ELEVATION_DEG && self.max_elevation_deg <= 90.0) {
            return Err(Error::Config(format!(
                "peak elevation must lie in ({MIN_ELEVATION_DEG}, 90] degrees, got {}",
                self.max_elevation_deg
            )));
        }
        if !(self.p_tx_w > 0.0) {
            return Err(Error::Config(format!(
                "transmit power must be positive, got {} W",
                self.p_tx_w
            )));
        }
        if !(self.noise_power_w > 0.0) {
            return Err(Error::Config(format!(
                "noise power must be positive, got {} W",
                self.noise_power_w
            )));
        }
        SnrErrorModel {
            sigma_e_db: self.sigma_e_db,
        }
        .validate()?;
        if let Some(nu) = self.nu_max_hz {
            if !(nu >= 0.0) {
                return Err(Error::Config(format!(
                    "Doppler spread override must be non-negative, got {nu} Hz"
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of one pass slot.
///
/// A slot that fails downstream (e.g. an unresolvable profile) keeps its link
/// geometry and selected factor but carries NaN performance figures and the
/// error text.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    /// Slot index.
    pub slot: usize,
    /// Time into the pass in seconds.
    pub time_s: f64,
    /// Elevation angle in degrees.
    pub theta_deg: f64,
    /// True SNR in dB from the link budget.
    pub snr_db: f64,
    /// SNR estimate that drove mode selection, in dB.
    pub snr_est_db: f64,
    /// Selected compression factor.
    pub alpha: f64,
    /// Counted bit error rate of the slot's simulated frame.
    pub ber: f64,
    /// Effective throughput in bit/s at the slot's semi-analytic error
    /// probability.
    pub t_eff_bps: f64,
    /// Failure description when the slot could not be simulated.
    pub error: Option<String>,
}

/// Runs the pass loop with the default triangular trajectory.
///
/// Per slot: elevation → link budget → SNR estimate → mode selection → one
/// simulated frame at the selected factor. Slots own their RNG substreams
/// (keyed by slot index), so a failed or skipped draw never shifts later
/// slots, and runs sharing `master_seed` see the same per-slot randomness
/// regardless of the mode table under test. Per-slot errors are recorded in
/// the trace, not returned.
pub fn run_pass(
    pass: &PassConfig,
    lut: &Lut,
    profiles: &ProfileByElevation,
    cfg: &FrameConfig,
    master_seed: u64,
) -> Result<Vec<SlotRecord>> {
    let trajectory = TriangularPass {
        max_elevation_deg: pass.max_elevation_deg,
        duration_s: pass.duration_s,
    };
    run_pass_with_trajectory(pass, lut, profiles, cfg, &trajectory, master_seed)
}

/// [`run_pass`] with a caller-supplied elevation trajectory.
pub fn run_pass_with_trajectory(
    pass: &PassConfig,
    lut: &Lut,
    profiles: &ProfileByElevation,
    cfg: &FrameConfig,
    trajectory: &dyn ElevationTrajectory,
    master_seed: u64,
) -> Result<Vec<SlotRecord>> {
    pass.validate()?;
    profiles.validate()?;
    cfg.validate()?;
    let error_model = SnrErrorModel {
        sigma_e_db: pass.sigma_e_db,
    };

    let mut records = Vec::with_capacity(pass.slots);
    for slot in 0..pass.slots {
        let time_s = pass.duration_s * slot as f64 / (pass.slots - 1) as f64;
        let theta_deg = trajectory.theta_deg(time_s);
        records.push(simulate_slot(
            pass,
            lut,
            profiles,
            cfg,
            &error_model,
            slot,
            time_s,
            theta_deg,
            master_seed,
        ));
    }
    Ok(records)
}

/// One slot of the pass loop; failures become part of the record.
#[allow(clippy::too_many_arguments)]
fn simulate_slot(
    pass: &PassConfig,
    lut: &Lut,
    profiles: &ProfileByElevation,
    cfg: &FrameConfig,
    error_model: &SnrErrorModel,
    slot: usize,
    time_s: f64,
    theta_deg: f64,
    master_seed: u64,
) -> SlotRecord {
    let stream =
        |purpose: Purpose| trial_rng(master_seed, domain::PASS, slot as i64, 0, purpose);
    let mut record = SlotRecord {
        slot,
        time_s,
        theta_deg,
        snr_db: f64::NAN,
        snr_est_db: f64::NAN,
        alpha: f64::NAN,
        ber: f64::NAN,
        t_eff_bps: f64::NAN,
        error: None,
    };

    match slot_link_and_frame(pass, lut, profiles, cfg, error_model, theta_deg, &stream) {
        Ok((snr_db, snr_est_db, alpha, ber, t_eff_bps)) => {
            record.snr_db = snr_db;
            record.snr_est_db = snr_est_db;
            record.alpha = alpha;
            record.ber = ber;
            record.t_eff_bps = t_eff_bps;
        }
        Err(err) => record.error = Some(err.to_string()),
    }
    record
}

/// Link budget, mode selection, and one simulated frame for one slot.
fn slot_link_and_frame(
    pass: &PassConfig,
    lut: &Lut,
    profiles: &ProfileByElevation,
    cfg: &FrameConfig,
    error_model: &SnrErrorModel,
    theta_deg: f64,
    stream: &dyn Fn(Purpose) -> rand_chacha::ChaCha8Rng,
) -> Result<(f64, f64, f64, f64, f64)> {
    let profile = profiles.resolve(theta_deg)?;
    let sf_db = if pass.include_shadowing {
        crate::linkbudget::draw_shadow_fading(profile.loss_params.sigma_sf_db, &mut stream(Purpose::Shadow))
    } else {
        0.0
    };
    let state = LinkState::compute(
        theta_deg,
        &pass.geometry,
        &profile.loss_params,
        pass.p_tx_w,
        pass.noise_power_w,
        sf_db,
    )?;
    let snr_est_db = estimate_snr(state.snr_db, error_model, &mut stream(Purpose::Estimate));
    let alpha = select_alpha(snr_est_db, lut);

    // One frame at the selected factor, with the loss absorbed into the SNR:
    // unit-power signaling against noise variance 1/snr.
    let slot_cfg = FrameConfig { alpha, ..*cfg };
    let sigma2 = 1.0 / state.snr;
    let nu_max_hz = pass.nu_max_hz.unwrap_or_else(|| slot_cfg.default_nu_max_hz());
    let chan = realize(
        &profile,
        &slot_cfg,
        nu_max_hz,
        DelayQuant::Floor,
        &mut stream(Purpose::Channel),
    )?;
    let heff = build_heff(&slot_cfg, &chan, 0.0, PulseMode::Rrc)?;
    let cov = dd_noise_covariance(&slot_cfg)?;

    let mut bits_rng = stream(Purpose::Bits);
    let bits: Vec<u8> = (0..slot_cfg.n_bits()).map(|_| bits_rng.gen_range(0..2u8)).collect();
    let grid = frame::map_bits(&bits, &slot_cfg)?;
    let x = Array1::from_vec(crate::transform::grid_to_vec(&grid));
    let y = transmit_through(&heff, &x, sigma2, &cov, &mut stream(Purpose::Noise));
    let (errors, _) = detect_and_count(&heff, &y, sigma2, &cov, &bits, slot_cfg.modulation)?;
    let ber = errors as f64 / slot_cfg.n_bits() as f64;

    let pb = theoretical_ber(&heff, sigma2, &cov, slot_cfg.modulation)?.pb;
    let t_eff_bps = effective_throughput(&slot_cfg, pb);
    Ok((state.snr_db, snr_est_db, alpha, ber, t_eff_bps))
}

// ---------------------------------------------------------------------------
// Threshold calibration
// ---------------------------------------------------------------------------

/// Regenerates a mode table from a bit-error-probability model.
///
/// For each SNR on the grid the lowest candidate factor whose predicted error
/// probability stays at or below `p_th` is determined; thresholds are the
/// first grid SNRs at which each factor becomes (and stays) feasible, with a
/// running minimum enforcing the table's monotonicity against a noisy model.
/// The Nyquist fallback is always present with threshold `-inf`.
pub fn calibrate_lut<F>(
    candidate_alphas: &[f64],
    snr_grid_db: &[f64],
    p_th: f64,
    mut ber_model: F,
) -> Result<Lut>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    if candidate_alphas.is_empty() {
        return Err(Error::Config("need at least one candidate factor".into()));
    }
    if candidate_alphas
        .windows(2)
        .any(|pair| !(pair[1] > 0.0 && pair[1] < pair[0]))
        || !(candidate_alphas[0] > 0.0 && candidate_alphas[0] <= 1.0)
    {
        return Err(Error::Config(
            "candidate factors must decrease strictly within (0, 1]".into(),
        ));
    }
    if snr_grid_db.windows(2).any(|pair| !(pair[1] > pair[0])) || snr_grid_db.is_empty() {
        return Err(Error::Config(
            "calibration SNR grid must increase strictly and be non-empty".into(),
        ));
    }
    if !(p_th > 0.0 && p_th < 0.5) {
        return Err(Error::Config(format!(
            "target error probability must lie in (0, 0.5), got {p_th}"
        )));
    }

    let mut alphas = vec![1.0];
    let mut thresholds = Vec::new();
    let mut current = 1.0;
    for &gamma_db in snr_grid_db {
        // Lowest feasible candidate at this SNR.
        let mut best = None;
        for &alpha in candidate_alphas.iter().rev() {
            if ber_model(alpha, gamma_db)? <= p_th {
                best = Some(alpha);
                break;
            }
        }
        // Only ratchet downward: a noisy model may flicker, the table cannot.
        if let Some(best) = best {
            if best < current {
                alphas.push(best);
                thresholds.push(gamma_db);
                current = best;
            }
        }
    }
    Lut::new(&alphas, &thresholds)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Modulation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> FrameConfig {
        FrameConfig {
            m: 4,
            n: 4,
            delta_f_hz: 15e3,
            alpha: 1.0,
            beta: 0.3,
            l_span: 6,
            oversampling: 8,
            modulation: Modulation::Bpsk,
        }
    }

    // -- mode table -------------------------------------------------------------

    #[test]
    fn test_select_alpha_reference_points() {
        let lut = Lut::default_modes();
        assert_eq!(select_alpha(30.0, &lut), 0.8);
        assert_eq!(select_alpha(20.0, &lut), 0.9);
        assert_eq!(select_alpha(-5.0, &lut), 1.0);
    }

    #[test]
    fn test_select_alpha_closed_lower_boundary() {
        let lut = Lut::default_modes();
        assert_eq!(select_alpha(13.999, &lut), 1.0);
        assert_eq!(select_alpha(14.0, &lut), 0.9, "threshold itself takes the smaller factor");
        assert_eq!(select_alpha(25.999, &lut), 0.9);
        assert_eq!(select_alpha(26.0, &lut), 0.8);
    }

    #[test]
    fn test_select_alpha_monotone_with_expected_jump_count() {
        let lut = Lut::default_modes();
        let mut prev_alpha = f64::INFINITY;
        let mut jumps = 0;
        let mut gamma = -10.0;
        while gamma <= 40.0 {
            let alpha = select_alpha(gamma, &lut);
            assert!(alpha <= prev_alpha, "factor increased at {gamma} dB");
            if alpha != prev_alpha && prev_alpha.is_finite() {
                jumps += 1;
            }
            prev_alpha = alpha;
            gamma += 0.125;
        }
        assert_eq!(jumps, lut.modes().len() - 1);
    }

    #[test]
    fn test_footnote_preset_thresholds() {
        let lut = Lut::preset("footnote-modes").unwrap();
        assert_eq!(select_alpha(-0.001, &lut), 1.0);
        assert_eq!(select_alpha(0.0, &lut), 0.95);
        assert_eq!(select_alpha(15.0, &lut), 0.9);
        assert_eq!(lut.min_alpha(), 0.9);
        assert!(Lut::preset("other").is_err());
    }

    #[test]
    fn test_lut_rejects_invalid_tables() {
        assert!(Lut::new(&[], &[]).is_err(), "empty");
        assert!(Lut::new(&[0.9, 0.8], &[10.0]).is_err(), "missing fallback");
        assert!(Lut::new(&[1.0, 0.9, 0.9], &[5.0, 10.0]).is_err(), "non-decreasing factor");
        assert!(Lut::new(&[1.0, 0.9, 0.95], &[5.0, 10.0]).is_err(), "increasing factor");
        assert!(Lut::new(&[1.0, -0.1], &[5.0]).is_err(), "factor out of range");
        assert!(Lut::new(&[1.0, 0.9, 0.8], &[10.0, 10.0]).is_err(), "flat thresholds");
        assert!(Lut::new(&[1.0, 0.9, 0.8], &[12.0]).is_err(), "length mismatch");
        assert!(Lut::new(&[1.0, 0.9], &[f64::NAN]).is_err(), "NaN threshold");
    }

    #[test]
    fn test_lut_json_round_trip() {
        let lut = Lut::default_modes();
        let json = serde_json::to_string(&lut).unwrap();
        let back: Lut = serde_json::from_str(&json).unwrap();
        assert_eq!(back, lut);
        assert!(serde_json::from_str::<Lut>(r#"{"alphas":[0.9],"thresholds_db":[]}"#).is_err());
    }

    // -- estimation error ---------------------------------------------------------

    #[test]
    fn test_estimate_snr_zero_error_passthrough() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let before = rng.clone();
        let est = estimate_snr(17.25, &SnrErrorModel::exact(), &mut rng);
        assert_eq!(est, 17.25);
        // The RNG must be untouched so other streams keep their alignment.
        assert_eq!(rng, before);
    }

    #[test]
    fn test_estimate_snr_moments() {
        let model = SnrErrorModel { sigma_e_db: 3.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| estimate_snr(0.0, &model, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() <= 0.05, "mean bias {mean} dB");
        let std = var.sqrt();
        assert!((2.95..=3.05).contains(&std), "sample std {std} dB");
    }

    #[test]
    fn test_snr_error_model_rejects_negative_std() {
        assert!(SnrErrorModel { sigma_e_db: -1.0 }.validate().is_err());
    }

    // -- trajectory and profile map -----------------------------------------------

    #[test]
    fn test_triangular_pass_shape() {
        let traj = TriangularPass {
            max_elevation_deg: 85.0,
            duration_s: 400.0,
        };
        assert!((traj.theta_deg(0.0) - 5.0).abs() < 1e-12);
        assert!((traj.theta_deg(200.0) - 85.0).abs() < 1e-12);
        assert!((traj.theta_deg(400.0) - 5.0).abs() < 1e-12);
        assert!((traj.theta_deg(100.0) - 45.0).abs() < 1e-12);
        // Symmetric about mid-pass.
        assert!((traj.theta_deg(130.0) - traj.theta_deg(270.0)).abs() < 1e-12);
    }

    #[test]
    fn test_default_profile_map_bands() {
        let map = ProfileByElevation::default_map();
        map.validate().unwrap();
        assert_eq!(map.profile_name(10.0), "tdl-a");
        assert_eq!(map.profile_name(24.999), "tdl-a");
        assert_eq!(map.profile_name(25.0), "tdl-b");
        assert_eq!(map.profile_name(44.0), "tdl-b");
        assert_eq!(map.profile_name(45.0), "tdl-d");
        assert_eq!(map.profile_name(72.4), "tdl-d");
        assert_eq!(map.profile_name(72.5), "tdl-e");
        assert_eq!(map.profile_name(90.0), "tdl-e");
        assert_eq!(map.resolve(80.0).unwrap().name, "TDL-E");
    }

    #[test]
    fn test_profile_map_rejects_bad_bands() {
        let band = |upper_deg: f64, profile: &str| ElevationBand {
            upper_deg,
            profile: profile.to_owned(),
        };
        assert!(ProfileByElevation { bands: vec![] }.validate().is_err());
        assert!(ProfileByElevation {
            bands: vec![band(50.0, "tdl-a"), band(30.0, "tdl-b")]
        }
        .validate()
        .is_err());
        assert!(ProfileByElevation {
            bands: vec![band(60.0, "tdl-a")]
        }
        .validate()
        .is_err(), "bands must cover the zenith");
    }

    // -- pass loop -------------------------------------------------------------

    /// Pass and map whose every slot stays feasible on a 4x4 grid.
    ///
    /// The Doppler spread is pinned because the default two-bin spread of an
    /// N = 4 grid would exceed the half-subcarrier bound.
    fn quiet_pass(p_tx_w: f64) -> (PassConfig, ProfileByElevation) {
        let pass = PassConfig {
            max_elevation_deg: 80.0,
            duration_s: 100.0,
            slots: 11,
            p_tx_w,
            noise_power_w: 1e-18,
            nu_max_hz: Some(400.0),
            ..PassConfig::default()
        };
        (pass, ProfileByElevation::default_map())
    }

    #[test]
    fn test_run_pass_saturates_above_top_threshold() {
        // Transmit power high enough that even the 5-degree edge (roughly
        // 233 dB of aggregate loss) sits above the 26 dB threshold: every
        // slot must pick the minimum factor.
        let (pass, map) = quiet_pass(1e9);
        let lut = Lut::default_modes();
        let trace = run_pass(&pass, &lut, &map, &small_cfg(), 7).unwrap();
        assert_eq!(trace.len(), 11);
        for rec in &trace {
            assert!(rec.error.is_none(), "slot {} failed: {:?}", rec.slot, rec.error);
            assert!(rec.snr_db > 26.0, "slot {} at {} dB", rec.slot, rec.snr_db);
            assert_eq!(rec.alpha, 0.8);
        }
    }

    #[test]
    fn test_run_pass_alpha_trace_palindrome() {
        // Deterministic link budget (no shadowing, exact estimates) over a
        // symmetric pass: the factor trace must read the same both ways.
        // The power is tuned so the SNR sweeps through the thresholds.
        let (pass, map) = quiet_pass(1e3);
        let lut = Lut::default_modes();
        let trace = run_pass(&pass, &lut, &map, &small_cfg(), 3).unwrap();
        let alphas: Vec<f64> = trace.iter().map(|r| r.alpha).collect();
        let mut reversed = alphas.clone();
        reversed.reverse();
        assert_eq!(alphas, reversed, "alpha trace: {alphas:?}");
        // The pass must actually exercise more than one mode to be a
        // meaningful palindrome.
        assert!(alphas.iter().any(|&a| a < 1.0), "trace never left Nyquist: {alphas:?}");
        assert!(alphas.iter().any(|&a| a == 1.0), "trace never used the fallback");
    }

    #[test]
    fn test_run_pass_below_thresholds_matches_nyquist_baseline() {
        // Peak SNR below the first threshold: the adaptive trace must equal
        // the single-mode baseline slot for slot under the same seed.
        let (mut pass, map) = quiet_pass(1.0);
        pass.noise_power_w = 1e-16;
        let cfg = small_cfg();
        let adaptive = run_pass(&pass, &Lut::default_modes(), &map, &cfg, 99).unwrap();
        let baseline = run_pass(&pass, &Lut::new(&[1.0], &[]).unwrap(), &map, &cfg, 99).unwrap();
        assert_eq!(adaptive.len(), baseline.len());
        for (a, b) in adaptive.iter().zip(&baseline) {
            assert!(a.snr_db < 14.0, "slot {} unexpectedly above threshold", a.slot);
            assert_eq!(a, b, "slot {} diverged from the baseline", a.slot);
        }
    }

    #[test]
    fn test_run_pass_reproducible_for_fixed_seed() {
        let (mut pass, map) = quiet_pass(2.0);
        pass.include_shadowing = true;
        pass.sigma_e_db = 2.0;
        let lut = Lut::default_modes();
        let cfg = small_cfg();
        let first = run_pass(&pass, &lut, &map, &cfg, 42).unwrap();
        let second = run_pass(&pass, &lut, &map, &cfg, 42).unwrap();
        assert_eq!(first, second);
        let other = run_pass(&pass, &lut, &map, &cfg, 43).unwrap();
        assert_ne!(first, other, "different seeds should differ somewhere");
    }

    #[test]
    fn test_run_pass_records_failed_slots() {
        // Low-elevation slots resolve to an unknown profile and must be
        // recorded as failures without aborting the rest of the pass.
        let (pass, _) = quiet_pass(1.0);
        let map = ProfileByElevation {
            bands: vec![
                ElevationBand { upper_deg: 40.0, profile: "tdl-zz".into() },
                ElevationBand { upper_deg: 90.5, profile: "tdl-e".into() },
            ],
        };
        let trace = run_pass(&pass, &Lut::default_modes(), &map, &small_cfg(), 5).unwrap();
        assert_eq!(trace.len(), pass.slots);
        let failed: Vec<&SlotRecord> = trace.iter().filter(|r| r.error.is_some()).collect();
        assert!(!failed.is_empty(), "expected low-elevation slots to fail");
        assert!(failed.len() < trace.len(), "expected high-elevation slots to pass");
        for rec in &failed {
            assert!(rec.ber.is_nan() && rec.t_eff_bps.is_nan());
            assert!(rec.theta_deg < 40.0);
        }
        for rec in trace.iter().filter(|r| r.error.is_none()) {
            assert!(rec.ber.is_finite() && rec.t_eff_bps.is_finite());
        }
    }

    #[test]
    fn test_pass_config_validation() {
        let good = PassConfig::default();
        good.validate().unwrap();
        assert!(PassConfig { slots: 1, ..good }.validate().is_err());
        assert!(PassConfig { duration_s: 0.0, ..good }.validate().is_err());
        assert!(PassConfig { max_elevation_deg: 4.0, ..good }.validate().is_err());
        assert!(PassConfig { max_elevation_deg: 91.0, ..good }.validate().is_err());
        assert!(PassConfig { p_tx_w: 0.0, ..good }.validate().is_err());
        assert!(PassConfig { noise_power_w: 0.0, ..good }.validate().is_err());
        assert!(PassConfig { sigma_e_db: -0.5, ..good }.validate().is_err());
        assert!(PassConfig { nu_max_hz: Some(-1.0), ..good }.validate().is_err());
    }

    // -- calibration -------------------------------------------------------------

    #[test]
    fn test_calibrate_lut_recovers_step_model() {
        // Feasibility turns on at known SNRs per factor; the regenerated
        // table must place its thresholds exactly there.
        let need = |alpha: f64| -> f64 {
            if alpha == 1.0 {
                f64::NEG_INFINITY
            } else if alpha == 0.9 {
                12.0
            } else {
                24.0
            }
        };
        let grid: Vec<f64> = (0..=40).map(f64::from).collect();
        let lut = calibrate_lut(&[1.0, 0.9, 0.8], &grid, 1e-3, |alpha, gamma| {
            Ok(if gamma >= need(alpha) { 1e-4 } else { 0.4 })
        })
        .unwrap();
        assert_eq!(lut.modes().len(), 3);
        assert_eq!(lut.modes()[1].alpha, 0.9);
        assert_eq!(lut.modes()[1].threshold_db, 12.0);
        assert_eq!(lut.modes()[2].alpha, 0.8);
        assert_eq!(lut.modes()[2].threshold_db, 24.0);
    }

    #[test]
    fn test_calibrate_lut_ratchets_against_flicker() {
        // A model that briefly reverts feasibility must not produce an
        // invalid (non-monotone) table.
        let grid: Vec<f64> = (0..=30).map(f64::from).collect();
        let lut = calibrate_lut(&[1.0, 0.9], &grid, 1e-3, |alpha, gamma| {
            let feasible = alpha > 0.95 || (gamma >= 10.0 && gamma != 12.0);
            Ok(if feasible { 1e-4 } else { 0.4 })
        })
        .unwrap();
        assert_eq!(lut.modes().len(), 2);
        assert_eq!(lut.modes()[1].threshold_db, 10.0);
        assert_eq!(select_alpha(12.0, &lut), 0.9, "ratchet holds through the flicker");
    }

    #[test]
    fn test_calibrate_lut_infeasible_everywhere_keeps_fallback_only() {
        let grid = [0.0, 10.0, 20.0];
        let lut = calibrate_lut(&[1.0, 0.8], &grid, 1e-3, |_, _| Ok(0.4)).unwrap();
        assert_eq!(lut.modes().len(), 1);
        assert_eq!(select_alpha(50.0, &lut), 1.0);
    }

    #[test]
    fn test_calibrate_lut_rejects_bad_inputs() {
        let grid = [0.0, 1.0];
        assert!(calibrate_lut(&[], &grid, 1e-3, |_, _| Ok(0.0)).is_err());
        assert!(calibrate_lut(&[1.0, 1.0], &grid, 1e-3, |_, _| Ok(0.0)).is_err());
        assert!(calibrate_lut(&[1.0, 0.9], &[1.0, 1.0], 1e-3, |_, _| Ok(0.0)).is_err());
        assert!(calibrate_lut(&[1.0, 0.9], &grid, 0.7, |_, _| Ok(0.0)).is_err());
        assert!(calibrate_lut(&[1.0, 0.9], &grid, 1e-3, |_, _| {
            Err(Error::Domain("model failure".into()))
        })
        .is_err());
    }
}
