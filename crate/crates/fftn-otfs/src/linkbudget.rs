//! Large-scale link budget for a LEO satellite-to-ground path
//!
//! Computes slant geometry, deterministic losses, log-normal shadow fading,
//! and the instantaneous SNR seen by the receiver at a given elevation angle
//! `theta` (degrees above the horizon).
//!
//! With Earth radius `R_E` and satellite altitude `h0`, the slant distance is
//!
//! ```text
//! d(theta) = sqrt(R_E^2 sin^2(theta) + h0^2 + 2 h0 R_E) - R_E sin(theta),
//! ```
//!
//! and the aggregate loss in dB decomposes as
//!
//! ```text
//! L = FSPL(d, fc) + SF + CL(theta, fc) + L_gas(theta) + L_s
//!
//! FSPL  = 32.45 + 20 log10(fc_GHz) + 20 log10(d_m)
//! SF    ~ Normal(0, sigma_SF^2)                    (shadow fading, optional)
//! CL    = A_cl + B_cl log10(fc_GHz) + C (1 - sin(theta))
//! L_gas = A_zenith / sin(theta)
//! ```
//!
//! with a constant scintillation margin `L_s`. The instantaneous SNR follows
//! as `gamma = P_tx * 10^(-L/10) / noise_power`.
//!
//! Everything here is pure except the shadow-fading draw, which takes an
//! explicit RNG so callers own their random streams. Trajectory simulations
//! clamp the elevation at [`MIN_ELEVATION_DEG`] to stay clear of the
//! `1/sin(theta)` divergence at the horizon.
//!
//! ## Example
//!
//! ```rust
//! use fftn_otfs::linkbudget::{GeometryConfig, LinkState, LossParams};
//!
//! let geo = GeometryConfig::default(); // 780 km altitude, Ka-band 28 GHz
//! let p = LossParams::default(); // clear-sky, no clutter
//! let state = LinkState::compute(90.0, &geo, &p, 10.0, 1e-14, 0.0).unwrap();
//! // At zenith the radical collapses: d = h0 exactly.
//! assert_eq!(state.budget.d_m, 780e3);
//! assert!((10.0 * state.snr.log10() - state.snr_db).abs() < 1e-9);
//! ```

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Mean Earth radius in meters.
pub const DEFAULT_EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Elevation floor (degrees) applied by trajectory simulations so that the
/// `1/sin(theta)` gas term and the near-horizon geometry stay finite.
pub const MIN_ELEVATION_DEG: f64 = 5.0;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Orbit and carrier geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    /// Satellite altitude above ground in meters.
    pub h0_m: f64,
    /// Earth radius in meters.
    pub r_earth_m: f64,
    /// Carrier frequency in GHz.
    pub fc_ghz: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            h0_m: 780e3,
            r_earth_m: DEFAULT_EARTH_RADIUS_M,
            fc_ghz: 28.0,
        }
    }
}

impl GeometryConfig {
    /// Checks positivity of the geometric parameters.
    pub fn validate(&self) -> Result<()> {
        if !(self.h0_m > 0.0) {
            return Err(Error::Config(format!(
                "satellite altitude must be positive, got {} m",
                self.h0_m
            )));
        }
        if !(self.r_earth_m > 0.0) {
            return Err(Error::Config(format!(
                "Earth radius must be positive, got {} m",
                self.r_earth_m
            )));
        }
        if !(self.fc_ghz > 0.0) {
            return Err(Error::Config(format!(
                "carrier frequency must be positive, got {} GHz",
                self.fc_ghz
            )));
        }
        Ok(())
    }
}

/// Coefficients of the large-scale loss terms.
///
/// `a_cl_db`/`b_cl_db` set the frequency-dependent clutter floor,
/// `c_factor_db` scales its elevation dependence, `sigma_sf_db` is the
/// shadow-fading standard deviation, `a_zenith_db` the zenith gas
/// attenuation, and `l_s_db` a constant scintillation margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossParams {
    /// Clutter loss offset in dB.
    pub a_cl_db: f64,
    /// Clutter loss slope in dB per decade of carrier frequency.
    pub b_cl_db: f64,
    /// Elevation clutter factor in dB (scales `1 - sin(theta)`).
    pub c_factor_db: f64,
    /// Shadow-fading standard deviation in dB.
    pub sigma_sf_db: f64,
    /// Zenith atmospheric gas attenuation in dB.
    pub a_zenith_db: f64,
    /// Constant scintillation loss in dB.
    pub l_s_db: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        LossParams {
            a_cl_db: 0.0,
            b_cl_db: 0.0,
            c_factor_db: 20.0,
            sigma_sf_db: 0.0,
            a_zenith_db: 0.22,
            l_s_db: 0.3,
        }
    }
}

impl LossParams {
    /// Checks sign constraints on the stochastic and atmospheric terms.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_sf_db >= 0.0) {
            return Err(Error::Config(format!(
                "shadow-fading std must be non-negative, got {} dB",
                self.sigma_sf_db
            )));
        }
        if !(self.a_zenith_db >= 0.0) {
            return Err(Error::Config(format!(
                "zenith gas attenuation must be non-negative, got {} dB",
                self.a_zenith_db
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Loss terms
// ---------------------------------------------------------------------------

/// Clamps an elevation angle to `[MIN_ELEVATION_DEG, 90]` for trajectory use.
pub fn clamp_elevation_deg(theta_deg: f64) -> f64 {
    theta_deg.clamp(MIN_ELEVATION_DEG, 90.0)
}

/// Slant distance in meters from ground terminal to satellite at elevation
/// `theta_deg`.
///
/// Uses the Earth-centered geometric model; rejects `theta_deg <= 0`
/// (below-horizon geometry) and `theta_deg > 90`.
pub fn slant_distance_m(theta_deg: f64, geo: &GeometryConfig) -> Result<f64> {
    if !(theta_deg > 0.0 && theta_deg <= 90.0) {
        return Err(Error::Domain(format!(
            "elevation must lie in (0, 90] degrees, got {theta_deg}"
        )));
    }
    let sin_theta = theta_deg.to_radians().sin();
    let re = geo.r_earth_m;
    let h0 = geo.h0_m;
    let radical = re * re * sin_theta * sin_theta + h0 * h0 + 2.0 * h0 * re;
    Ok(radical.sqrt() - re * sin_theta)
}

/// Free-space path loss in dB for slant distance `d_m` (meters) and carrier
/// `fc_ghz` (GHz). The constant 32.45 fixes that unit system.
pub fn fspl_db(d_m: f64, fc_ghz: f64) -> f64 {
    32.45 + 20.0 * fc_ghz.log10() + 20.0 * d_m.log10()
}

/// Elevation- and frequency-dependent clutter loss in dB.
///
/// Signals arriving from near the zenith see only the frequency floor; the
/// `c_factor_db * (1 - sin(theta))` term vanishes at 90 degrees.
pub fn clutter_loss_db(theta_deg: f64, fc_ghz: f64, p: &LossParams) -> f64 {
    let sin_theta = theta_deg.to_radians().sin();
    p.a_cl_db + p.b_cl_db * fc_ghz.log10() + p.c_factor_db * (1.0 - sin_theta)
}

/// Atmospheric gas attenuation in dB: zenith attenuation scaled by the
/// cosecant of the elevation (longer air path at low angles).
///
/// Rejects `theta_deg <= 0`, where the model diverges.
pub fn gas_attenuation_db(theta_deg: f64, a_zenith_db: f64) -> Result<f64> {
    if !(theta_deg > 0.0) {
        return Err(Error::Domain(format!(
            "gas attenuation needs a positive elevation, got {theta_deg} degrees"
        )));
    }
    Ok(a_zenith_db / theta_deg.to_radians().sin())
}

/// Draws one shadow-fading realization `SF ~ Normal(0, sigma_sf_db^2)` in dB.
pub fn draw_shadow_fading<R: Rng + ?Sized>(sigma_sf_db: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    sigma_sf_db * z
}

// ---------------------------------------------------------------------------
// Composed budget
// ---------------------------------------------------------------------------

/// Per-term breakdown of the aggregate loss at one elevation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Elevation angle in degrees.
    pub theta_deg: f64,
    /// Slant distance in meters.
    pub d_m: f64,
    /// Free-space path loss in dB.
    pub fspl_db: f64,
    /// Shadow-fading realization in dB (zero when shadowing is disabled).
    pub sf_db: f64,
    /// Clutter loss in dB.
    pub cl_db: f64,
    /// Atmospheric gas attenuation in dB.
    pub gas_db: f64,
    /// Constant scintillation loss in dB.
    pub l_s_db: f64,
    /// Aggregate loss in dB: `fspl + sf + cl + gas + l_s`.
    pub l_total_db: f64,
}

impl LinkBudget {
    /// Evaluates every loss term at `theta_deg` with the shadow-fading value
    /// `sf_db` supplied by the caller (pass 0 for the deterministic budget).
    pub fn compute(
        theta_deg: f64,
        geo: &GeometryConfig,
        p: &LossParams,
        sf_db: f64,
    ) -> Result<LinkBudget> {
        let d_m = slant_distance_m(theta_deg, geo)?;
        let fspl = fspl_db(d_m, geo.fc_ghz);
        let cl = clutter_loss_db(theta_deg, geo.fc_ghz, p);
        let gas = gas_attenuation_db(theta_deg, p.a_zenith_db)?;
        Ok(LinkBudget {
            theta_deg,
            d_m,
            fspl_db: fspl,
            sf_db,
            cl_db: cl,
            gas_db: gas,
            l_s_db: p.l_s_db,
            l_total_db: fspl + sf_db + cl + gas + p.l_s_db,
        })
    }
}

/// Aggregate path loss in dB at elevation `theta_deg`.
///
/// When `include_shadowing` is set, one shadow-fading value is drawn from
/// `rng` (the intended granularity is one draw per transmitted frame);
/// otherwise the RNG is untouched and the result is deterministic.
pub fn total_path_loss<R: Rng + ?Sized>(
    theta_deg: f64,
    geo: &GeometryConfig,
    p: &LossParams,
    rng: &mut R,
    include_shadowing: bool,
) -> Result<f64> {
    let sf_db = if include_shadowing {
        draw_shadow_fading(p.sigma_sf_db, rng)
    } else {
        0.0
    };
    Ok(LinkBudget::compute(theta_deg, geo, p, sf_db)?.l_total_db)
}

// ---------------------------------------------------------------------------
// Instantaneous SNR
// ---------------------------------------------------------------------------

/// Converts a dB value to a linear power ratio.
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to dB.
pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Instantaneous SNR (linear ratio) for transmit power `p_tx_w` (watts),
/// aggregate loss `l_db` (dB), and receiver noise power `noise_power_w`
/// (watts).
pub fn instantaneous_snr(p_tx_w: f64, l_db: f64, noise_power_w: f64) -> f64 {
    p_tx_w * db_to_lin(-l_db) / noise_power_w
}

/// Link state at one elevation: loss breakdown plus the SNR it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    /// Per-term loss breakdown.
    pub budget: LinkBudget,
    /// Instantaneous SNR as a linear ratio.
    pub snr: f64,
    /// Instantaneous SNR in dB.
    pub snr_db: f64,
}

impl LinkState {
    /// Composes the loss budget at `theta_deg` with the power pair
    /// `(p_tx_w, noise_power_w)`; `sf_db` is the shadow-fading realization.
    pub fn compute(
        theta_deg: f64,
        geo: &GeometryConfig,
        p: &LossParams,
        p_tx_w: f64,
        noise_power_w: f64,
        sf_db: f64,
    ) -> Result<LinkState> {
        if !(p_tx_w > 0.0) {
            return Err(Error::Config(format!(
                "transmit power must be positive, got {p_tx_w} W"
            )));
        }
        if !(noise_power_w > 0.0) {
            return Err(Error::Config(format!(
                "noise power must be positive, got {noise_power_w} W"
            )));
        }
        let budget = LinkBudget::compute(theta_deg, geo, p, sf_db)?;
        let snr = instantaneous_snr(p_tx_w, budget.l_total_db, noise_power_w);
        Ok(LinkState {
            budget,
            snr,
            snr_db: lin_to_db(snr),
        })
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
