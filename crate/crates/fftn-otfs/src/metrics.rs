//! Rate, reliability, throughput, and energy-efficiency metrics
//!
//! One FTN frame carries `n_bits = M N log2(M_mod)` information bits in the
//! compressed duration `alpha * T_frame` (with `T_frame = N / delta_f` the
//! Nyquist frame length), so the raw rate and raw spectral efficiency are
//!
//! ```text
//! r_raw  = n_bits / (alpha * T_frame),     se_raw = log2(M_mod) / alpha .
//! ```
//!
//! Reliability enters through the average bit error probability `pb`: with
//! independent bit errors the frame error rate and effective (goodput-style)
//! throughput are
//!
//! ```text
//! fer   = 1 - (1 - pb)^n_bits,
//! t_eff = r_raw * (1 - pb)^n_bits,
//! ```
//!
//! and the energy efficiency divides the delivered bits by the energy drawn
//! over one frame, with `xi` the power-amplifier drain efficiency and `p_c`
//! the static circuit power:
//!
//! ```text
//! ee = n_bits (1 - pb)^n_bits / ((p_tx / xi + p_c) * alpha * T_frame) .
//! ```
//!
//! All powers of `(1 - pb)` are evaluated in the log domain to stay accurate
//! for `pb` far below the double-precision epsilon.
//!
//! ## Example
//!
//! ```rust
//! use fftn_otfs::frame::{FrameConfig, Modulation};
//! use fftn_otfs::metrics::raw_rate;
//!
//! let cfg = FrameConfig {
//!     m: 16, n: 16, delta_f_hz: 15e3, alpha: 0.8,
//!     beta: 0.3, l_span: 6, oversampling: 8, modulation: Modulation::Qpsk,
//! };
//! let (n_bits, _r_raw, se_raw) = raw_rate(&cfg);
//! assert_eq!(n_bits, 512);
//! assert_eq!(se_raw, 2.5); // 25% above the Nyquist baseline of 2 bit/s/Hz
//! ```

use crate::error::{Error, Result};
use crate::frame::FrameConfig;
use crate::linkbudget::{GeometryConfig, LinkState, LossParams};

/// Default power-amplifier drain efficiency.
pub const DEFAULT_PA_EFFICIENCY: f64 = 0.35;
/// Default static circuit power in watts.
pub const DEFAULT_CIRCUIT_POWER_W: f64 = 0.5;
/// Default transmit power in watts for energy-efficiency reporting.
pub const DEFAULT_TX_POWER_W: f64 = 1.0;

/// Rate and reliability metrics of one frame configuration at a given `pb`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateMetrics {
    /// Information bits per frame.
    pub n_bits: usize,
    /// Raw bit rate in bit/s.
    pub r_raw: f64,
    /// Raw spectral efficiency in bit/s/Hz.
    pub se_raw: f64,
    /// Frame error rate under independent bit errors.
    pub fer: f64,
    /// Effective throughput (goodput) in bit/s.
    pub t_eff: f64,
    /// Energy efficiency in bit/Joule.
    pub ee: f64,
}

// ---------------------------------------------------------------------------
// Elementary metrics
// ---------------------------------------------------------------------------

/// Bits per frame, raw bit rate, and raw spectral efficiency.
pub fn raw_rate(cfg: &FrameConfig) -> (usize, f64, f64) {
    let n_bits = cfg.n_bits();
    let bits_per_symbol = cfg.modulation.bits_per_symbol() as f64;
    let r_raw = n_bits as f64 / cfg.ftn_frame_duration_s();
    let se_raw = bits_per_symbol / cfg.alpha;
    (n_bits, r_raw, se_raw)
}

/// `(1 - pb)^n` evaluated as `exp(n * log1p(-pb))`.
fn success_power(pb: f64, n_bits: usize) -> f64 {
    (n_bits as f64 * (-pb).ln_1p()).exp()
}

/// Probability that at least one of `n_bits` independent bits is in error.
pub fn frame_error_rate(pb: f64, n_bits: usize) -> f64 {
    debug_assert!((0.0..=1.0).contains(&pb), "pb out of range: {pb}");
    -(n_bits as f64 * (-pb).ln_1p()).exp_m1()
}

/// Effective throughput `r_raw * (1 - pb)^n_bits` in bit/s.
pub fn effective_throughput(cfg: &FrameConfig, pb: f64) -> f64 {
    let (n_bits, r_raw, _) = raw_rate(cfg);
    r_raw * success_power(pb, n_bits)
}

/// Delivered bits per Joule over one frame.
///
/// `xi` is the power-amplifier drain efficiency in `(0, 1]`, `p_c_w` the
/// static circuit power; the frame energy is `(p_tx/xi + p_c) * alpha * T_frame`.
pub fn energy_efficiency(
    cfg: &FrameConfig,
    pb: f64,
    p_tx_w: f64,
    xi: f64,
    p_c_w: f64,
) -> Result<f64> {
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::Domain(format!(
            "PA efficiency must lie in (0, 1], got {xi}"
        )));
    }
    if !(p_tx_w > 0.0) {
        return Err(Error::Domain(format!(
            "transmit power must be positive, got {p_tx_w}"
        )));
    }
    if !(p_c_w >= 0.0) {
        return Err(Error::Domain(format!(
            "circuit power must be non-negative, got {p_c_w}"
        )));
    }
    let n_bits = cfg.n_bits();
    let frame_energy_j = (p_tx_w / xi + p_c_w) * cfg.ftn_frame_duration_s();
    Ok(n_bits as f64 * success_power(pb, n_bits) / frame_energy_j)
}

/// All rate metrics of a configuration at a given bit error probability.
pub fn compute_metrics(
    cfg: &FrameConfig,
    pb: f64,
    p_tx_w: f64,
    xi: f64,
    p_c_w: f64,
) -> Result<RateMetrics> {
    let (n_bits, r_raw, se_raw) = raw_rate(cfg);
    Ok(RateMetrics {
        n_bits,
        r_raw,
        se_raw,
        fer: frame_error_rate(pb, n_bits),
        t_eff: effective_throughput(cfg, pb),
        ee: energy_efficiency(cfg, pb, p_tx_w, xi, p_c_w)?,
    })
}

// ---------------------------------------------------------------------------
// Link-budget composition
// ---------------------------------------------------------------------------

/// Effective throughput at an elevation angle, composing the deterministic
/// link budget (no shadowing draw) with a caller-supplied BER model.
///
/// `pb_model` maps the linear SNR at the detector input to an average bit
/// error probability. Elevations below the 5-degree mask are clamped.
pub fn throughput_vs_elevation<F>(
    theta_deg: f64,
    cfg: &FrameConfig,
    geometry: &GeometryConfig,
    loss: &LossParams,
    p_tx_w: f64,
    noise_w: f64,
    pb_model: F,
) -> Result<f64>
where
    F: FnOnce(f64) -> Result<f64>,
{
    let theta = crate::linkbudget::clamp_elevation_deg(theta_deg);
    let state = LinkState::compute(theta, geometry, loss, p_tx_w, noise_w, 0.0)?;
    let pb = pb_model(state.snr)?;
    Ok(effective_throughput(cfg, pb))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Modulation;
    use crate::linkbudget::MIN_ELEVATION_DEG;

    fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn cfg(m: usize, n: usize, alpha: f64, modulation: Modulation) -> FrameConfig {
        FrameConfig {
            m,
            n,
            delta_f_hz: 15e3,
            alpha,
            beta: 0.3,
            l_span: 6,
            oversampling: 8,
            modulation,
        }
    }

    // -- raw rate -------------------------------------------------------------

    #[test]
    fn test_raw_rate_nyquist_qpsk_baseline() {
        let (n_bits, r_raw, se_raw) = raw_rate(&cfg(16, 16, 1.0, Modulation::Qpsk));
        assert_eq!(n_bits, 512);
        assert_eq!(se_raw, 2.0);
        // T_frame = 16 / 15 kHz; r_raw = 512 * 15000 / 16 = 480 kbit/s.
        assert!(approx_eq(r_raw, 480e3, 1e-6), "r_raw = {r_raw}");
    }

    #[test]
    fn test_raw_rate_compression_gain() {
        let (_, r08, se08) = raw_rate(&cfg(16, 16, 0.8, Modulation::Qpsk));
        let (_, r10, se10) = raw_rate(&cfg(16, 16, 1.0, Modulation::Qpsk));
        assert_eq!(se08, 2.5, "25% spectral-efficiency gain at alpha = 0.8");
        assert!(approx_eq(r08 / r10, 1.25, 1e-12));
        assert_eq!(se10, 2.0);
    }

    #[test]
    fn test_raw_rate_bit_count_fig5_grid() {
        let (n_bits, _, _) = raw_rate(&cfg(32, 16, 0.9, Modulation::Qpsk));
        assert_eq!(n_bits, 1024);
    }

    #[test]
    fn test_se_alpha_product_is_bits_per_symbol() {
        for alpha in [1.0, 0.95, 0.9, 0.85, 0.8] {
            let (_, _, se) = raw_rate(&cfg(8, 8, alpha, Modulation::Qpsk));
            assert!(
                approx_eq(se * alpha, 2.0, 1e-12),
                "se * alpha = {} at alpha = {alpha}",
                se * alpha
            );
        }
    }

    // -- frame error rate -------------------------------------------------------

    #[test]
    fn test_frame_error_rate_endpoints() {
        assert_eq!(frame_error_rate(0.0, 512), 0.0);
        assert_eq!(frame_error_rate(1.0, 512), 1.0);
    }

    #[test]
    fn test_frame_error_rate_small_pb_value() {
        // 1 - (1 - 1e-6)^512, evaluated independently to high precision.
        let fer = frame_error_rate(1e-6, 512);
        assert!(approx_eq(fer, 5.1187e-4, 1e-8), "fer = {fer}");
    }

    #[test]
    fn test_frame_error_rate_monotone() {
        // Strictly increasing until the frame error rate saturates at 1 in
        // double precision (already at pb = 0.5 over 256 bits).
        let mut prev = -1.0;
        for pb in [0.0, 1e-9, 1e-6, 1e-3, 0.1, 0.5, 1.0] {
            let fer = frame_error_rate(pb, 256);
            assert!(
                fer > prev || (fer == prev && fer == 1.0),
                "fer not monotone in pb at pb = {pb}"
            );
            prev = fer;
        }
        assert!(frame_error_rate(1e-4, 1024) > frame_error_rate(1e-4, 256));
    }

    #[test]
    fn test_frame_error_rate_tiny_pb_no_cancellation() {
        // Far below epsilon the naive 1 - (1-pb)^n would return 0.
        let fer = frame_error_rate(1e-18, 512);
        assert!(approx_eq(fer, 512e-18, 1e-21), "fer = {fer}");
    }

    // -- effective throughput ----------------------------------------------------

    #[test]
    fn test_effective_throughput_error_free_is_raw_rate() {
        let c = cfg(16, 16, 0.9, Modulation::Qpsk);
        let (_, r_raw, _) = raw_rate(&c);
        assert_eq!(effective_throughput(&c, 0.0), r_raw);
    }

    #[test]
    fn test_effective_throughput_reliability_collapse() {
        // pb = 1/2 over 512 bits: succeeds with probability 2^-512.
        let c = cfg(16, 16, 1.0, Modulation::Qpsk);
        let t = effective_throughput(&c, 0.5);
        assert!(t < 1e-100, "t_eff = {t}");
    }

    #[test]
    fn test_effective_throughput_bounded_by_raw_rate() {
        let c = cfg(8, 8, 0.85, Modulation::Bpsk);
        let (_, r_raw, _) = raw_rate(&c);
        for pb in [0.0, 1e-8, 1e-4, 1e-2, 0.3, 1.0] {
            let t = effective_throughput(&c, pb);
            assert!(t <= r_raw, "t_eff {t} exceeds r_raw {r_raw} at pb = {pb}");
            if pb > 0.0 {
                assert!(t < r_raw);
            }
        }
    }

    // -- energy efficiency ---------------------------------------------------------

    #[test]
    fn test_energy_efficiency_overhead_free_baseline() {
        // pb=0, xi=1, P_c=0, P_tx=1, alpha=1: ee = n_bits / T_frame.
        let c = cfg(16, 16, 1.0, Modulation::Qpsk);
        let ee = energy_efficiency(&c, 0.0, 1.0, 1.0, 0.0).unwrap();
        let want = c.n_bits() as f64 / c.frame_duration_s();
        assert!(approx_eq(ee, want, 1e-6), "ee = {ee} vs {want}");
    }

    #[test]
    fn test_energy_efficiency_doubles_when_alpha_halves() {
        let full = cfg(16, 16, 1.0, Modulation::Qpsk);
        let half = cfg(16, 16, 0.5, Modulation::Qpsk);
        let ee_full = energy_efficiency(&full, 0.0, 2.0, 0.4, 0.3).unwrap();
        let ee_half = energy_efficiency(&half, 0.0, 2.0, 0.4, 0.3).unwrap();
        assert!(approx_eq(ee_half / ee_full, 2.0, 1e-12));
    }

    #[test]
    fn test_energy_efficiency_reliability_composition() {
        // ee(pb) = (1 - fer) * ee(0) by construction.
        let c = cfg(16, 16, 1.0, Modulation::Qpsk);
        let pb = 1e-6;
        let ee = energy_efficiency(&c, pb, 1.0, DEFAULT_PA_EFFICIENCY, DEFAULT_CIRCUIT_POWER_W)
            .unwrap();
        let ee0 = energy_efficiency(&c, 0.0, 1.0, DEFAULT_PA_EFFICIENCY, DEFAULT_CIRCUIT_POWER_W)
            .unwrap();
        let fer = frame_error_rate(pb, c.n_bits());
        assert!(approx_eq(ee, (1.0 - fer) * ee0, 1e-15 * ee0.abs()));
    }

    #[test]
    fn test_energy_efficiency_rejects_bad_parameters() {
        let c = cfg(4, 4, 1.0, Modulation::Bpsk);
        assert!(energy_efficiency(&c, 0.0, 1.0, 0.0, 0.0).is_err());
        assert!(energy_efficiency(&c, 0.0, 1.0, 1.1, 0.0).is_err());
        assert!(energy_efficiency(&c, 0.0, 0.0, 0.5, 0.0).is_err());
        assert!(energy_efficiency(&c, 0.0, 1.0, 0.5, -0.1).is_err());
    }

    // -- bundle and link composition ------------------------------------------------

    #[test]
    fn test_compute_metrics_bundle_consistency() {
        let c = cfg(16, 16, 0.9, Modulation::Qpsk);
        let pb = 3e-5;
        let m = compute_metrics(&c, pb, 1.0, 0.35, 0.5).unwrap();
        assert_eq!(m.n_bits, 512);
        assert!(approx_eq(m.fer, frame_error_rate(pb, 512), 0.0));
        assert!(approx_eq(m.t_eff, effective_throughput(&c, pb), 0.0));
        assert!(m.t_eff <= m.r_raw);
        assert!(approx_eq(m.se_raw, 2.0 / 0.9, 1e-12));
    }

    #[test]
    fn test_throughput_vs_elevation_monotone_for_los_profile() {
        // Higher elevation has lower loss, so with a monotone BER model the
        // throughput cannot decrease from 20 to 85 degrees.
        let c = cfg(16, 16, 0.9, Modulation::Qpsk);
        let geo = GeometryConfig::default();
        let loss = LossParams::default();
        let model = |snr: f64| Ok((0.5 * (-snr / 50.0).exp()).min(0.5));
        let low = throughput_vs_elevation(20.0, &c, &geo, &loss, 10.0, 1e-13, model).unwrap();
        let high = throughput_vs_elevation(85.0, &c, &geo, &loss, 10.0, 1e-13, model).unwrap();
        assert!(
            high >= low,
            "throughput fell from {low} at 20 deg to {high} at 85 deg"
        );
    }

    #[test]
    fn test_throughput_vs_elevation_error_free_is_raw_rate() {
        let c = cfg(16, 16, 1.0, Modulation::Qpsk);
        let (_, r_raw, _) = raw_rate(&c);
        let t = throughput_vs_elevation(
            40.0,
            &c,
            &GeometryConfig::default(),
            &LossParams::default(),
            1.0,
            1e-12,
            |_| Ok(0.0),
        )
        .unwrap();
        assert_eq!(t, r_raw);
    }

    #[test]
    fn test_throughput_vs_elevation_clamps_low_angles() {
        let c = cfg(8, 8, 1.0, Modulation::Bpsk);
        let geo = GeometryConfig::default();
        let loss = LossParams::default();
        let model = |snr: f64| Ok((0.25 * (-snr / 10.0).exp()).min(0.5));
        let below = throughput_vs_elevation(2.0, &c, &geo, &loss, 1.0, 1e-12, model).unwrap();
        let at_mask =
            throughput_vs_elevation(MIN_ELEVATION_DEG, &c, &geo, &loss, 1.0, 1e-12, model)
                .unwrap();
        assert_eq!(below, at_mask);
    }
}
