//! Frame geometry, timing, and bit/symbol mapping
//!
//! A frame carries an `M x N` delay-Doppler grid of constellation symbols:
//! `M` delay bins and `N` Doppler bins. With subcarrier spacing `delta_f` the
//! Nyquist symbol interval of the serialized pulse train is
//!
//! ```text
//! T_sym = 1 / delta_f          (duration of one grid column)
//! T0    = T_sym / M            (Nyquist pulse spacing)
//! T_F   = alpha * T0           (FTN pulse spacing, alpha <= 1)
//! ```
//!
//! so a frame occupies `N * T_sym` seconds at `alpha = 1` and
//! `alpha * N * T_sym` seconds when compressed. Grid resolutions follow from
//! the frame span:
//!
//! ```text
//! delta_tau = 1 / (M * delta_f) = T0            (delay bin)
//! delta_nu  = 1 / (M * N * T_F)                 (Doppler bin)
//! ```
//!
//! Grids are stored as `M x N` arrays indexed `[l, k]` (delay `l`, Doppler
//! `k`) and serialized delay-fastest: vector element `u = l + k * M`.
//!
//! ## Example
//!
//! ```rust
//! use fftn_otfs::frame::{FrameConfig, Modulation};
//!
//! let cfg = FrameConfig { m: 16, n: 16, alpha: 0.9, ..FrameConfig::default() };
//! assert!((cfg.t_sym_s() - 1.0 / 15e3).abs() < 1e-18);
//! assert!((cfg.ftn_frame_duration_s() - 0.9 * cfg.frame_duration_s()).abs() < 1e-12);
//!
//! let bits: Vec<u8> = (0..cfg.n_bits()).map(|i| (i % 2) as u8).collect();
//! let grid = fftn_otfs::frame::map_bits(&bits, &cfg).unwrap();
//! let back = fftn_otfs::frame::demap_symbols(&grid, &cfg);
//! assert_eq!(bits, back);
//! ```

use crate::error::{Error, Result};
use crate::C64;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// Modulation
// ---------------------------------------------------------------------------

/// Constellation used on the delay-Doppler grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    /// Binary phase-shift keying, symbols {+1, -1}.
    Bpsk,
    /// Gray-mapped quadrature phase-shift keying, symbols (±1 ± j)/sqrt(2).
    Qpsk,
}

impl Modulation {
    /// Bits carried by one grid symbol.
    pub fn bits_per_symbol(&self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
        }
    }
}

// ---------------------------------------------------------------------------
// Frame configuration
// ---------------------------------------------------------------------------

/// Dimensions and waveform parameters of one FTN-OTFS frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    /// Number of delay bins (grid rows).
    pub m: usize,
    /// Number of Doppler bins (grid columns).
    pub n: usize,
    /// Subcarrier spacing in Hz.
    #[serde(default = "default_delta_f")]
    pub delta_f_hz: f64,
    /// FTN compression factor, `0 < alpha <= 1` (`1` = Nyquist signaling).
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Root-raised-cosine roll-off, `0 <= beta <= 1`.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// One-sided pulse truncation in units of `T0` (pulse spans `2 * l_span * T0`).
    #[serde(default = "default_l_span")]
    pub l_span: usize,
    /// Samples per `T0` used by numerical pulse integrals.
    #[serde(default = "default_oversampling")]
    pub oversampling: usize,
    /// Constellation on the grid.
    #[serde(default = "default_modulation")]
    pub modulation: Modulation,
}

fn default_delta_f() -> f64 {
    15e3
}
fn default_alpha() -> f64 {
    1.0
}
fn default_beta() -> f64 {
    0.3
}
fn default_l_span() -> usize {
    6
}
fn default_oversampling() -> usize {
    8
}
fn default_modulation() -> Modulation {
    Modulation::Qpsk
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            m: 16,
            n: 16,
            delta_f_hz: default_delta_f(),
            alpha: default_alpha(),
            beta: default_beta(),
            l_span: default_l_span(),
            oversampling: default_oversampling(),
            modulation: default_modulation(),
        }
    }
}

impl FrameConfig {
    /// Checks every parameter against its allowed range.
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.n < 2 {
            return Err(Error::Config(format!(
                "grid must be at least 2x2, got {}x{}",
                self.m, self.n
            )));
        }
        if !(self.delta_f_hz > 0.0) {
            return Err(Error::Config(format!(
                "subcarrier spacing must be positive, got {}",
                self.delta_f_hz
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!(
                "FTN factor must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!(
                "roll-off must lie in [0, 1], got {}",
                self.beta
            )));
        }
        if self.l_span == 0 {
            return Err(Error::Config("pulse span must be at least 1".into()));
        }
        if self.oversampling < 2 {
            return Err(Error::Config(format!(
                "oversampling must be at least 2, got {}",
                self.oversampling
            )));
        }
        Ok(())
    }

    /// Grid size `M * N` (symbols per frame).
    pub fn mn(&self) -> usize {
        self.m * self.n
    }

    /// Payload bits per frame.
    pub fn n_bits(&self) -> usize {
        self.mn() * self.modulation.bits_per_symbol()
    }

    /// Nyquist column duration `T_sym = 1 / delta_f` in seconds.
    pub fn t_sym_s(&self) -> f64 {
        1.0 / self.delta_f_hz
    }

    /// Nyquist pulse spacing `T0 = T_sym / M` in seconds.
    pub fn t0_s(&self) -> f64 {
        self.t_sym_s() / self.m as f64
    }

    /// FTN pulse spacing `T_F = alpha * T0` in seconds.
    pub fn t_f_s(&self) -> f64 {
        self.alpha * self.t0_s()
    }

    /// Delay-bin width `delta_tau = 1 / (M * delta_f)` in seconds.
    pub fn delay_resolution_s(&self) -> f64 {
        self.t0_s()
    }

    /// Doppler-bin width `delta_nu = 1 / (M * N * T_F)` in Hz.
    pub fn doppler_resolution_hz(&self) -> f64 {
        1.0 / (self.mn() as f64 * self.t_f_s())
    }

    /// Frame duration at Nyquist spacing, `N * T_sym` in seconds.
    pub fn frame_duration_s(&self) -> f64 {
        self.n as f64 * self.t_sym_s()
    }

    /// Frame duration of the compressed pulse train, `alpha * N * T_sym`.
    pub fn ftn_frame_duration_s(&self) -> f64 {
        self.mn() as f64 * self.t_f_s()
    }

    /// Default one-sided Doppler spread for channel draws: two Doppler bins.
    pub fn default_nu_max_hz(&self) -> f64 {
        2.0 * self.doppler_resolution_hz()
    }
}

// ---------------------------------------------------------------------------
// Bit <-> symbol mapping
// ---------------------------------------------------------------------------

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Maps one symbol's bits to a constellation point.
///
/// QPSK is Gray-mapped with the first bit selecting the real sign and the
/// second the imaginary sign (`0 -> +`): `[0,0] -> (+1+j)/sqrt(2)`,
/// `[1,1] -> (-1-j)/sqrt(2)`. BPSK maps `0 -> +1`, `1 -> -1`. Both have unit
/// average symbol energy.
pub fn map_symbol(bits: &[u8], modulation: Modulation) -> C64 {
    match modulation {
        Modulation::Bpsk => C64::new(1.0 - 2.0 * bits[0] as f64, 0.0),
        Modulation::Qpsk => C64::new(
            (1.0 - 2.0 * bits[0] as f64) * FRAC_1_SQRT_2,
            (1.0 - 2.0 * bits[1] as f64) * FRAC_1_SQRT_2,
        ),
    }
}

/// Hard-decides one received symbol back to bits.
///
/// Decision boundaries are the axes; values exactly on a boundary decide to
/// bit 0 (`re >= 0 -> 0`, `im >= 0 -> 0`) so the mapping is total.
pub fn demap_symbol(z: C64, modulation: Modulation, out: &mut Vec<u8>) {
    match modulation {
        Modulation::Bpsk => out.push(if z.re < 0.0 { 1 } else { 0 }),
        Modulation::Qpsk => {
            out.push(if z.re < 0.0 { 1 } else { 0 });
            out.push(if z.im < 0.0 { 1 } else { 0 });
        }
    }
}

/// Fills an `M x N` delay-Doppler grid from a bit sequence.
///
/// Bits are consumed in serialized grid order (delay index fastest): symbol
/// `u = l + k * M` takes bits `u * bps .. (u + 1) * bps`. The bit slice must
/// contain exactly [`FrameConfig::n_bits`] entries of value 0 or 1.
pub fn map_bits(bits: &[u8], cfg: &FrameConfig) -> Result<Array2<C64>> {
    let bps = cfg.modulation.bits_per_symbol();
    if bits.len() != cfg.n_bits() {
        return Err(Error::Domain(format!(
            "expected {} bits for a {}x{} grid, got {}",
            cfg.n_bits(),
            cfg.m,
            cfg.n,
            bits.len()
        )));
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::Domain(format!("bits must be 0 or 1, got {b}")));
    }
    let mut grid = Array2::zeros((cfg.m, cfg.n));
    for k in 0..cfg.n {
        for l in 0..cfg.m {
            let u = l + k * cfg.m;
            grid[[l, k]] = map_symbol(&bits[u * bps..(u + 1) * bps], cfg.modulation);
        }
    }
    Ok(grid)
}

/// Hard-demaps a received grid back to bits in serialized grid order.
pub fn demap_symbols(grid: &Array2<C64>, cfg: &FrameConfig) -> Vec<u8> {
    let mut bits = Vec::with_capacity(cfg.n_bits());
    for k in 0..grid.ncols() {
        for l in 0..grid.nrows() {
            demap_symbol(grid[[l, k]], cfg.modulation, &mut bits);
        }
    }
    bits
}

/// Demaps a serialized (delay-fastest) symbol vector back to bits.
pub fn demap_vec(x: &[C64], modulation: Modulation) -> Vec<u8> {
    let mut bits = Vec::with_capacity(x.len() * modulation.bits_per_symbol());
    for &z in x {
        demap_symbol(z, modulation, &mut bits);
    }
    bits
}

/// Number of positions at which two bit sequences differ.
pub fn count_bit_errors(a: &[u8], b: &[u8]) -> u64 {
    assert_eq!(a.len(), b.len(), "bit sequences must have equal length");
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    // -----------------------------------------------------------------------
    // Timing identities
    // -----------------------------------------------------------------------

    #[test]
    fn test_timing_identities() {
        let cfg = FrameConfig {
            m: 16,
            n: 32,
            alpha: 0.9,
            ..FrameConfig::default()
        };
        // M*N pulses spaced T_F span alpha * N * T_sym.
        assert!(approx_eq(
            cfg.mn() as f64 * cfg.t_f_s(),
            cfg.alpha * cfg.frame_duration_s(),
            1e-15
        ));
        // Delay-bin width equals the Nyquist pulse spacing.
        assert!(approx_eq(cfg.delay_resolution_s(), cfg.t0_s(), 1e-20));
        // Doppler-bin width is the reciprocal of the compressed frame span.
        assert!(approx_eq(
            cfg.doppler_resolution_hz(),
            1.0 / cfg.ftn_frame_duration_s(),
            1e-9
        ));
    }

    #[test]
    fn test_nyquist_frame_duration() {
        let cfg = FrameConfig::default();
        // 16 columns at 1/15 kHz each: 16 / 15e3 s.
        assert!(approx_eq(cfg.frame_duration_s(), 16.0 / 15e3, 1e-12));
        assert!(approx_eq(cfg.ftn_frame_duration_s(), cfg.frame_duration_s(), 1e-12));
    }

    // -----------------------------------------------------------------------
    // Validation
    // -----------------------------------------------------------------------

    #[test]
    fn test_validate_rejects_bad_alpha() {
        let mut cfg = FrameConfig::default();
        cfg.alpha = 0.0;
        assert!(cfg.validate().is_err());
        cfg.alpha = 1.2;
        assert!(cfg.validate().is_err());
        cfg.alpha = 0.8;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn test_validate_rejects_degenerate_grid() {
        let mut cfg = FrameConfig::default();
        cfg.m = 1;
        assert!(cfg.validate().is_err());
        cfg.m = 16;
        cfg.beta = 1.5;
        assert!(cfg.validate().is_err());
    }

    // -----------------------------------------------------------------------
    // Mapping
    // -----------------------------------------------------------------------

    #[test]
    fn test_qpsk_constellation_points() {
        let s = FRAC_1_SQRT_2;
        let cases = [
            ([0u8, 0u8], C64::new(s, s)),
            ([0, 1], C64::new(s, -s)),
            ([1, 0], C64::new(-s, s)),
            ([1, 1], C64::new(-s, -s)),
        ];
        for (bits, want) in cases {
            let got = map_symbol(&bits, Modulation::Qpsk);
            assert!(
                (got - want).norm() < 1e-15,
                "bits {bits:?}: expected {want}, got {got}"
            );
        }
    }

    #[test]
    fn test_unit_average_symbol_energy() {
        // QPSK points all have |s|^2 = 1 exactly; BPSK likewise.
        for bits in [[0u8, 0u8], [0, 1], [1, 0], [1, 1]] {
            assert!(approx_eq(map_symbol(&bits, Modulation::Qpsk).norm_sqr(), 1.0, 1e-15));
        }
        for b in [0u8, 1] {
            assert!(approx_eq(map_symbol(&[b], Modulation::Bpsk).norm_sqr(), 1.0, 1e-18));
        }
    }

    #[test]
    fn test_roundtrip_exhaustive_small_grid() {
        // Every 2-bit pattern in every slot of a 2x2 grid survives map+demap.
        let cfg = FrameConfig {
            m: 2,
            n: 2,
            ..FrameConfig::default()
        };
        for pattern in 0u32..256 {
            let bits: Vec<u8> = (0..8).map(|i| ((pattern >> i) & 1) as u8).collect();
            let grid = map_bits(&bits, &cfg).unwrap();
            assert_eq!(demap_symbols(&grid, &cfg), bits, "pattern {pattern:#010b}");
        }
    }

    #[test]
    fn test_roundtrip_random_bits() {
        let cfg = FrameConfig::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let bits: Vec<u8> = (0..cfg.n_bits()).map(|_| rng.gen_range(0..=1u8)).collect();
            let grid = map_bits(&bits, &cfg).unwrap();
            assert_eq!(demap_symbols(&grid, &cfg), bits);
        }
    }

    #[test]
    fn test_demap_tie_breaks_to_zero() {
        let mut bits = Vec::new();
        demap_symbol(C64::new(0.0, 0.0), Modulation::Qpsk, &mut bits);
        assert_eq!(bits, vec![0, 0], "boundary samples must decide to bit 0");
        bits.clear();
        demap_symbol(C64::new(0.0, -0.0), Modulation::Bpsk, &mut bits);
        assert_eq!(bits, vec![0]);
    }

    #[test]
    fn test_serialized_order_is_delay_fastest() {
        // Flip only the bits of symbol u = l + k*M = 3 (l=1, k=1 for M=2)
        // and confirm exactly that grid entry changes.
        let cfg = FrameConfig {
            m: 2,
            n: 2,
            ..FrameConfig::default()
        };
        let zeros = vec![0u8; cfg.n_bits()];
        let mut flipped = zeros.clone();
        flipped[6] = 1;
        flipped[7] = 1;
        let g0 = map_bits(&zeros, &cfg).unwrap();
        let g1 = map_bits(&flipped, &cfg).unwrap();
        for l in 0..2 {
            for k in 0..2 {
                let changed = (g0[[l, k]] - g1[[l, k]]).norm() > 1e-12;
                assert_eq!(changed, l == 1 && k == 1, "slot ({l},{k})");
            }
        }
    }

    #[test]
    fn test_map_bits_rejects_wrong_length_and_values() {
        let cfg = FrameConfig::default();
        assert!(map_bits(&[0u8; 3], &cfg).is_err());
        let mut bits = vec![0u8; cfg.n_bits()];
        bits[0] = 2;
        assert!(map_bits(&bits, &cfg).is_err());
    }

    #[test]
    fn test_count_bit_errors() {
        assert_eq!(count_bit_errors(&[0, 1, 1, 0], &[0, 1, 0, 1]), 2);
        assert_eq!(count_bit_errors(&[], &[]), 0);
    }
}
