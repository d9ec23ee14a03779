//! Flexible faster-than-Nyquist OTFS link simulator for LEO satellite downlinks
//!
//! Link-level simulation chain for an OTFS (orthogonal time-frequency space)
//! system whose time-domain pulse train is compressed by a faster-than-Nyquist
//! factor `alpha <= 1`. Delay-Doppler payload grids are mapped to a serial
//! pulse train via the inverse symplectic finite Fourier transform, pushed
//! through a tapped-delay-line LEO satellite channel with per-tap Doppler,
//! matched-filtered, and recovered with an LMMSE detector that accounts for
//! both the FTN-induced intersymbol interference and the correlated
//! (non-white) noise at the matched-filter output.
//!
//! The crate is organised as a library plus a CLI binary (`fftn-otfs`):
//!
//! - [`frame`]: grid dimensions, timing, bit/symbol mapping
//! - [`pulse`]: root-raised-cosine pulse, ambiguity function, Gram matrices
//! - [`linkbudget`]: slant geometry, path loss, clutter/gas/shadowing, SNR
//! - [`channel`]: tapped-delay-line profiles, Ricean taps, Doppler draws
//! - [`modem`]: ISFFT/SFFT, effective delay-Doppler channel matrix, TX chain
//! - [`detector`]: LMMSE detection, per-symbol SINR, theoretical BER
//! - [`metrics`]: throughput, spectral and energy efficiency, FER
//! - [`adapt`]: SNR-threshold lookup tables for the FTN factor, pass runs
//! - [`sweep`]: Monte-Carlo BER/throughput/robustness sweeps, CSV output
//!
//! ## Example
//!
//! ```rust
//! use fftn_otfs::frame::{FrameConfig, Modulation};
//! use fftn_otfs::channel::{self, DelayQuant};
//! use fftn_otfs::modem::{self, PulseMode};
//! use rand::SeedableRng;
//!
//! let cfg = FrameConfig {
//!     m: 16,
//!     n: 16,
//!     delta_f_hz: 15e3,
//!     alpha: 0.9,
//!     beta: 0.3,
//!     l_span: 6,
//!     oversampling: 8,
//!     modulation: Modulation::Qpsk,
//! };
//! cfg.validate().unwrap();
//!
//! let profile = channel::builtin_profile("tdl-d").unwrap();
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let chan = channel::realize(&profile, &cfg, cfg.default_nu_max_hz(),
//!                             DelayQuant::Floor, &mut rng).unwrap();
//! let h = modem::build_heff(&cfg, &chan, 0.0, PulseMode::Rrc).unwrap();
//! assert_eq!(h.h.nrows(), 256);
//! ```

// Link against the system BLAS/LAPACK backend.
extern crate blas_src;
extern crate openblas_src;

pub mod adapt;
pub mod channel;
pub mod detector;
pub mod error;
pub mod frame;
pub mod linalg;
pub mod linkbudget;
pub mod metrics;
pub mod modem;
pub mod pulse;
pub mod scenario;
pub mod seeding;
pub mod sweep;
pub mod transform;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;
