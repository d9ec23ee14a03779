//! Symplectic finite Fourier transforms between delay-Doppler and time domain
//!
//! The `M x N` delay-Doppler grid `x[l, k]` is serialized delay-fastest into a
//! vector of `M * N` pulse-train symbols, element `u = l + k * M`. The inverse
//! SFFT that produces the transmitted symbol sequence is the unitary matrix
//!
//! ```text
//! U = F_N (x) F_M^H        ((x) = Kronecker product)
//! ```
//!
//! acting on the serialized vector, where `F_M[a, b] = exp(-j 2 pi a b / M) / sqrt(M)`
//! is the normalized DFT. Equivalently, on the grid: an inverse DFT along the
//! delay axis and a forward DFT along the Doppler axis,
//!
//! ```text
//! s[m + n*M] = (1 / sqrt(M*N)) * sum_{l,k} x[l,k] exp(+j2pi m l / M) exp(-j2pi n k / N).
//! ```
//!
//! The receive-side SFFT is the adjoint `U^H`. Both are applied with FFTs in
//! `O(M N log M N)`; plans are cached per length.
//!
//! ## Example
//!
//! ```rust
//! use fftn_otfs::transform::{isfft_vec_inplace, sfft_vec_inplace};
//! use fftn_otfs::C64;
//!
//! let mut x: Vec<C64> = (0..12).map(|u| C64::new(u as f64, -(u as f64))).collect();
//! let orig = x.clone();
//! isfft_vec_inplace(&mut x, 4, 3);
//! sfft_vec_inplace(&mut x, 4, 3);
//! for (a, b) in x.iter().zip(&orig) {
//!     assert!((a - b).norm() < 1e-12);
//! }
//! ```

use crate::C64;
use ndarray::Array2;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

// ---------------------------------------------------------------------------
// FFT plan cache
// ---------------------------------------------------------------------------

type PlanKey = (usize, bool); // (length, inverse?)

fn plan_cache() -> &'static Mutex<HashMap<PlanKey, Arc<dyn Fft<f64>>>> {
    static PLANS: OnceLock<Mutex<HashMap<PlanKey, Arc<dyn Fft<f64>>>>> = OnceLock::new();
    PLANS.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Returns a cached FFT plan of the given length and direction.
pub fn fft_plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut cache = plan_cache().lock().expect("fft plan cache poisoned");
    cache
        .entry((len, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

// ---------------------------------------------------------------------------
// Vector (serialized) transforms
// ---------------------------------------------------------------------------

/// Applies one FFT along the delay axis (contiguous chunks of length `m`)
/// and one along the Doppler axis (stride `m`), then rescales by
/// `1 / sqrt(M * N)` so the overall map is unitary.
fn split_fft_inplace(x: &mut [C64], m: usize, n: usize, inv_delay: bool, inv_doppler: bool) {
    assert_eq!(x.len(), m * n, "vector length must equal m * n");
    let plan_m = fft_plan(m, inv_delay);
    let plan_n = fft_plan(n, inv_doppler);

    // Delay axis: each Doppler column is a contiguous chunk.
    let mut scratch = vec![C64::new(0.0, 0.0); plan_m.get_inplace_scratch_len()];
    for chunk in x.chunks_exact_mut(m) {
        plan_m.process_with_scratch(chunk, &mut scratch);
    }

    // Doppler axis: gather strided rows into a scratch buffer.
    let mut row = vec![C64::new(0.0, 0.0); n];
    let mut scratch_n = vec![C64::new(0.0, 0.0); plan_n.get_inplace_scratch_len()];
    for l in 0..m {
        for k in 0..n {
            row[k] = x[l + k * m];
        }
        plan_n.process_with_scratch(&mut row, &mut scratch_n);
        for k in 0..n {
            x[l + k * m] = row[k];
        }
    }

    let scale = 1.0 / ((m * n) as f64).sqrt();
    for v in x.iter_mut() {
        *v *= scale;
    }
}

/// Inverse SFFT on a serialized vector: `x <- U x` with `U = F_N (x) F_M^H`.
pub fn isfft_vec_inplace(x: &mut [C64], m: usize, n: usize) {
    split_fft_inplace(x, m, n, true, false);
}

/// SFFT on a serialized vector: `x <- U^H x` with `U^H = F_N^H (x) F_M`.
pub fn sfft_vec_inplace(x: &mut [C64], m: usize, n: usize) {
    split_fft_inplace(x, m, n, false, true);
}

// ---------------------------------------------------------------------------
// Grid helpers
// ---------------------------------------------------------------------------

/// Serializes an `M x N` grid delay-fastest: `out[l + k * M] = grid[l, k]`.
pub fn grid_to_vec(grid: &Array2<C64>) -> Vec<C64> {
    let (m, n) = grid.dim();
    let mut v = Vec::with_capacity(m * n);
    for k in 0..n {
        for l in 0..m {
            v.push(grid[[l, k]]);
        }
    }
    v
}

/// Inverse of [`grid_to_vec`].
pub fn vec_to_grid(v: &[C64], m: usize, n: usize) -> Array2<C64> {
    assert_eq!(v.len(), m * n, "vector length must equal m * n");
    let mut grid = Array2::zeros((m, n));
    for k in 0..n {
        for l in 0..m {
            grid[[l, k]] = v[l + k * m];
        }
    }
    grid
}

/// Inverse SFFT of a delay-Doppler grid; returns the serialized pulse-train
/// symbols reshaped as an `M x N` array (`out[m, n]` is sample `m + n * M`).
pub fn isfft(dd_grid: &Array2<C64>) -> Array2<C64> {
    let (m, n) = dd_grid.dim();
    let mut v = grid_to_vec(dd_grid);
    isfft_vec_inplace(&mut v, m, n);
    vec_to_grid(&v, m, n)
}

/// SFFT of serialized samples (as an `M x N` array) back to the DD grid.
pub fn sfft(tf_grid: &Array2<C64>) -> Array2<C64> {
    let (m, n) = tf_grid.dim();
    let mut v = grid_to_vec(tf_grid);
    sfft_vec_inplace(&mut v, m, n);
    vec_to_grid(&v, m, n)
}

/// Builds the dense `MN x MN` transform matrix `U = F_N (x) F_M^H`.
///
/// Intended for small-scale validation; sweeps always use the FFT path.
pub fn isfft_matrix(m: usize, n: usize) -> Array2<C64> {
    let mn = m * n;
    let scale = 1.0 / (mn as f64).sqrt();
    let mut u = Array2::zeros((mn, mn));
    for i in 0..mn {
        let (mi, ni) = (i % m, i / m);
        for j in 0..mn {
            let (lj, kj) = (j % m, j / m);
            // exp(+j 2 pi m l / M) from F_M^H, exp(-j 2 pi n k / N) from F_N.
            let phase = 2.0 * std::f64::consts::PI
                * (mi as f64 * lj as f64 / m as f64 - ni as f64 * kj as f64 / n as f64);
            u[[i, j]] = C64::from_polar(scale, phase);
        }
    }
    u
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
