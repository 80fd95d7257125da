//! One-dimensional finite-difference discretization of the fractional
//! Laplacian on a uniform grid with zero extension outside the grid.
//!
//! Between nodes the discrete function is represented by its piecewise-linear
//! interpolant.  Inside the first cell around the evaluation node the
//! integrand of the symmetrized singular integral is replaced by the
//! quadratic model matched to the nearest-neighbour second difference, and
//! the constant part of the kernel is integrated in closed form out to
//! infinity, so the scheme involves no truncation of the singular integral.
//!
//! With lattice weights `w_k` of the unit hat functions against the kernel
//! `z^(-1-2s)` on `[1, oo)`, the row applied at node `i` reads
//!
//! ```text
//! (c_ns h^-2s) [ D u_i - sum_k C_k (u_{i+k} + u_{i-k}) ],
//! D = 1/(1-s) + 1/s,   C_1 = 1/(2-2s) + w_1,   C_k = w_k (k >= 2),
//! ```
//!
//! and `D = 2 sum_k C_k` holds exactly, reflecting that constants are
//! annihilated when no zero truncation is active.

use nalgebra::DMatrix;

use crate::specfun::FracParams;

/// Integral of `z^(-1-2s)` over `[m, m+1]` in lattice units.
fn j0(m: f64, s: f64) -> f64 {
    (m.powf(-2.0 * s) - (m + 1.0).powf(-2.0 * s)) / (2.0 * s)
}

/// Integral of `z^(-2s)` over `[m, m+1]` in lattice units, stable across
/// the removable singularity of the antiderivative exponent at `s = 1/2`.
fn j1(m: f64, s: f64) -> f64 {
    let e = 1.0 - 2.0 * s;
    let l = (1.0 / m).ln_1p();
    let scale = m.powf(e);
    if e.abs() < 1e-14 {
        scale * l
    } else {
        scale * (e * l).exp_m1() / e
    }
}

/// Weight of the unit hat centred at lattice offset `k >= 1` against the
/// kernel `z^(-1-2s)` over `[1, oo)`; the `k = 1` hat is clipped to its
/// right half because `[0, 1]` belongs to the near-field model.
pub(crate) fn hat_weight(k: usize, s: f64) -> f64 {
    debug_assert!(k >= 1);
    if k == 1 {
        2.0 * j0(1.0, s) - j1(1.0, s)
    } else {
        let kf = k as f64;
        (j1(kf - 1.0, s) - (kf - 1.0) * j0(kf - 1.0, s))
            + ((kf + 1.0) * j0(kf, s) - j1(kf, s))
    }
}

/// Exact value of `sum_{k=1..kmax} hat_weight(k)`; the hats sum to one on
/// `[1, kmax]` and ramp down linearly on `[kmax, kmax+1]`.
#[cfg(test)]
pub(crate) fn hat_weight_partial_sum(kmax: usize, s: f64) -> f64 {
    let m = kmax as f64;
    (1.0 - m.powf(-2.0 * s)) / (2.0 * s) + ((m + 1.0) * j0(m, s) - j1(m, s))
}

/// Diagonal coefficient `D` (in units of `c_ns h^-2s`).
pub(crate) fn diag_coeff(s: f64) -> f64 {
    1.0 / (1.0 - s) + 1.0 / s
}

/// Coupling coefficients `C_k` for `k = 1..=kmax` (in units of `c_ns h^-2s`).
pub(crate) fn coupling_coeffs(kmax: usize, s: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let mut c = hat_weight(k, s);
        if k == 1 {
            c += 0.5 / (1.0 - s);
        }
        out.push(c);
    }
    out
}

/// Dense symmetric matrix applying the operator at `n` interior nodes with
/// spacing `h`, for functions that vanish at all other lattice points.
pub(crate) fn assemble(params: &FracParams, h: f64, n: usize) -> DMatrix<f64> {
    let s = params.s;
    let scale = params.c_ns * h.powf(-2.0 * s);
    let diag = scale * diag_coeff(s);
    let coup = coupling_coeffs(n.max(1), s);
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            diag
        } else {
            let k = i.abs_diff(j);
            -scale * coup[k - 1]
        }
    })
}

/// Apply the operator to values on the full node line `0..len`, extended by
/// zero beyond it, returning the result at every node.
pub(crate) fn apply(params: &FracParams, h: f64, values: &[f64]) -> Vec<f64> {
    let s = params.s;
    let scale = params.c_ns * h.powf(-2.0 * s);
    let len = values.len();
    let diag = diag_coeff(s);
    let coup = coupling_coeffs(len.max(1), s);
    (0..len)
        .map(|i| {
            let mut acc = diag * values[i];
            for k in 1..len {
                let right = if i + k < len { values[i + k] } else { 0.0 };
                let left = if i >= k { values[i - k] } else { 0.0 };
                if right != 0.0 || left != 0.0 {
                    acc -= coup[k - 1] * (right + left);
                }
            }
            scale * acc
        })
        .collect()
}
