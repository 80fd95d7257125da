//! Two-dimensional finite-difference discretization of the fractional
//! Laplacian on a uniform grid with zero extension outside the grid.
//!
//! The symmetrized singular integral is split at the square `Q0 = [-h, h]^2`,
//! which is exactly the support of the bilinear hat of the centre node, so
//! the centre carries no far-field weight.  Inside `Q0` the integrand is
//! replaced by the separable quadratic model matched to the two axis second
//! differences; its kernel integral over the square reduces to the constant
//! `I_sq = 8 * int_0^{pi/4} cos(t)^(2s-2) dt`.  Outside `Q0` the discrete
//! function is represented by its bilinear interpolant, whose hat functions
//! are integrated against the kernel cell by cell with Gauss–Legendre rules,
//! while the constant term is integrated in closed form to infinity through
//! `I_tail = 8 * int_0^{pi/4} cos(t)^(2s) dt`.  The row applied at node `i`
//! reads
//!
//! ```text
//! (c_ns/2) h^-2s [ (4 NS + I_tail/s) u_i
//!                  - sum_axis (NS + 2 W_e) u_{i+e}
//!                  - sum_{other m} 2 W_m u_{i+m} ],
//! NS = I_sq / (2 (2 - 2s)),
//! ```
//!
//! and `2 sum_m W_m = I_tail/s` holds exactly by partition of unity, so
//! constants are annihilated when no zero truncation is active.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_4;
use std::sync::{Arc, Mutex, OnceLock};

use crate::quadrature::gl_rule;

/// Kernel weights of the lattice bilinear hats outside the unit square
/// `[-1, 1]^2`, stored on the octant `a >= b >= 0` and looked up through the
/// full dihedral symmetry of the kernel.
pub(crate) struct Table2d {
    /// Offsets with `max(|di|, |dj|) <= extent` are covered exactly.
    pub extent: usize,
    /// Near-square coefficient multiplying each axis second difference.
    pub near: f64,
    /// Exact constant-term weight `I_tail / s` of the far field.
    pub tail_over_s: f64,
    /// `I_tail / (2s)`, the total kernel mass outside the unit square.
    pub outside_mass: f64,
    weights: Vec<f64>,
}

fn octant_index(a: usize, b: usize) -> usize {
    debug_assert!(b <= a);
    a * (a + 1) / 2 + b
}

impl Table2d {
    /// Hat weight for the lattice offset `(di, dj)`; zero for the centre.
    pub fn weight(&self, di: i64, dj: i64) -> f64 {
        let a = di.unsigned_abs().max(dj.unsigned_abs()) as usize;
        let b = di.unsigned_abs().min(dj.unsigned_abs()) as usize;
        if a == 0 {
            return 0.0;
        }
        debug_assert!(a <= self.extent, "offset beyond table extent");
        self.weights[octant_index(a, b)]
    }

    /// Sum of all stored weights (both coordinates up to the extent).
    pub fn covered_mass(&self) -> f64 {
        let mut total = 0.0;
        for a in 0..=self.extent as i64 {
            for b in -(self.extent as i64)..=self.extent as i64 {
                if a == 0 && b <= 0 {
                    continue; // count each offset once via sign symmetry
                }
                total += 2.0 * self.weight(a, b);
            }
        }
        total
    }
}

/// `8 * int_0^{pi/4} cos(t)^p dt` by a fixed high-order rule; the integrand
/// is smooth because `cos >= sqrt(2)/2` on the range.
fn angular_integral(p: f64) -> f64 {
    let rule = gl_rule(64);
    let (nodes, weights) = &*rule;
    let half = 0.5 * FRAC_PI_4;
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        let t = half * (x + 1.0);
        acc += w * t.cos().powf(p);
    }
    8.0 * half * acc
}

/// Tensor Gauss–Legendre integral of `hat(z1) * hat(z2) * |z|^(-2-2s)` over
/// the unit cell `[ca, ca+1] x [cb, cb+1]` for the hat corner `(qa, qb)`.
fn cell_corner_integral(ca: usize, cb: usize, qa: usize, qb: usize, s: f64, order: usize) -> f64 {
    let rule = gl_rule(order);
    let (nodes, weights) = &*rule;
    let expo = -1.0 - s;
    let mut acc = 0.0;
    for (xi, wi) in nodes.iter().zip(weights) {
        let z1 = ca as f64 + 0.5 * (xi + 1.0);
        let hat1 = 1.0 - (z1 - qa as f64).abs();
        if hat1 <= 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for (xj, wj) in nodes.iter().zip(weights) {
            let z2 = cb as f64 + 0.5 * (xj + 1.0);
            let hat2 = 1.0 - (z2 - qb as f64).abs();
            if hat2 <= 0.0 {
                continue;
            }
            inner += wj * hat2 * (z1 * z1 + z2 * z2).powf(expo);
        }
        acc += wi * hat1 * inner;
    }
    0.25 * acc
}

fn build(s: f64, extent: usize) -> Table2d {
    let stored = octant_index(extent, extent) + 1;
    // Accumulate first-quadrant cell integrals onto their four corners.
    let side = extent + 2;
    let mut acc = vec![0.0f64; side * side];
    for ca in 0..=extent {
        for cb in 0..=extent {
            if ca == 0 && cb == 0 {
                continue; // the cell [0,1]^2 lies inside the near square
            }
            let dist = ca.max(cb);
            let order = if dist <= 3 {
                24
            } else if dist <= 12 {
                12
            } else {
                6
            };
            for da in 0..2usize {
                for db in 0..2usize {
                    let val = cell_corner_integral(ca, cb, ca + da, cb + db, s, order);
                    acc[(ca + da) * side + (cb + db)] += val;
                }
            }
        }
    }
    let mut weights = vec![0.0f64; stored];
    for a in 0..=extent {
        for b in 0..=a {
            let w = if a == 0 {
                0.0
            } else if b == 0 {
                // The hat straddles the axis; mirror the first quadrant.
                2.0 * acc[a * side]
            } else {
                acc[a * side + b]
            };
            weights[octant_index(a, b)] = w;
        }
    }
    let i_sq = angular_integral(2.0 * s - 2.0);
    let i_tail = angular_integral(2.0 * s);
    Table2d {
        extent,
        near: i_sq / (2.0 * (2.0 - 2.0 * s)),
        tail_over_s: i_tail / s,
        outside_mass: i_tail / (2.0 * s),
        weights,
    }
}

/// Cached weight table for the given order `s` and offset extent.
pub(crate) fn table(s: f64, extent: usize) -> Arc<Table2d> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, usize), Arc<Table2d>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (s.to_bits(), extent);
    if let Some(hit) = cache.lock().expect("table cache poisoned").get(&key) {
        return hit.clone();
    }
    let fresh = Arc::new(build(s, extent));
    cache
        .lock()
        .expect("table cache poisoned")
        .entry(key)
        .or_insert(fresh)
        .clone()
}
