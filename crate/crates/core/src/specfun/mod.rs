//! Special functions and the `(n, s)`-dependent constants of the fractional
//! Laplacian: gamma, Gauss' ₂F₁, and the normalization/torsion/spectral
//! constants derived from them.

mod gamma;
mod hyp2f1;

pub use gamma::{gamma, ln_gamma, recip_gamma};
pub use hyp2f1::{gauss_2f1, gauss_sum};

use serde::{Deserialize, Serialize};

/// Errors from special-function evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecFunError {
    /// Gamma evaluated at a non-positive integer.
    #[error("gamma pole at non-positive integer x = {x}")]
    GammaPole { x: f64 },
    /// Argument outside the supported domain.
    #[error("domain error: {what}")]
    Domain { what: String },
    /// A limit/series that genuinely diverges for these parameters.
    #[error("divergent: {what}")]
    Divergent { what: String },
    /// Series failed to meet the stopping rule within the term cap.
    #[error("series failed to converge within {max_terms} terms")]
    NoConvergence { max_terms: usize },
}

/// Dimension, order, and the derived constants used throughout the crate.
///
/// * `gamma_ns` — torsion normalization: `(-Δ)^s [γ (1-|x|²)₊^s] = 1` in `B₁`;
/// * `a_ns` — prefactor of the exterior hypergeometric formula;
/// * `kappa_ns` — spectral constant in the measure-based eigenvalue lower
///   bound `λ₁(Ω) ≥ κ |Ω|^{-2s/n}`;
/// * `c_ns` — normalization of the singular-integral definition of `(-Δ)^s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    pub n: u32,
    pub s: f64,
    pub gamma_ns: f64,
    pub a_ns: f64,
    pub kappa_ns: f64,
    pub c_ns: f64,
}

impl FracParams {
    /// Derive all constants for dimension `n ≥ 1` and order `s ∈ (0, 1)`.
    pub fn new(n: u32, s: f64) -> Result<Self, SpecFunError> {
        if n == 0 {
            return Err(SpecFunError::Domain {
                what: "dimension n must be >= 1".into(),
            });
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(SpecFunError::Domain {
                what: format!("order s must lie strictly inside (0, 1), got {s}"),
            });
        }
        let nf = f64::from(n);
        let half_n = 0.5 * nf;
        let g = |x: f64| gamma(x).expect("positive non-pole argument");
        let pi = std::f64::consts::PI;

        let gamma_ns = 4f64.powf(-s) * g(half_n) / (g(half_n + s) * g(1.0 + s));
        let a_ns = s * g(half_n) / (g(half_n + s + 1.0) * g(1.0 - s));
        let ball = unit_ball_volume(n);
        let kappa_ns = nf / 2f64.powf(1.0 - 2.0 * s)
            * ball.powf(1.0 + 2.0 * s / nf)
            * (1.0 - s)
            * pi.powf(-half_n)
            * g(half_n + s)
            / g(2.0 + s);
        let c_ns = s * 4f64.powf(s) * g(half_n + s) / (pi.powf(half_n) * g(1.0 - s));
        Ok(Self {
            n,
            s,
            gamma_ns,
            a_ns,
            kappa_ns,
            c_ns,
        })
    }

    /// Same order `s`, dimension raised by `2ℓ` (used by harmonic lifts).
    pub fn lifted(&self, ell: u32) -> Self {
        Self::new(self.n + 2 * ell, self.s).expect("valid params stay valid under lifting")
    }
}

/// Lebesgue measure of the unit ball of `ℝⁿ`.
pub fn unit_ball_volume(n: u32) -> f64 {
    let half_n = 0.5 * f64::from(n);
    std::f64::consts::PI.powf(half_n) / gamma(half_n + 1.0).expect("positive argument")
}

/// Surface measure of the unit sphere `∂B₁ ⊂ ℝⁿ` (`2` for n=1, `2π` for n=2).
pub fn unit_sphere_measure(n: u32) -> f64 {
    f64::from(n) * unit_ball_volume(n)
}

/// The four τ-dependent factors entering the annular-region formula for the
/// fractional Laplacian of the two-ball barrier, `τ = |y|⁻² ∈ [0, 1)`:
///
/// * `k` — singular prefactor `a_{n,s} (1-τ)^{-s} τ^{(n+2s)/2}`;
/// * `hyp` — `₂F₁(1, n/2; (n+2s)/2 + 1; τ)`;
/// * `f = 1 - k·(hyp - 1)` — coefficient of the `x₁` term, always ≤ 1;
/// * `g = k·((n+2s)/(2s) - hyp) - 1` — coefficient of the center-offset term,
///   always ≤ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusFactors {
    pub k: f64,
    pub hyp: f64,
    pub f: f64,
    pub g: f64,
}

/// Evaluate the annulus factors at `τ ∈ [0, 1)`.
pub fn annulus_factors(params: &FracParams, tau: f64) -> Result<AnnulusFactors, SpecFunError> {
    if !(0.0..1.0).contains(&tau) {
        return Err(SpecFunError::Domain {
            what: format!("annulus factors need tau in [0, 1), got {tau}"),
        });
    }
    let n = f64::from(params.n);
    let s = params.s;
    let k = params.a_ns * (1.0 - tau).powf(-s) * tau.powf(0.5 * (n + 2.0 * s));
    let hyp = annulus_hyp(params, tau)?;
    let f = 1.0 - k * (hyp - 1.0);
    let g = k * ((n + 2.0 * s) / (2.0 * s) - hyp) - 1.0;
    Ok(AnnulusFactors { k, hyp, f, g })
}

/// The hypergeometric factor `F(τ) = ₂F₁(1, n/2; (n+2s)/2 + 1; τ)` on
/// `[0, 1]`; at `τ = 1` this is the Gauss sum `(n+2s)/(2s)`.
pub fn annulus_hyp(params: &FracParams, tau: f64) -> Result<f64, SpecFunError> {
    let n = f64::from(params.n);
    let s = params.s;
    gauss_2f1(1.0, 0.5 * n, 0.5 * (n + 2.0 * s) + 1.0, tau)
}
