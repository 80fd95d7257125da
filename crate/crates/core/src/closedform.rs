//! Closed-form fractional Laplacians of torsion-type profiles.
//!
//! The profile `ψ_B(x) = γ_{n,s} (ρ² − |x−x₀|²)₊^s` on a ball `B = B_ρ(x₀)`
//! satisfies `(-Δ)^s ψ_B = 1` inside `B`, takes an explicit negative
//! hypergeometric value outside, and blows down to `-∞` on the sphere itself.
//! Multiplying by a harmonic homogeneous polynomial lifts the identity two
//! dimensions up; combining two reflected balls yields a barrier whose
//! fractional Laplacian is controlled by `(n+2s) x₁ / n`.

use crate::specfun::{annulus_factors, FracParams, SpecFunError};

/// Relative tolerance (times ρ) for deciding "on the sphere".
pub const SPHERE_TOL: f64 = 1e-12;

/// Errors from closed-form evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClosedFormError {
    /// Point outside the region where the requested formula is valid.
    #[error("point outside the validity region: {what}")]
    OutsideRegion { what: String },
    /// Degenerate configuration (e.g. center offset at least the radius).
    #[error("degenerate configuration: {what}")]
    Degenerate { what: String },
    /// Argument outside the stated domain of an inequality.
    #[error("domain error: {what}")]
    Domain { what: String },
    /// Propagated special-function failure.
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

/// A Euclidean ball, dimension given by `center.len()`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self, ClosedFormError> {
        if !(radius > 0.0) {
            return Err(ClosedFormError::Degenerate {
                what: format!("ball radius must be positive, got {radius}"),
            });
        }
        if center.is_empty() {
            return Err(ClosedFormError::Degenerate {
                what: "ball center must have dimension >= 1".into(),
            });
        }
        Ok(Self { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Euclidean distance from `x` to the center.
    pub fn offset_norm(&self, x: &[f64]) -> f64 {
        norm(&sub(x, &self.center))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.offset_norm(x) < self.radius
    }

    /// Whether `x` lies within the sphere tolerance of `∂B`.
    pub fn on_sphere(&self, x: &[f64]) -> bool {
        (self.offset_norm(x) - self.radius).abs() < SPHERE_TOL * self.radius
    }
}

/// A value of `(-Δ)^s` that may be the boundary blow-down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedValue {
    Finite(f64),
    MinusInfinity,
}

impl ExtendedValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedValue::Finite(v) => Some(v),
            ExtendedValue::MinusInfinity => None,
        }
    }

    pub fn expect_finite(self) -> f64 {
        self.finite().expect("value is the boundary blow-down")
    }

    pub fn is_minus_infinity(self) -> bool {
        matches!(self, ExtendedValue::MinusInfinity)
    }
}

pub(crate) fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Torsion profile `ψ_B(x) = γ_{n,s} ρ^{2s} (1 − |y|²)₊^s`, `y = (x−x₀)/ρ`.
///
/// Continuous on all of `ℝⁿ`, zero outside `B`.
pub fn torsion(ball: &Ball, params: &FracParams, x: &[f64]) -> f64 {
    let y = ball.offset_norm(x) / ball.radius;
    let t = 1.0 - y * y;
    if t <= 0.0 {
        0.0
    } else {
        params.gamma_ns * ball.radius.powf(2.0 * params.s) * t.powf(params.s)
    }
}

/// `(-Δ)^s ψ_B` at `x`: `1` inside `B`, `-∞` on the sphere, and
/// `-K(τ)·F(τ)` outside, where `τ = |y|⁻²` and `K`, `F` are the annulus
/// factors.  Scale-invariant: the value depends only on `y = (x−x₀)/ρ`.
pub fn frac_lap_torsion(
    ball: &Ball,
    params: &FracParams,
    x: &[f64],
) -> Result<ExtendedValue, ClosedFormError> {
    let y = ball.offset_norm(x) / ball.radius;
    if (y - 1.0).abs() < SPHERE_TOL {
        return Ok(ExtendedValue::MinusInfinity);
    }
    if y < 1.0 {
        return Ok(ExtendedValue::Finite(1.0));
    }
    let tau = y.powi(-2);
    let af = annulus_factors(params, tau)?;
    Ok(ExtendedValue::Finite(-af.k * af.hyp))
}

/// `(-Δ)^s [p(· − x₀) ψ_B]` at `x` for a harmonic polynomial `p`,
/// homogeneous of degree `ell`.
///
/// The value is `(γ_{n,s} / γ_{n+2ℓ,s}) p(x−x₀) · β(|y|)` with `β` the
/// interior/exterior branch of the torsion formula in dimension `n + 2ℓ`:
/// `β = 1` inside, `-∞` on the sphere, and
/// `-a_{n+2ℓ,s} |y|^{−n−2s−2ℓ} ₂F₁((n+2s)/2+ℓ, s+1; (n+2s)/2+1+ℓ; |y|⁻²)`
/// outside.  Harmonicity of `p` is the caller's precondition; see
/// [`harmonicity_residual`] for a spot check.
pub fn frac_lap_harmonic_torsion(
    ball: &Ball,
    params: &FracParams,
    ell: u32,
    p: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
) -> Result<ExtendedValue, ClosedFormError> {
    let y = ball.offset_norm(x) / ball.radius;
    if (y - 1.0).abs() < SPHERE_TOL {
        return Ok(ExtendedValue::MinusInfinity);
    }
    let lifted = params.lifted(ell);
    let ratio = params.gamma_ns / lifted.gamma_ns;
    let p_val = p(&sub(x, &ball.center));
    if y < 1.0 {
        return Ok(ExtendedValue::Finite(ratio * p_val));
    }
    let n = f64::from(params.n);
    let s = params.s;
    let ellf = f64::from(ell);
    let tau = y.powi(-2);
    let a = 0.5 * (n + 2.0 * s) + ellf;
    let hyp = crate::specfun::gauss_2f1(a, s + 1.0, a + 1.0, tau)?;
    let branch = -lifted.a_ns * y.powf(-(n + 2.0 * s + 2.0 * ellf)) * hyp;
    Ok(ExtendedValue::Finite(ratio * p_val * branch))
}

/// Deterministic finite-difference residual of `Δp` over a fixed sample set;
/// near zero iff `p` is harmonic at the sampled points.  Intended as a cheap
/// spot check of the precondition of [`frac_lap_harmonic_torsion`].
pub fn harmonicity_residual(n: u32, p: &dyn Fn(&[f64]) -> f64, ell: u32) -> f64 {
    let dim = n as usize;
    let h = 1e-4;
    // Fixed, irrational-ish sample points inside the unit ball.
    let samples: Vec<Vec<f64>> = (0..8)
        .map(|k| {
            (0..dim)
                .map(|j| {
                    let j = j as i32;
                    0.61803398875_f64.powi(k + 1 + j) * if (k + j) % 2 == 0 { 1.0 } else { -0.7 }
                })
                .collect()
        })
        .collect();
    let mut worst = 0.0_f64;
    for x in &samples {
        let mut lap = 0.0;
        let center = p(x);
        for j in 0..dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            lap += (p(&xp) + p(&xm) - 2.0 * center) / (h * h);
        }
        // Scale by the homogeneity degree so the residual is dimensionless.
        let scale = norm(x).powi(ell.saturating_sub(2) as i32).max(1e-12);
        worst = worst.max(lap.abs() / scale);
    }
    worst
}

/// Two-ball barrier configuration: `B = B_ρ(a)` with `a₁ > 0`, and the
/// reflected ball `B₊ = B_ρ(a⋆)` with `a⋆ = a − 2a₁e₁` (the mirror image of
/// `a` across the hyperplane `{x₁ = 0}`).
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierConfig {
    pub a: Vec<f64>,
    pub rho: f64,
    pub params: FracParams,
}

impl BarrierConfig {
    pub fn new(a: Vec<f64>, rho: f64, params: FracParams) -> Result<Self, ClosedFormError> {
        if a.len() != params.n as usize {
            return Err(ClosedFormError::Degenerate {
                what: format!(
                    "center has dimension {}, parameters say n = {}",
                    a.len(),
                    params.n
                ),
            });
        }
        if !(a[0] > 0.0) {
            return Err(ClosedFormError::Degenerate {
                what: format!("barrier center needs a₁ > 0, got {}", a[0]),
            });
        }
        if !(rho > 0.0) {
            return Err(ClosedFormError::Degenerate {
                what: format!("barrier radius must be positive, got {rho}"),
            });
        }
        Ok(Self { a, rho, params })
    }

    /// The reflected center `a⋆ = a − 2a₁e₁`.
    pub fn reflected_center(&self) -> Vec<f64> {
        let mut c = self.a.clone();
        c[0] = -c[0];
        c
    }

    pub fn ball(&self) -> Ball {
        Ball::new(self.a.clone(), self.rho).expect("validated in new")
    }

    pub fn reflected_ball(&self) -> Ball {
        Ball::new(self.reflected_center(), self.rho).expect("validated in new")
    }
}

/// Barrier `φ(x) = x₁ (ψ_B(x) + ψ_{B⋆}(x))`; continuous on `ℝⁿ`, odd in `x₁`.
pub fn barrier(cfg: &BarrierConfig, x: &[f64]) -> f64 {
    let b = cfg.ball();
    let bs = cfg.reflected_ball();
    x[0] * (torsion(&b, &cfg.params, x) + torsion(&bs, &cfg.params, x))
}

/// `(-Δ)^s φ` inside `B = B_ρ(a)`:
///
/// * on `B ∩ B⋆`: exactly `2(n+2s) x₁ / n`;
/// * on `B ∖ closure(B⋆)` (automatically `x₁ > 0`): with `τ = |y|⁻²`,
///   `y = (x − a⋆)/ρ`, the value `((n+2s)/n) f(τ) x₁ + (2s/n) g(τ) a₁`,
///   which is `≤ (n+2s) x₁ / n` since `f ≤ 1`, `g ≤ 0`;
/// * on `∂B⋆ ∩ B`: the blow-down `-∞`.
///
/// Errors if `x` is outside `B`.
pub fn frac_lap_barrier(
    cfg: &BarrierConfig,
    x: &[f64],
) -> Result<ExtendedValue, ClosedFormError> {
    let b = cfg.ball();
    let bs = cfg.reflected_ball();
    if !b.contains(x) && !b.on_sphere(x) {
        return Err(ClosedFormError::OutsideRegion {
            what: format!("barrier formula is stated inside B_ρ(a); |x-a| = {}", b.offset_norm(x)),
        });
    }
    let n = f64::from(cfg.params.n);
    let s = cfg.params.s;
    if bs.on_sphere(x) {
        return Ok(ExtendedValue::MinusInfinity);
    }
    if bs.contains(x) {
        return Ok(ExtendedValue::Finite(2.0 * (n + 2.0 * s) * x[0] / n));
    }
    // Outside the closed reflected ball; here necessarily x₁ > 0.
    let y = bs.offset_norm(x) / cfg.rho;
    let tau = y.powi(-2);
    let af = annulus_factors(&cfg.params, tau)?;
    let val = (n + 2.0 * s) / n * af.f * x[0] + 2.0 * s / n * af.g * cfg.a[0];
    Ok(ExtendedValue::Finite(val))
}

/// The linear upper bound `(n+2s) x₁ / n` that `(-Δ)^s φ` obeys on the
/// annular region `B ∖ closure(B⋆)`.  (On the overlap `B ∩ B⋆` the exact
/// value is `2(n+2s) x₁ / n`, which exceeds this bound wherever `x₁ > 0`;
/// the inequality is an annulus statement.)
pub fn barrier_bound(cfg: &BarrierConfig, x: &[f64]) -> f64 {
    let n = f64::from(cfg.params.n);
    (n + 2.0 * cfg.params.s) * x[0] / n
}

/// Left side `2(1−t)^s − (1−2t)^s` of the midpoint concavity inequality;
/// `≥ 1` on `t ∈ [0, 1/2)` by concavity of `r ↦ r^s`.
pub fn midpoint_concavity(s: f64, t: f64) -> Result<f64, ClosedFormError> {
    if !(s > 0.0 && s < 1.0) {
        return Err(ClosedFormError::Domain {
            what: format!("order s must lie in (0,1), got {s}"),
        });
    }
    if !(0.0..0.5).contains(&t) {
        return Err(ClosedFormError::Domain {
            what: format!("midpoint concavity needs t in [0, 1/2), got {t}"),
        });
    }
    Ok(2.0 * (1.0 - t).powf(s) - (1.0 - 2.0 * t).powf(s))
}

/// The enclosing symmetric ball `B̃` of a barrier configuration: centered at
/// the midpoint of `a` and `a⋆` (i.e. the projection of `a` onto `{x₁=0}`)
/// with radius `√(ρ² − a₁²)`, so that `∂B ∩ ∂B⋆ ⊂ ∂B̃` and
/// `B ∩ B⋆ ⊂ B̃ ⊂ B ∪ B⋆`.  Requires `a₁ < ρ`.
pub fn midpoint_ball(cfg: &BarrierConfig) -> Result<Ball, ClosedFormError> {
    let a1 = cfg.a[0];
    if a1 >= cfg.rho {
        return Err(ClosedFormError::Degenerate {
            what: format!("midpoint ball needs a₁ < ρ, got a₁ = {a1}, ρ = {}", cfg.rho),
        });
    }
    let mut c = cfg.a.clone();
    c[0] = 0.0;
    Ball::new(c, (cfg.rho * cfg.rho - a1 * a1).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn params(n: u32, s: f64) -> FracParams {
        FracParams::new(n, s).unwrap()
    }

    fn unit_ball(n: usize) -> Ball {
        Ball::new(vec![0.0; n], 1.0).unwrap()
    }

    #[test]
    fn torsion_profile_values() {
        let p = params(1, 0.5);
        let b = unit_ball(1);
        // gamma_{1,1/2} = 1: psi(x) = sqrt(1-x^2).
        assert_relative_eq!(torsion(&b, &p, &[0.0]), 1.0, max_relative = 1e-14);
        assert_relative_eq!(torsion(&b, &p, &[0.6]), 0.8, max_relative = 1e-14);
        assert_eq!(torsion(&b, &p, &[1.0]), 0.0);
        assert_eq!(torsion(&b, &p, &[2.0]), 0.0);
    }

    #[test]
    fn torsion_scaling_law() {
        // psi_{B_rho(x0)}(x) = rho^{2s} psi_{B_1}((x-x0)/rho).
        let p = params(2, 0.75);
        let rho = 2.5;
        let shifted = Ball::new(vec![1.0, -0.5], rho).unwrap();
        let unit = unit_ball(2);
        let x = [1.8, 0.3];
        let y = [(x[0] - 1.0) / rho, (x[1] + 0.5) / rho];
        assert_relative_eq!(
            torsion(&shifted, &p, &x),
            rho.powf(1.5) * torsion(&unit, &p, &y),
            max_relative = 1e-13
        );
    }

    #[test]
    fn interior_value_is_one() {
        for &(n, s) in &[(1u32, 0.25), (1, 0.5), (2, 0.5), (2, 0.75)] {
            let p = params(n, s);
            let b = unit_ball(n as usize);
            let x = vec![0.37; n as usize];
            let v = frac_lap_torsion(&b, &p, &x).unwrap();
            assert_eq!(v, ExtendedValue::Finite(1.0));
        }
    }

    #[test]
    fn sphere_blow_down() {
        let p = params(1, 0.5);
        let b = unit_ball(1);
        assert!(frac_lap_torsion(&b, &p, &[1.0]).unwrap().is_minus_infinity());
        assert!(frac_lap_torsion(&b, &p, &[1.0 + 1e-14]).unwrap().is_minus_infinity());
        // Distinctly off the sphere: finite.
        assert!(!frac_lap_torsion(&b, &p, &[1.0 + 1e-6]).unwrap().is_minus_infinity());
    }

    #[test]
    fn exterior_frozen_values() {
        // 40-digit references for -a |x|^{-n-2s} 2F1((n+2s)/2, s+1; ...; |x|^{-2}).
        let cases: [(u32, f64, f64, f64); 5] = [
            (1, 0.25, 1.5, -0.2906142289171236620183482),
            (1, 0.5, 2.0, -0.1547005383792515290182976),
            (1, 0.75, 2.5, -0.03875730173291887102675322),
            (2, 0.5, 2.0, -0.03421926361452803300755100),
            (2, 0.75, 1.2, -0.2363977929379111132983558),
        ];
        for &(n, s, r, want) in cases.iter() {
            let p = params(n, s);
            let b = unit_ball(n as usize);
            let mut x = vec![0.0; n as usize];
            x[0] = r;
            let got = frac_lap_torsion(&b, &p, &x).unwrap().expect_finite();
            assert_relative_eq!(got, want, max_relative = 1e-11);
        }
    }

    #[test]
    fn exterior_is_scale_invariant_in_y() {
        // The exterior value depends only on (x-x0)/rho.
        let p = params(2, 0.5);
        let unit = unit_ball(2);
        let scaled = Ball::new(vec![0.3, 0.3], 1.7).unwrap();
        let y = [1.31, -0.44];
        let x: Vec<f64> = y.iter().zip(&scaled.center).map(|(yi, ci)| ci + 1.7 * yi).collect();
        let v1 = frac_lap_torsion(&unit, &p, &y).unwrap().expect_finite();
        let v2 = frac_lap_torsion(&scaled, &p, &x).unwrap().expect_finite();
        assert_relative_eq!(v1, v2, max_relative = 1e-12);
    }

    #[test]
    fn harmonic_lift_interior_matches_dimension_ratio() {
        // ell = 1, p = x1: interior value (n+2s)/n * (x1 - a1) after recentering.
        let p = params(2, 0.5);
        let b = Ball::new(vec![0.4, 0.0], 1.0).unwrap();
        let x = [0.7, 0.2];
        let v = frac_lap_harmonic_torsion(&b, &p, 1, &|z| z[0], &x)
            .unwrap()
            .expect_finite();
        let want = (2.0 + 1.0) / 2.0 * (x[0] - 0.4);
        assert_relative_eq!(v, want, max_relative = 1e-12);
    }

    #[test]
    fn harmonic_lift_exterior_frozen_values() {
        // ratio * p(x) * branch with 40-digit branch references.
        let cases: [(u32, f64, f64, f64, f64); 3] = [
            (1, 0.5, 2.0, 2.0, -0.01036297108184508789101037),
            (2, 0.5, 1.5, 1.5, -0.02049393815342512710586515),
            (2, 0.75, 1.3, 1.75, -0.03292525796270676332215829),
        ];
        for &(n, s, r, ratio, branch) in cases.iter() {
            let p = params(n, s);
            let b = unit_ball(n as usize);
            let mut x = vec![0.0; n as usize];
            x[0] = r;
            let got = frac_lap_harmonic_torsion(&b, &p, 1, &|z| z[0], &x)
                .unwrap()
                .expect_finite();
            assert_relative_eq!(got, ratio * r * branch, max_relative = 1e-11);
        }
    }

    #[test]
    fn one_ball_lift_combination() {
        // (-Δ)^s (x1 ψ_B)(x) = (n+2s)/n x1 - (2s/n) a1 inside B = B_ρ(a):
        // recombine the recentered lift with a1 times the torsion identity.
        let p = params(2, 0.5);
        let a = vec![0.4, 0.0];
        let b = Ball::new(a.clone(), 1.0).unwrap();
        let x = [0.9, -0.3];
        let lift = frac_lap_harmonic_torsion(&b, &p, 1, &|z| z[0], &x)
            .unwrap()
            .expect_finite();
        let torsion_part = a[0] * frac_lap_torsion(&b, &p, &x).unwrap().expect_finite();
        let n = 2.0;
        let s = 0.5;
        let want = (n + 2.0 * s) / n * x[0] - 2.0 * s / n * a[0];
        assert_relative_eq!(lift + torsion_part, want, max_relative = 1e-12);
    }

    #[test]
    fn harmonicity_spot_check() {
        // x1 and x1*x2 are harmonic; x1^2 is not.
        assert!(harmonicity_residual(2, &|z| z[0], 1) < 1e-6);
        assert!(harmonicity_residual(2, &|z| z[0] * z[1], 2) < 1e-5);
        assert!(harmonicity_residual(2, &|z| z[0] * z[0], 2) > 0.5);
    }

    #[test]
    fn barrier_point_values() {
        // phi(a) = a1 (psi_B(a) + psi_B*(a)); n=2, s=1/2, a=(0.4, 0), rho=1.
        let p = params(2, 0.5);
        let cfg = BarrierConfig::new(vec![0.4, 0.0], 1.0, p).unwrap();
        let got = barrier(&cfg, &[0.4, 0.0]);
        assert_relative_eq!(got, 0.4074366543152520595683424, max_relative = 1e-12);
    }

    #[test]
    fn barrier_is_odd_in_x1() {
        let p = params(2, 0.25);
        let cfg = BarrierConfig::new(vec![0.3, -0.1], 0.9, p).unwrap();
        for &(x1, x2) in &[(0.2, 0.1), (0.5, -0.3), (0.05, 0.0)] {
            let plus = barrier(&cfg, &[x1, x2]);
            let minus = barrier(&cfg, &[-x1, x2]);
            assert_abs_diff_eq!(plus, -minus, epsilon = 1e-13);
        }
    }

    #[test]
    fn overlap_region_identity() {
        let p = params(2, 0.5);
        let cfg = BarrierConfig::new(vec![0.3, 0.0], 1.0, p).unwrap();
        // x in B ∩ B*: both |x-a| < 1 and |x-a*| < 1.
        let x = [0.1, 0.2];
        let v = frac_lap_barrier(&cfg, &x).unwrap().expect_finite();
        assert_relative_eq!(v, 2.0 * 3.0 * x[0] / 2.0, max_relative = 1e-13);
    }

    #[test]
    fn annulus_region_respects_bound() {
        let p = params(2, 0.5);
        let cfg = BarrierConfig::new(vec![0.3, 0.0], 1.0, p).unwrap();
        // Deep in B but outside closure(B*): x near the right edge of B.
        let x = [1.1, 0.1];
        assert!(cfg.ball().contains(&x));
        assert!(!cfg.reflected_ball().contains(&x));
        let v = frac_lap_barrier(&cfg, &x).unwrap().expect_finite();
        assert!(v <= barrier_bound(&cfg, &x) + 1e-12);
    }

    #[test]
    fn reflected_sphere_blow_down_and_domain_guard() {
        let p = params(1, 0.5);
        let cfg = BarrierConfig::new(vec![0.3], 1.0, p).unwrap();
        // x on ∂B* = {-1.3, 0.7} and inside B = (-0.7, 1.3): x = 0.7.
        assert!(frac_lap_barrier(&cfg, &[0.7]).unwrap().is_minus_infinity());
        assert!(matches!(
            frac_lap_barrier(&cfg, &[1.9]),
            Err(ClosedFormError::OutsideRegion { .. })
        ));
    }

    #[test]
    fn midpoint_concavity_values_and_domain() {
        // s = 1/2, t -> 1/2: value -> 2 sqrt(1/2) = sqrt(2), approached at
        // the rate (1 - 2t)^s, so the gap at t = 1/2 - eps is sqrt(2 eps).
        let eps = 1e-7;
        let v = midpoint_concavity(0.5, 0.5 - eps).unwrap();
        let gap = 2f64.sqrt() - v;
        assert!(gap > 0.0, "approach must be from below");
        assert_relative_eq!(gap, (2.0 * eps).sqrt(), max_relative = 1e-3);
        assert_relative_eq!(midpoint_concavity(0.5, 0.0).unwrap(), 1.0, max_relative = 1e-14);
        assert!(midpoint_concavity(0.5, 0.5).is_err());
        assert!(midpoint_concavity(0.5, -0.1).is_err());
        assert!(midpoint_concavity(1.2, 0.3).is_err());
    }

    #[test]
    fn midpoint_ball_geometry() {
        let p = params(2, 0.5);
        let cfg = BarrierConfig::new(vec![0.6, 0.2], 1.0, p).unwrap();
        let tilde = midpoint_ball(&cfg).unwrap();
        assert_eq!(tilde.center, vec![0.0, 0.2]);
        assert_relative_eq!(tilde.radius, (1.0f64 - 0.36).sqrt(), max_relative = 1e-14);
        // Degenerate when a1 >= rho.
        let bad = BarrierConfig::new(vec![1.0, 0.0], 1.0, p).unwrap();
        assert!(matches!(midpoint_ball(&bad), Err(ClosedFormError::Degenerate { .. })));
    }

    #[test]
    fn midpoint_ball_domination_inequality() {
        // psi_tilde >= (psi_B + psi_B*)/2 on the right half of B*.
        let p = params(2, 0.5);
        let cfg = BarrierConfig::new(vec![0.4, 0.0], 1.0, p).unwrap();
        let b = cfg.ball();
        let bs = cfg.reflected_ball();
        let tilde = midpoint_ball(&cfg).unwrap();
        let mut checked = 0u32;
        for i in 0..40 {
            for j in 0..40 {
                let x = [-1.4 + 0.07 * f64::from(i), -1.4 + 0.07 * f64::from(j)];
                // B*^+ = B* ∩ {x1 > 0}.
                if x[0] > 0.0 && bs.contains(&x) {
                    let lhs = torsion(&tilde, &p, &x);
                    let rhs = 0.5 * (torsion(&b, &p, &x) + torsion(&bs, &p, &x));
                    assert!(lhs >= rhs - 1e-12, "violation at {x:?}: {lhs} < {rhs}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn midpoint_ball_nesting() {
        // B ∩ B* ⊂ B̃ ⊂ B ∪ B* on a grid.
        let p = params(2, 0.75);
        let cfg = BarrierConfig::new(vec![0.5, -0.1], 1.2, p).unwrap();
        let b = cfg.ball();
        let bs = cfg.reflected_ball();
        let tilde = midpoint_ball(&cfg).unwrap();
        for i in 0..60 {
            for j in 0..60 {
                let x = [-2.0 + 0.068 * f64::from(i), -2.0 + 0.068 * f64::from(j)];
                if b.contains(&x) && bs.contains(&x) {
                    assert!(tilde.contains(&x) || tilde.on_sphere(&x), "B∩B* ⊄ B̃ at {x:?}");
                }
                if tilde.contains(&x) {
                    assert!(b.contains(&x) || bs.contains(&x) || b.on_sphere(&x) || bs.on_sphere(&x),
                        "B̃ ⊄ B∪B* at {x:?}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn midpoint_concavity_at_least_one(
            s in 0.02f64..0.98,
            t in 0.0f64..0.4999,
        ) {
            let v = midpoint_concavity(s, t).unwrap();
            prop_assert!(v >= 1.0 - 1e-12, "2(1-t)^s-(1-2t)^s = {v} < 1");
        }

        #[test]
        fn torsion_continuous_across_boundary(
            s in 0.05f64..0.95,
            eps in 1e-6f64..1e-2,
        ) {
            let p = FracParams::new(1, s).unwrap();
            let b = Ball::new(vec![0.0], 1.0).unwrap();
            let inside = torsion(&b, &p, &[1.0 - eps]);
            // Value at distance eps inside scales like eps^s: small.
            prop_assert!(inside <= p.gamma_ns * (2.0 * eps).powf(s) + 1e-12);
            prop_assert!(torsion(&b, &p, &[1.0 + eps]) == 0.0);
        }

        #[test]
        fn barrier_annulus_below_linear_bound(
            a1 in 0.05f64..0.8,
            s in 0.1f64..0.9,
            x1 in 0.0f64..1.75,
            x2 in -0.9f64..0.9,
        ) {
            let p = FracParams::new(2, s).unwrap();
            let cfg = BarrierConfig::new(vec![a1, 0.0], 1.0, p).unwrap();
            let x = [x1, x2];
            let b = cfg.ball();
            let bs = cfg.reflected_ball();
            // The linear bound is an annulus statement: skip the overlap,
            // where the exact identity 2(n+2s)x₁/n applies instead.
            if b.contains(&x) && !bs.contains(&x) && !b.on_sphere(&x) && !bs.on_sphere(&x) {
                let v = frac_lap_barrier(&cfg, &x).unwrap().expect_finite();
                prop_assert!(
                    v <= barrier_bound(&cfg, &x) + 1e-9,
                    "barrier bound violated at {x:?}: {v}"
                );
            }
        }
    }
}
