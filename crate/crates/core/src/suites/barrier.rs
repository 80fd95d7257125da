//! Two-ball barrier suite: stratified sampling of the barrier's fractional
//! Laplacian over the upper half-ball, the exact overlap identity, the
//! annulus upper bound, a quadrature cross-check, and the vanishing line
//! `x₁ → 0⁺`.

use serde_json::json;

use super::{anchors, check, failed_check, FaultInjection, Report, ReportBuilder, SuiteConfig};
use crate::closedform::{
    barrier_bound, frac_lap_barrier, frac_lap_harmonic_torsion, frac_lap_torsion, BarrierConfig,
    ExtendedValue,
};
use crate::quadrature::{fields, frac_lap_numeric};
use crate::specfun::FracParams;

pub fn run_barrier_suite(cfg: &SuiteConfig) -> Result<Report, super::ConfigError> {
    run_barrier_suite_with(cfg, &FaultInjection::default())
}

struct SampleSet {
    overlap: Vec<Vec<f64>>,
    annulus: Vec<Vec<f64>>,
}

/// Deterministic stratified samples of `B⁺_ρ(a) ∖ ∂B_ρ(a⋆)`: a uniform line
/// in 1-D, a uniform lattice in 2-D, split by membership in the reflected
/// ball and kept clear of both spheres.
fn sample_points(bc: &BarrierConfig) -> SampleSet {
    let rho = bc.rho;
    let a = &bc.a;
    let ball = bc.ball();
    let mirror = bc.reflected_ball();
    let guard = 1e-9 * rho;
    let mut overlap = Vec::new();
    let mut annulus = Vec::new();
    let keep = |x: &[f64]| {
        ball.offset_norm(x) < rho - guard
            && (mirror.offset_norm(x) - rho).abs() > guard
            && x[0] > 0.0
    };
    match a.len() {
        1 => {
            let hi = a[0] + rho;
            let count = 2048usize;
            for j in 0..count {
                let x = vec![hi * (j as f64 + 0.5) / count as f64];
                if keep(&x) {
                    if mirror.offset_norm(&x) < rho {
                        overlap.push(x);
                    } else {
                        annulus.push(x);
                    }
                }
            }
        }
        _ => {
            let hi = a[0] + rho;
            let side = 64usize;
            for i in 0..side {
                for j in 0..side {
                    let x = vec![
                        hi * (i as f64 + 0.5) / side as f64,
                        a[1] - rho + 2.0 * rho * (j as f64 + 0.5) / side as f64,
                    ];
                    if keep(&x) {
                        if mirror.offset_norm(&x) < rho {
                            overlap.push(x);
                        } else {
                            annulus.push(x);
                        }
                    }
                }
            }
        }
    }
    SampleSet { overlap, annulus }
}

/// `(-Δ)^s [x₁ ψ_B]` assembled from the harmonic lift plus the center shift,
/// for one ball; only valid where the formulas are finite.
fn lift_value(
    ball: &crate::closedform::Ball,
    params: &FracParams,
    x: &[f64],
) -> Result<f64, String> {
    let p = |z: &[f64]| z[0];
    let lifted = match frac_lap_harmonic_torsion(ball, params, 1, &p, x) {
        Ok(ExtendedValue::Finite(v)) => v,
        Ok(ExtendedValue::MinusInfinity) => return Err("singular lift point".into()),
        Err(e) => return Err(e.to_string()),
    };
    let plain = match frac_lap_torsion(ball, params, x) {
        Ok(ExtendedValue::Finite(v)) => v,
        Ok(ExtendedValue::MinusInfinity) => return Err("singular torsion point".into()),
        Err(e) => return Err(e.to_string()),
    };
    Ok(lifted + ball.center[0] * plain)
}

pub fn run_barrier_suite_with(
    cfg: &SuiteConfig,
    fault: &FaultInjection,
) -> Result<Report, super::ConfigError> {
    cfg.validate()?;
    for &ratio in &cfg.offsets {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(super::cfg_err(format!(
                "barrier center ratio must lie in (0, 1), got {ratio}"
            )));
        }
    }
    let mut rb = ReportBuilder::new(&cfg.name);
    let rho = 1.0;

    let mut oracle_slots = 0usize;
    for pair in &cfg.params {
        if pair.n > 2 {
            continue;
        }
        for &ratio in &cfg.offsets {
            let params = match FracParams::new(pair.n, pair.s) {
                Ok(p) => p,
                Err(e) => {
                    rb.push(failed_check(
                        format!("barrier[n={},s={},ratio={ratio}]", pair.n, pair.s),
                        anchors::BARRIER,
                        e,
                    ));
                    continue;
                }
            };
            let a = if pair.n == 1 {
                vec![ratio * rho]
            } else {
                vec![ratio * rho, 0.3]
            };
            let bc = match BarrierConfig::new(a, rho, params) {
                Ok(b) => b,
                Err(e) => {
                    rb.push(failed_check(
                        format!("barrier[n={},s={},ratio={ratio}]", pair.n, pair.s),
                        anchors::BARRIER,
                        e,
                    ));
                    continue;
                }
            };
            let tag = format!("[n={},s={},ratio={ratio}]", pair.n, pair.s);
            let samples = sample_points(&bc);
            overlap_check(&mut rb, cfg, &bc, &samples, &tag);
            annulus_check(&mut rb, cfg, &bc, &samples, &tag, fault);
            axis_check(&mut rb, cfg, &bc, &tag);
            if oracle_slots < 10 {
                oracle_check(&mut rb, cfg, &bc, &tag, oracle_slots);
                oracle_slots += 1;
            }
        }
    }
    Ok(rb.finish())
}

/// On `B ∩ B⋆` the barrier formula must equal the independently assembled
/// two-lift sum, which collapses to `2(n+2s) x₁ / n` exactly.
fn overlap_check(
    rb: &mut ReportBuilder,
    cfg: &SuiteConfig,
    bc: &BarrierConfig,
    samples: &SampleSet,
    tag: &str,
) {
    let id = format!("overlap_identity{tag}");
    let tol = cfg.tol("overlap", 1e-12);
    let ball = bc.ball();
    let mirror = bc.reflected_ball();
    let mut worst = 0.0_f64;
    for x in &samples.overlap {
        let direct = match frac_lap_barrier(bc, x) {
            Ok(ExtendedValue::Finite(v)) => v,
            Ok(ExtendedValue::MinusInfinity) => continue,
            Err(e) => {
                rb.push(failed_check(id, anchors::OVERLAP, e));
                return;
            }
        };
        let assembled = match (lift_value(&ball, &bc.params, x), lift_value(&mirror, &bc.params, x))
        {
            (Ok(u), Ok(v)) => u + v,
            (Err(e), _) | (_, Err(e)) => {
                rb.push(failed_check(id, anchors::OVERLAP, e));
                return;
            }
        };
        worst = worst.max((direct - assembled).abs() / direct.abs().max(1.0));
    }
    rb.push(check(
        id,
        anchors::OVERLAP,
        json!({ "overlap_samples": samples.overlap.len() }),
        worst,
        tol,
        tol - worst,
    ));
}

/// On the annular region the barrier's fractional Laplacian must stay below
/// the linear bound.
fn annulus_check(
    rb: &mut ReportBuilder,
    cfg: &SuiteConfig,
    bc: &BarrierConfig,
    samples: &SampleSet,
    tag: &str,
    fault: &FaultInjection,
) {
    let id = format!("annulus_inequality{tag}");
    let slack = cfg.tol("annulus", 1e-9);
    let mut worst = f64::NEG_INFINITY;
    let mut min_gap = f64::INFINITY;
    for x in &samples.annulus {
        let val = match frac_lap_barrier(bc, x) {
            Ok(ExtendedValue::Finite(v)) => v + fault.barrier_shift,
            Ok(ExtendedValue::MinusInfinity) => continue,
            Err(e) => {
                rb.push(failed_check(id, anchors::BARRIER, e));
                return;
            }
        };
        let bound = barrier_bound(bc, x);
        worst = worst.max(val - bound);
        min_gap = min_gap.min(bound - val);
    }
    let total = samples.overlap.len() + samples.annulus.len();
    rb.push(check(
        id,
        anchors::BARRIER,
        json!({
            "annulus_samples": samples.annulus.len(),
            "stratified_total": total,
            "tightest_gap": min_gap,
        }),
        worst,
        slack,
        slack - worst,
    ));
}

/// Along `x₁ → 0⁺` both the value and the bound vanish linearly with the
/// exact overlap slope.
fn axis_check(rb: &mut ReportBuilder, cfg: &SuiteConfig, bc: &BarrierConfig, tag: &str) {
    let id = format!("axis_vanishing{tag}");
    let tol = cfg.tol("overlap", 1e-12);
    let n = f64::from(bc.params.n);
    let slope = 2.0 * (n + 2.0 * bc.params.s) / n;
    let mut worst = 0.0_f64;
    for k in 3..=8 {
        let t = 10f64.powi(-k);
        let x = if bc.a.len() == 1 {
            vec![t]
        } else {
            vec![t, bc.a[1]]
        };
        match frac_lap_barrier(bc, &x) {
            Ok(ExtendedValue::Finite(v)) => worst = worst.max((v / t - slope).abs() / slope),
            Ok(ExtendedValue::MinusInfinity) => continue,
            Err(e) => {
                rb.push(failed_check(id, anchors::AXIS, e));
                return;
            }
        }
    }
    rb.push(check(
        id,
        anchors::AXIS,
        json!({ "t_range": [1e-8, 1e-3], "slope": slope }),
        worst,
        tol,
        tol - worst,
    ));
}

/// Cross-check the closed form against the quadrature oracle at one point
/// per configuration slot: annulus points for the line configurations,
/// an overlap point for the planar one.
fn oracle_check(
    rb: &mut ReportBuilder,
    cfg: &SuiteConfig,
    bc: &BarrierConfig,
    tag: &str,
    slot: usize,
) {
    let id = format!("oracle_cross_check{tag}");
    let n = bc.params.n;
    let oracle_tol = cfg.tol("oracle", if n == 1 { 1e-6 } else { 1e-3 });
    let use_annulus = n == 1 && slot % 2 == 1;
    let x = if use_annulus {
        let mut x = bc.a.clone();
        x[0] += 0.85 * bc.rho;
        x
    } else {
        let mut x = bc.a.clone();
        x[0] = 0.5 * (bc.rho - bc.a[0]).max(0.2 * bc.rho);
        x
    };
    let field = match fields::barrier_field(bc) {
        Ok(f) => f,
        Err(e) => {
            rb.push(failed_check(id, anchors::BARRIER, e));
            return;
        }
    };
    let closed = match frac_lap_barrier(bc, &x) {
        Ok(ExtendedValue::Finite(v)) => v,
        Ok(ExtendedValue::MinusInfinity) => {
            rb.push(failed_check(id, anchors::BARRIER, "picked a singular point"));
            return;
        }
        Err(e) => {
            rb.push(failed_check(id, anchors::BARRIER, e));
            return;
        }
    };
    let numeric = match frac_lap_numeric(&field, &bc.params, &x, oracle_tol) {
        Ok(v) => v,
        Err(e) => {
            rb.push(failed_check(id, anchors::BARRIER, e));
            return;
        }
    };
    let measured = (numeric - closed).abs();
    let target = 3.0 * oracle_tol;
    rb.push(check(
        id,
        anchors::BARRIER,
        json!({ "point": x, "stratum": if use_annulus { "annulus" } else { "overlap" } }),
        measured,
        target,
        target - measured,
    ));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suites::ParamPair;

    fn tiny_cfg() -> SuiteConfig {
        let mut cfg = SuiteConfig::barrier_default();
        cfg.params = vec![ParamPair::new(1, 0.5)];
        cfg.offsets = vec![0.25];
        cfg
    }

    #[test]
    fn tiny_barrier_run_is_green() {
        let report = run_barrier_suite(&tiny_cfg()).unwrap();
        assert!(report.summary.total >= 4);
        for c in &report.checks {
            assert!(c.pass, "check {} failed: measured {} target {}", c.id, c.measured, c.target);
        }
    }

    #[test]
    fn shifted_barrier_fails_the_annulus_inequality() {
        let fault = FaultInjection {
            barrier_shift: 0.5,
            ..FaultInjection::default()
        };
        let report = run_barrier_suite_with(&tiny_cfg(), &fault).unwrap();
        let annulus = report
            .checks
            .iter()
            .find(|c| c.id.starts_with("annulus_inequality"))
            .expect("annulus check present");
        assert!(!annulus.pass);
    }

    #[test]
    fn rejects_degenerate_ratios() {
        let mut cfg = tiny_cfg();
        cfg.offsets = vec![1.5];
        assert!(run_barrier_suite(&cfg).is_err());
    }
}
