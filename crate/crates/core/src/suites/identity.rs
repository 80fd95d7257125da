//! Closed-form identity suite: the torsion profile's interior, exterior and
//! on-sphere behavior against the quadrature oracle, the annulus sign sweep,
//! hypergeometric residuals, constants relations, harmonic-lift consistency,
//! the inradius exponent law, and the discrete kernel's mass partition.

use serde_json::json;

use super::{
    anchors, check, failed_check, FaultInjection, Report, ReportBuilder, SuiteConfig,
};
use crate::closedform::{
    frac_lap_harmonic_torsion, frac_lap_torsion, harmonicity_residual, torsion, Ball,
    ExtendedValue,
};
use crate::geometry::StarDomain;
use crate::quadrature::{fields, frac_lap_numeric, Field, QuadratureError, SmoothnessHint, Support};
use crate::solver::stencil2d;
use crate::specfun::{annulus_factors, annulus_hyp, gauss_2f1, FracParams};

/// Golden-angle direction ladder: deterministic, roughly equidistributed.
fn direction(n: u32, k: usize) -> Vec<f64> {
    match n {
        1 => vec![if k % 2 == 0 { 1.0 } else { -1.0 }],
        _ => {
            let theta = 2.399963229728653 * (k as f64 + 1.0);
            vec![theta.cos(), theta.sin()]
        }
    }
}

fn scaled(dir: &[f64], r: f64) -> Vec<f64> {
    dir.iter().map(|d| d * r).collect()
}

pub fn run_identity_suite(cfg: &SuiteConfig) -> Result<Report, super::ConfigError> {
    run_identity_suite_with(cfg, &FaultInjection::default())
}

/// Same as [`run_identity_suite`] but with deliberate-fault hooks exposed so
/// tests can demonstrate a red path.
pub fn run_identity_suite_with(
    cfg: &SuiteConfig,
    fault: &FaultInjection,
) -> Result<Report, super::ConfigError> {
    cfg.validate()?;
    let mut rb = ReportBuilder::new(&cfg.name);

    for pair in &cfg.params {
        let params = match FracParams::new(pair.n, pair.s) {
            Ok(p) => p,
            Err(e) => {
                rb.push(failed_check(
                    format!("params[n={},s={}]", pair.n, pair.s),
                    anchors::INTERIOR,
                    e,
                ));
                continue;
            }
        };
        if pair.n <= 2 {
            interior_check(&mut rb, cfg, &params, fault);
            exterior_check(&mut rb, cfg, &params);
            singular_check(&mut rb, cfg, &params);
            exponent_check(&mut rb, cfg, &params);
        }
        signs_check(&mut rb, cfg, &params);
        hyp_check(&mut rb, cfg, &params);
    }

    if !cfg.params.is_empty() {
        constants_check(&mut rb, cfg);
        recursion_check(&mut rb, cfg);
        harmonicity_check(&mut rb, cfg);
        lift_check(&mut rb, cfg);
        mass_partition_check(&mut rb, cfg);
    }

    Ok(rb.finish())
}

fn tag(name: &str, params: &FracParams) -> String {
    format!("{name}[n={},s={}]", params.n, params.s)
}

/// Oracle evaluation of `(-Δ)^s ψ_{B₁}` at 20 interior points: each must be
/// `1` within the dimension-dependent tolerance.  The fault hook corrupts the
/// torsion normalization, which the oracle then faithfully reports.
fn interior_check(
    rb: &mut ReportBuilder,
    cfg: &SuiteConfig,
    params: &FracParams,
    fault: &FaultInjection,
) {
    let id = tag("interior_identity", params);
    let tol = cfg.tol(
        "interior",
        if params.n == 1 { 1e-6 } else { 1e-3 },
    );
    let mut probe_params = *params;
    probe_params.gamma_ns *= fault.gamma_scale;
    let ball = Ball::new(vec![0.0; params.n as usize], 1.0).expect("unit ball");
    let field = match fields::torsion_field(&ball, &probe_params) {
        Ok(f) => f,
        Err(e) => {
            rb.push(failed_check(id, anchors::INTERIOR, e));
            return;
        }
    };
    let mut worst = 0.0_f64;
    let points = 20usize;
    for k in 0..points {
        let r = 0.92 * (k as f64 + 0.5) / points as f64;
        let x = scaled(&direction(params.n, k), r);
        match frac_lap_numeric(&field, params, &x, 0.3 * tol) {
            Ok(v) => worst = worst.max((v - 1.0).abs()),
            Err(e) => {
                rb.push(failed_check(id, anchors::INTERIOR, e));
                return;
            }
        }
    }
    rb.push(check(
        id,
        anchors::INTERIOR,
        json!({ "points": points, "radius_max": 0.92, "oracle_tol": 0.3 * tol }),
        worst,
        tol,
        tol - worst,
    ));
}

/// Closed-form exterior values against the oracle at 10 points, in relative
/// terms.
fn exterior_check(rb: &mut ReportBuilder, cfg: &SuiteConfig, params: &FracParams) {
    let id = tag("exterior_closed_form", params);
    let rel_tol = cfg.tol(
        "exterior",
        if params.n == 1 { 1e-5 } else { 1e-3 },
    );
    let ball = Ball::new(vec![0.0; params.n as usize], 1.0).expect("unit ball");
    let field = match fields::torsion_field(&ball, params) {
        Ok(f) => f,
        Err(e) => {
            rb.push(failed_check(id, anchors::EXTERIOR, e));
            return;
        }
    };
    let mut worst = 0.0_f64;
    let points = 10usize;
    for k in 0..points {
        let r = 1.08 + (3.0 - 1.08) * k as f64 / (points - 1) as f64;
        let x = scaled(&direction(params.n, k), r);
        let cf = match frac_lap_torsion(&ball, params, &x) {
            Ok(ExtendedValue::Finite(v)) => v,
            Ok(ExtendedValue::MinusInfinity) => {
                rb.push(failed_check(id, anchors::EXTERIOR, "unexpected singular point"));
                return;
            }
            Err(e) => {
                rb.push(failed_check(id, anchors::EXTERIOR, e));
                return;
            }
        };
        let oracle_tol = (0.2 * rel_tol * cf.abs()).max(1e-11);
        match frac_lap_numeric(&field, params, &x, oracle_tol) {
            Ok(v) => worst = worst.max((v - cf).abs() / cf.abs()),
            Err(e) => {
                rb.push(failed_check(id, anchors::EXTERIOR, e));
                return;
            }
        }
    }
    rb.push(check(
        id,
        anchors::EXTERIOR,
        json!({ "points": points, "radius_range": [1.08, 3.0] }),
        worst,
        rel_tol,
        rel_tol - worst,
    ));
}

/// Points within `1e-10` of the support sphere must be declared divergent.
fn singular_check(rb: &mut ReportBuilder, cfg: &SuiteConfig, params: &FracParams) {
    let id = tag("sphere_divergence", params);
    let _ = cfg;
    let ball = Ball::new(vec![0.0; params.n as usize], 1.0).expect("unit ball");
    let field = match fields::torsion_field(&ball, params) {
        Ok(f) => f,
        Err(e) => {
            rb.push(failed_check(id, anchors::SINGULAR, e));
            return;
        }
    };
    let offsets = [-1e-11, 1e-11, -5e-11, 5e-11];
    let mut declared = 0usize;
    for (k, &d) in offsets.iter().enumerate() {
        let x = scaled(&direction(params.n, k), 1.0 + d);
        match frac_lap_numeric(&field, params, &x, 1e-4) {
            Err(QuadratureError::Singular { .. }) => declared += 1,
            _ => {}
        }
    }
    let measured = declared as f64 / offsets.len() as f64;
    rb.push(check(
        id,
        anchors::SINGULAR,
        json!({ "offsets": offsets, "declared": declared }),
        measured,
        1.0,
        measured - 1.0,
    ));
}

/// Sign sweep of the annulus factors over 10⁴ values of τ.
fn signs_check(rb: &mut ReportBuilder, cfg: &SuiteConfig, params: &FracParams) {
    let id = tag("annulus_signs", params);
    let slack = cfg.tol("signs", 1e-12);
    let count = 10_000usize;
    let mut worst = f64::NEG_INFINITY;
    for j in 0..count {
        let tau = j as f64 / count as f64;
        match annulus_factors(params, tau) {
            Ok(af) => {
                worst = worst.max(af.f - 1.0).max(af.g);
            }
            Err(e) => {
                rb.push(failed_check(id, anchors::SIGNS, e));
                return;
            }
        }
    }
    rb.push(check(
        id,
        anchors::SIGNS,
        json!({ "tau_count": count }),
        worst,
        slack,
        slack - worst,
    ));
}

/// Hypergeometric residuals: the Euler transformation identity on a τ-grid
/// and the Gauss sum at τ = 1.
fn hyp_check(rb: &mut ReportBuilder, cfg: &SuiteConfig, params: &FracParams) {
    let id = tag("hyp2f1_residuals", params);
    let tol = cfg.tol("hyp", 1e-10);
    let n = f64::from(params.n);
    let s = params.s;
    let (a, b, c) = (1.0, 0.5 * n, 0.5 * (n + 2.0 * s) + 1.0);
    let mut worst = 0.0_f64;
    for j in 1..=9 {
        let tau = j as f64 / 10.0;
        let lhs = match gauss_2f1(a, b, c, tau) {
            Ok(v) => v,
            Err(e) => {
                rb.push(failed_check(id, anchors::HYP, e));
                return;
            }
        };
        let rhs = match gauss_2f1(c - a, c - b, c, tau) {
            Ok(v) => (1.0 - tau).powf(c - a - b) * v,
            Err(e) => {
                rb.push(failed_check(id, anchors::HYP, e));
                return;
            }
        };
        worst = worst.max((lhs - rhs).abs() / lhs.abs());
    }
    match annulus_hyp(params, 1.0) {
        Ok(v) => {
            let gauss = (n + 2.0 * s) / (2.0 * s);
            worst = worst.max((v - gauss).abs() / gauss);
        }
        Err(e) => {
            rb.push(failed_check(id, anchors::HYP, e));
            return;
        }
    }
    rb.push(check(
        id,
        anchors::HYP,
        json!({ "tau_grid": "0.1..0.9", "gauss_sum_at_one": true }),
        worst,
        tol,
        tol - worst,
    ));
}

/// Exact special values at `(n, s) = (1, 1/2)` and `(2, 1/2)`.
fn constants_check(rb: &mut ReportBuilder, cfg: &SuiteConfig) {
    let tol = cfg.tol("constants", 1e-12);
    let pi = std::f64::consts::PI;
    let one_half = FracParams::new(1, 0.5).expect("valid");
    let two_half = FracParams::new(2, 0.5).expect("valid");
    let deviations = [
        (one_half.gamma_ns - 1.0).abs(),
        (one_half.a_ns - 0.5).abs(),
        (one_half.kappa_ns - 8.0 / (3.0 * pi)).abs(),
        (one_half.c_ns - 1.0 / pi).abs(),
        (two_half.gamma_ns - 2.0 / pi).abs(),
    ];
    let worst = deviations.iter().copied().fold(0.0, f64::max);
    rb.push(check(
        "constants_special_values",
        anchors::CONSTANTS,
        json!({
            "gamma_1_half": one_half.gamma_ns,
            "a_1_half": one_half.a_ns,
            "kappa_1_half": one_half.kappa_ns,
            "c_1_half": one_half.c_ns,
            "gamma_2_half": two_half.gamma_ns,
        }),
        worst,
        tol,
        tol - worst,
    ));
}

/// Dimension recursions of the derived constants across `n ∈ {1,…,6}`:
/// `γ_{n+2,s}/γ_{n,s} = (n/2)/(n/2+s)` and
/// `a_{n+2,s}/a_{n,s} = (n/2)/(n/2+s+1)`.
fn recursion_check(rb: &mut ReportBuilder, cfg: &SuiteConfig) {
    let tol = cfg.tol("constants", 1e-12);
    let mut svals: Vec<f64> = cfg.params.iter().map(|p| p.s).collect();
    svals.sort_by(f64::total_cmp);
    svals.dedup();
    let mut worst = 0.0_f64;
    for &s in &svals {
        for n in 1..=6u32 {
            let low = FracParams::new(n, s).expect("valid");
            let high = FracParams::new(n + 2, s).expect("valid");
            let half_n = 0.5 * f64::from(n);
            let gamma_ratio = half_n / (half_n + s);
            let a_ratio = half_n / (half_n + s + 1.0);
            worst = worst.max((high.gamma_ns - gamma_ratio * low.gamma_ns).abs() / low.gamma_ns);
            worst = worst.max((high.a_ns - a_ratio * low.a_ns).abs() / low.a_ns);
        }
    }
    rb.push(check(
        "constants_recursions",
        anchors::CONSTANTS,
        json!({ "n_range": [1, 6], "s_values": svals }),
        worst,
        tol,
        tol - worst,
    ));
}

/// The finite-difference Laplacian of every polynomial used in harmonic
/// lifts must vanish at the spot-check points.
fn harmonicity_check(rb: &mut ReportBuilder, cfg: &SuiteConfig) {
    let tol = cfg.tol("harmonic", 1e-6);
    let mut dims: Vec<u32> = cfg.params.iter().map(|p| p.n).collect();
    dims.sort_unstable();
    dims.dedup();
    let mut worst = 0.0_f64;
    let mut tested = Vec::new();
    for &n in &dims {
        worst = worst.max(harmonicity_residual(n, &|x: &[f64]| x[0], 1));
        tested.push(format!("n={n}: x1"));
        if n >= 2 {
            worst = worst.max(harmonicity_residual(n, &|x: &[f64]| x[0] * x[1], 2));
            tested.push(format!("n={n}: x1*x2"));
        }
    }
    rb.push(check(
        "lift_polynomials_harmonic",
        anchors::HARMONIC,
        json!({ "polynomials": tested }),
        worst,
        tol,
        tol - worst,
    ));
}

/// The harmonic-lift closed form `(-Δ)^s[x ψ_B]` against the oracle on the
/// line, at interior and exterior points.
fn lift_check(rb: &mut ReportBuilder, cfg: &SuiteConfig) {
    let mut svals: Vec<f64> = cfg
        .params
        .iter()
        .filter(|p| p.n == 1)
        .map(|p| p.s)
        .collect();
    svals.sort_by(f64::total_cmp);
    svals.dedup();
    if svals.is_empty() {
        return;
    }
    let tol = cfg.tol("lift", 5e-6);
    let ball = Ball::new(vec![0.0], 1.0).expect("unit interval ball");
    for &s in &svals {
        let id = format!("harmonic_lift[n=1,s={s}]");
        let params = FracParams::new(1, s).expect("valid");
        let ball_for_field = ball.clone();
        let field = match Field::new(
            1,
            Support::Compact { radius: 1.0 },
            SmoothnessHint::BoundaryKink,
            move |x: &[f64]| x[0] * torsion(&ball_for_field, &params, x),
        ) {
            Ok(f) => f.with_kink_sphere(vec![0.0], 1.0),
            Err(e) => {
                rb.push(failed_check(id, anchors::LIFT, e));
                return;
            }
        };
        let mut worst = 0.0_f64;
        let p = |z: &[f64]| z[0];
        for &x in &[-0.6, 0.3, 0.7, 1.4, -2.2] {
            let cf = match frac_lap_harmonic_torsion(&ball, &params, 1, &p, &[x]) {
                Ok(ExtendedValue::Finite(v)) => v,
                Ok(ExtendedValue::MinusInfinity) => {
                    rb.push(failed_check(id, anchors::LIFT, "unexpected singular point"));
                    return;
                }
                Err(e) => {
                    rb.push(failed_check(id, anchors::LIFT, e));
                    return;
                }
            };
            match frac_lap_numeric(&field, &params, &[x], 0.2 * tol) {
                Ok(v) => worst = worst.max((v - cf).abs()),
                Err(e) => {
                    rb.push(failed_check(id, anchors::LIFT, e));
                    return;
                }
            }
        }
        rb.push(check(
            id,
            anchors::LIFT,
            json!({ "points": [-0.6, 0.3, 0.7, 1.4, -2.2] }),
            worst,
            tol,
            tol - worst,
        ));
    }
}

/// The inradius formula's power law: `R ∝ Lip^{-1/(2s)}` once the spectral
/// branch binds.
fn exponent_check(rb: &mut ReportBuilder, cfg: &SuiteConfig, params: &FracParams) {
    let id = tag("inradius_exponent", params);
    let tol = cfg.tol("exponent", 1e-9);
    let domain = if params.n == 1 {
        StarDomain::interval(-1.0, 1.0)
    } else {
        StarDomain::ball(vec![0.0, 0.0], 1.0)
    };
    let domain = match domain {
        Ok(d) => d,
        Err(e) => {
            rb.push(failed_check(id, anchors::EXPONENT, e));
            return;
        }
    };
    let lips = [1e2, 1e4, 1e6];
    let mut ln_lip = Vec::new();
    let mut ln_r = Vec::new();
    for &lip in &lips {
        match crate::geometry::r_param(&domain, params, lip) {
            Ok(r) => {
                ln_lip.push(lip.ln());
                ln_r.push(r.ln());
            }
            Err(e) => {
                rb.push(failed_check(id, anchors::EXPONENT, e));
                return;
            }
        }
    }
    let slope = super::lsq_slope(&ln_lip, &ln_r);
    let expected = -1.0 / (2.0 * params.s);
    let measured = (slope - expected).abs();
    rb.push(check(
        id,
        anchors::EXPONENT,
        json!({ "lipschitz_values": lips, "slope": slope, "expected": expected }),
        measured,
        tol,
        tol - measured,
    ));
}

/// The 2-D stencil's kernel mass must partition: covered weight plus a tail
/// bounded by the mass beyond the table square equals the closed-form total.
fn mass_partition_check(rb: &mut ReportBuilder, cfg: &SuiteConfig) {
    let mut svals: Vec<f64> = cfg
        .params
        .iter()
        .filter(|p| p.n == 2)
        .map(|p| p.s)
        .collect();
    svals.sort_by(f64::total_cmp);
    svals.dedup();
    for &s in &svals {
        for extent in [8usize, 16] {
            let id = format!("kernel_mass_partition[s={s},extent={extent}]");
            let table = stencil2d::table(s, extent);
            let gap = table.outside_mass - table.covered_mass();
            let bound = table.outside_mass * ((extent as f64) - 1.0).powf(-2.0 * s);
            let margin = gap.min(bound - gap);
            rb.push(check(
                id,
                anchors::MASS,
                json!({ "outside_mass": table.outside_mass, "covered": table.covered_mass() }),
                gap,
                bound,
                margin,
            ));
        }
    }
}
