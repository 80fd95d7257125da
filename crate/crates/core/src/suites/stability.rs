//! Stability sweep: solves the torsion problem on a family of ellipses with
//! growing eccentricity and tracks four deficit quantities — the ball
//! deficit `ρ`, the oscillation of the fractional normal derivative, the
//! weighted cap integral left over by the critical reflection, and the
//! area of the symmetric difference with the reflected domain.  All four
//! must vanish at zero eccentricity, grow monotonically, and satisfy the
//! stability exponent in a log–log fit of `ρ` against the oscillation.

use rayon::prelude::*;
use serde_json::json;

use super::{
    anchors, check, failed_check, lsq_slope, FaultInjection, Report, ReportBuilder, SuiteConfig,
    SweepTable,
};
use crate::geometry::{
    critical_value, reflect_point, rho_deficit, symmetric_difference_measure, CenterSearch,
    StarDomain,
};
use crate::solver::{frac_normal_derivative, solve_dirichlet, GridField, ReactionSpec};
use crate::specfun::FracParams;

/// Boundary sample count for the normal-derivative oscillation.
const TRACE_POINTS: usize = 64;

/// One sweep cell: an `(s, eccentricity)` pair on the common grid.
struct Row {
    s: f64,
    eps: f64,
    h: f64,
    rho: f64,
    seminorm: f64,
    cap: f64,
    symdiff: f64,
}

pub fn run_stability_sweep(cfg: &SuiteConfig) -> Result<Report, super::ConfigError> {
    run_stability_sweep_with(cfg, &FaultInjection::default())
}

pub fn run_stability_sweep_with(
    cfg: &SuiteConfig,
    fault: &FaultInjection,
) -> Result<Report, super::ConfigError> {
    cfg.validate()?;
    for pair in &cfg.params {
        if pair.n != 2 {
            return Err(super::cfg_err(format!(
                "the stability sweep is planar, got n={}",
                pair.n
            )));
        }
    }
    if cfg.offsets.is_empty() {
        return Err(super::cfg_err("stability sweep needs an eccentricity grid"));
    }
    if cfg.offsets.windows(2).any(|w| w[0] >= w[1]) || cfg.offsets[0] < 0.0 {
        return Err(super::cfg_err(
            "eccentricities must be nonnegative and strictly increasing",
        ));
    }
    if cfg.resolutions.is_empty() {
        return Err(super::cfg_err("stability sweep needs a grid resolution"));
    }
    let resolution = cfg.resolutions[0];
    let direction = cfg.direction.clone().unwrap_or_else(|| vec![1.0, 1.0]);
    let norm = (direction[0] * direction[0] + direction[1] * direction[1]).sqrt();
    if !(norm > 0.0) {
        return Err(super::cfg_err("sweep direction must be nonzero"));
    }
    let e = vec![direction[0] / norm, direction[1] / norm];

    let mut rb = ReportBuilder::new(&cfg.name);
    let cells: Vec<(f64, f64)> = cfg
        .params
        .iter()
        .flat_map(|p| cfg.offsets.iter().map(move |&eps| (p.s, eps)))
        .collect();
    let results: Vec<Result<Row, String>> = cells
        .par_iter()
        .map(|&(s, eps)| sweep_cell(s, eps, resolution, &e))
        .collect();

    let mut rows_by_s: Vec<(f64, Vec<Row>)> = Vec::new();
    for (cell, result) in cells.iter().zip(results) {
        match result {
            Ok(row) => {
                if let Some((_, rows)) = rows_by_s.last_mut().filter(|(s, _)| *s == cell.0) {
                    rows.push(row);
                } else {
                    rows_by_s.push((cell.0, vec![row]));
                }
            }
            Err(msg) => rb.push(failed_check(
                format!("sweep_cell[s={},eps={}]", cell.0, cell.1),
                anchors::STABILITY,
                msg,
            )),
        }
    }

    let mut table = SweepTable {
        columns: ["s", "eps", "h", "rho", "seminorm", "cap", "symdiff"]
            .iter()
            .map(|c| c.to_string())
            .collect(),
        rows: Vec::new(),
    };
    for (_, rows) in &rows_by_s {
        for r in rows {
            table
                .rows
                .push(vec![r.s, r.eps, r.h, r.rho, r.seminorm, r.cap, r.symdiff]);
        }
    }
    rb.set_table(table);

    for (s, rows) in &rows_by_s {
        quantity_checks(&mut rb, cfg, fault, *s, rows);
    }
    Ok(rb.finish())
}

/// Solve one ellipse and measure all four deficit quantities.
fn sweep_cell(s: f64, eps: f64, resolution: usize, e: &[f64]) -> Result<Row, String> {
    let domain = StarDomain::ellipse(vec![0.0, 0.0], [1.0 + eps, 1.0])
        .map_err(|e| e.to_string())?;
    let params = FracParams::new(2, s).map_err(|e| e.to_string())?;
    let rho = rho_deficit(&domain, &CenterSearch::default()).rho;
    let u = solve_dirichlet(&domain, &ReactionSpec::constant(1.0), &params, resolution)
        .map_err(|e| e.to_string())?;
    let trace = frac_normal_derivative(&u, TRACE_POINTS).map_err(|e| e.to_string())?;
    let crit = critical_value(&domain, e).map_err(|e| e.to_string())?;
    let plane = crit.plane();
    Ok(Row {
        s,
        eps,
        h: u.h,
        rho,
        seminorm: trace.oscillation(),
        cap: cap_integral(&u, &domain, &plane),
        symdiff: symmetric_difference_measure(&domain, &plane),
    })
}

/// `h² Σ_K (λ − x·e) u(x)` over the residual region `K` (grid nodes on the
/// lower side whose mirror lands outside the domain).
fn cap_integral(u: &GridField, domain: &StarDomain, plane: &crate::geometry::Hyperplane) -> f64 {
    let mut acc = 0.0;
    for flat in u.masked_indices() {
        let x = u.node_coord(flat);
        let off = plane.signed_offset(&x);
        if off < 0.0 && !domain.contains(&reflect_point(&x, plane)) {
            acc += (-off) * u.values[flat];
        }
    }
    acc * u.h * u.h
}

/// Per-quantity discretization floor used by the vanish and monotonicity
/// checks.  The constants were pinned from disc runs (`ε = 0`), where every
/// quantity is zero in the continuum; the floors sit a factor of a few above
/// the observed grid noise and scale with `h` like that noise does.
fn quantity_floor(name: &str, h: f64, s: f64) -> f64 {
    match name {
        // Center search on an exact disc recovers ρ to the pattern-search
        // tolerance, far below the grid scale.
        "rho" => 1e-6,
        // Fitted-coefficient noise of the boundary trace scales with `h`
        // (measured ≈ 0.6h–0.95h on discs across all s).
        "seminorm" => 3.0 * h,
        // Membership jitter of mirrored nodes contributes `O(h²)` cells
        // with `O(h^s)` values near the boundary.
        "cap" => 2.0 * h * h * h.powf(s),
        // The column slicer resolves the symmetric difference to its
        // internal refinement tolerance with an absolute floor.
        "symdiff" => 1e-4,
        _ => unreachable!("unknown quantity {name}"),
    }
}

fn quantity_checks(
    rb: &mut ReportBuilder,
    cfg: &SuiteConfig,
    fault: &FaultInjection,
    s: f64,
    rows: &[Row],
) {
    let names = ["rho", "seminorm", "cap", "symdiff"];
    let select = |r: &Row, name: &str| match name {
        "rho" => r.rho,
        "seminorm" => r.seminorm,
        "cap" => r.cap,
        "symdiff" => r.symdiff,
        _ => unreachable!(),
    };
    let h = rows.first().map_or(0.0, |r| r.h);

    for name in names {
        let floor = cfg.tol(&format!("floor_{name}"), quantity_floor(name, h, s));

        if let Some(zero) = rows.iter().find(|r| r.eps == 0.0) {
            let q0 = select(zero, name);
            rb.push(check(
                format!("vanish_{name}[s={s}]"),
                anchors::VANISH,
                json!({ "value": q0, "floor": floor }),
                q0.abs(),
                floor,
                floor - q0.abs(),
            ));
        }

        let mut worst = f64::NEG_INFINITY;
        let mut at = 0.0;
        for w in rows.windows(2) {
            let drop = select(&w[0], name) - select(&w[1], name);
            if drop > worst {
                worst = drop;
                at = w[1].eps;
            }
        }
        if worst > f64::NEG_INFINITY {
            rb.push(check(
                format!("monotone_{name}[s={s}]"),
                anchors::MONOTONE,
                json!({ "worst_drop": worst, "at_eps": at, "slack": floor }),
                worst,
                floor,
                floor - worst,
            ));
        }
    }

    // Residual structure: the cap integral is controlled by the trace
    // oscillation.  Fit the constant as the largest observed ratio and
    // require the normalized ratio to grow with eccentricity (the cap
    // vanishes at least as fast as the oscillation near the disc).
    let ratios: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.eps > 0.0 && r.seminorm > 0.0)
        .map(|r| (r.eps, r.cap / r.seminorm))
        .collect();
    if ratios.len() >= 2 {
        let fitted = ratios.iter().map(|&(_, r)| r).fold(f64::NEG_INFINITY, f64::max);
        let mut worst = f64::NEG_INFINITY;
        for w in ratios.windows(2) {
            worst = worst.max((w[0].1 - w[1].1) / fitted);
        }
        let slack = cfg.tol("shape_slack", 0.05);
        rb.push(check(
            format!("cap_seminorm_shape[s={s}]"),
            anchors::CAP,
            json!({
                "fitted_constant": fitted,
                "ratios": ratios.iter().map(|&(e, r)| json!([e, r])).collect::<Vec<_>>(),
            }),
            worst,
            slack,
            slack - worst,
        ));
    }

    // Stability exponent: regress log ρ on log(oscillation) over the
    // eccentric rows.  The relation `ρ ≲ oscillation^{1/(s+2)}` demands an
    // asymptotic slope of at least `1/(s+2)`.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in rows.iter().filter(|r| r.eps > 0.0) {
        if r.rho > 0.0 && r.seminorm > 0.0 {
            xs.push(r.seminorm.ln());
            ys.push(r.rho.ln());
        }
    }
    let id = format!("stability_slope[s={s}]");
    if xs.len() < 2 {
        rb.push(failed_check(
            id,
            anchors::STABILITY,
            format!("only {} usable eccentric rows for the slope fit", xs.len()),
        ));
        return;
    }
    let slope = lsq_slope(&xs, &ys) - fault.slope_shift;
    let threshold = 1.0 / (s + 2.0) - 0.05;
    rb.push(check(
        id,
        anchors::STABILITY,
        json!({ "points": xs.len(), "raw_slope": slope + fault.slope_shift }),
        slope,
        threshold,
        slope - threshold,
    ));
}
