//! Moving-planes suite: solves the torsion problem on an asymmetric planar
//! domain, forms the antisymmetric difference across the critical plane, and
//! checks the cap positivity floor, the interior lower bound with its three
//! ball-offset cases, the boundary (Hopf-type) quotient, and the corner
//! quotient — reporting fitted constants and their refinement drift.

use serde_json::json;

use super::{anchors, check, failed_check, FaultInjection, Report, ReportBuilder, SuiteConfig};
use crate::geometry::{critical_value, reflect_point, CriticalPlaneResult, StarDomain};
use crate::solver::{antisymmetric_difference, solve_dirichlet, GridField, ReactionSpec};
use crate::specfun::FracParams;

/// Discretization floor: `ε_h = K · h^{min(1, 2s)} · sup|u|`.  The constant
/// is pinned from a refinement study of the canonical perturbed disc (the
/// worst observed ratio was well under a quarter of this).
pub const EPS_H_CONSTANT: f64 = 4.0;

/// `ε_h` for a solved field.
pub fn eps_h(h: f64, s: f64, u_sup: f64) -> f64 {
    EPS_H_CONSTANT * h.powf(1f64.min(2.0 * s)) * u_sup
}

pub fn run_maxprinciple_suite(cfg: &SuiteConfig) -> Result<Report, super::ConfigError> {
    run_maxprinciple_suite_with(cfg, &FaultInjection::default())
}

struct PlaneFrame {
    e: Vec<f64>,
    t: Vec<f64>,
    lambda: f64,
}

impl PlaneFrame {
    fn depth(&self, x: &[f64]) -> f64 {
        self.lambda - (x[0] * self.e[0] + x[1] * self.e[1])
    }

    fn transverse(&self, x: &[f64]) -> f64 {
        x[0] * self.t[0] + x[1] * self.t[1]
    }

    fn point(&self, depth: f64, transverse: f64) -> Vec<f64> {
        vec![
            (self.lambda - depth) * self.e[0] + transverse * self.t[0],
            (self.lambda - depth) * self.e[1] + transverse * self.t[1],
        ]
    }
}

struct CapData {
    frame: PlaneFrame,
    crit: CriticalPlaneResult,
    u: GridField,
    v: GridField,
    h: f64,
    u_sup: f64,
    eps: f64,
    cap_flats: Vec<usize>,
    k_norm: f64,
    depth_max: f64,
    transverse_mid: f64,
    transverse_halfwidth: f64,
}

/// Fitted constants of one resolution, for the drift report.
#[derive(Default, Clone)]
struct Fits {
    lower: [Option<f64>; 3],
    hopf: Option<f64>,
    corner: Option<f64>,
}

fn reflect_vec(w: &[f64], e: &[f64]) -> Vec<f64> {
    let d = w[0] * e[0] + w[1] * e[1];
    vec![w[0] - 2.0 * d * e[0], w[1] - 2.0 * d * e[1]]
}

/// Solve, reflect, and classify the grid into the reflected cap `Ω'_λ` and
/// the residual region `K`; returns `None` with a failed check on breakage.
fn build_cap(
    rb: &mut ReportBuilder,
    domain: &StarDomain,
    params: &FracParams,
    resolution: usize,
    direction: &[f64],
    tag: &str,
) -> Option<CapData> {
    let reaction = ReactionSpec::constant(1.0);
    let u = match solve_dirichlet(domain, &reaction, params, resolution) {
        Ok(u) => u,
        Err(e) => {
            rb.push(failed_check(format!("solve{tag}"), anchors::POSITIVITY, e));
            return None;
        }
    };
    let crit = match critical_value(domain, direction) {
        Ok(c) => c,
        Err(e) => {
            rb.push(failed_check(format!("critical_plane{tag}"), anchors::POSITIVITY, e));
            return None;
        }
    };
    let plane = crit.plane();
    let v = match antisymmetric_difference(&u, &plane) {
        Ok(v) => v,
        Err(e) => {
            rb.push(failed_check(format!("reflection{tag}"), anchors::POSITIVITY, e));
            return None;
        }
    };
    let frame = PlaneFrame {
        t: vec![-plane.e[1], plane.e[0]],
        e: plane.e.clone(),
        lambda: plane.mu,
    };
    let h = u.h;
    let u_sup = u.masked_sup();
    let eps = eps_h(h, params.s, u_sup);

    let mut cap_flats = Vec::new();
    let mut k_norm = 0.0;
    let mut depth_max = 0.0_f64;
    let mut t_min = f64::INFINITY;
    let mut t_max = f64::NEG_INFINITY;
    for flat in u.masked_indices() {
        let x = u.node_coord(flat);
        let d = frame.depth(&x);
        if d <= 0.0 {
            continue;
        }
        let mirrored = reflect_point(&x, &plane);
        if domain.contains(&mirrored) {
            cap_flats.push(flat);
            depth_max = depth_max.max(d);
            let tr = frame.transverse(&x);
            t_min = t_min.min(tr);
            t_max = t_max.max(tr);
        } else {
            k_norm += d * u.values[flat];
        }
    }
    k_norm *= h * h;
    Some(CapData {
        frame,
        crit,
        u,
        v,
        h,
        u_sup,
        eps,
        cap_flats,
        k_norm,
        depth_max,
        transverse_mid: 0.5 * (t_min + t_max),
        transverse_halfwidth: (0.5 * (t_max - t_min)).max(0.0),
    })
}

/// Is `x` a usable interior point of the reflected cap?
fn in_cap(cap: &CapData, domain: &StarDomain, x: &[f64]) -> bool {
    if cap.frame.depth(x) <= 0.0 || !domain.contains(x) {
        return false;
    }
    let plane = cap.crit.plane();
    domain.contains(&reflect_point(x, &plane))
}

fn push_fit_check(
    rb: &mut ReportBuilder,
    id: String,
    anchor: &str,
    inputs: serde_json::Value,
    fitted: f64,
) {
    rb.push(check(id, anchor, inputs, fitted, 0.0, fitted));
}

pub fn run_maxprinciple_suite_with(
    cfg: &SuiteConfig,
    fault: &FaultInjection,
) -> Result<Report, super::ConfigError> {
    cfg.validate()?;
    for pair in &cfg.params {
        if pair.n != 2 {
            return Err(super::cfg_err(format!(
                "the moving-planes suite is planar; every interval is symmetric, got n={}",
                pair.n
            )));
        }
    }
    if cfg.domains.is_empty() || cfg.resolutions.is_empty() {
        return Err(super::cfg_err(
            "moving-planes suite needs at least one domain and one resolution",
        ));
    }
    let direction = cfg.direction.clone().unwrap_or_else(|| vec![1.0, 0.0]);
    let mut rb = ReportBuilder::new(&cfg.name);

    for pair in &cfg.params {
        let params = match FracParams::new(pair.n, pair.s) {
            Ok(p) => p,
            Err(e) => {
                rb.push(failed_check(format!("params[s={}]", pair.s), anchors::POSITIVITY, e));
                continue;
            }
        };
        for (dom_idx, domain) in cfg.domains.iter().enumerate() {
            let mut fits_by_resolution: Vec<(usize, Fits)> = Vec::new();
            for &resolution in &cfg.resolutions {
                let tag = format!("[s={},domain={dom_idx},nodes={resolution}]", pair.s);
                let Some(cap) = build_cap(&mut rb, domain, &params, resolution, &direction, &tag)
                else {
                    continue;
                };
                let fits =
                    run_single_resolution(&mut rb, cfg, fault, domain, &params, &cap, &tag);
                fits_by_resolution.push((resolution, fits));
            }
            drift_checks(&mut rb, cfg, pair.s, dom_idx, &fits_by_resolution);
            if let Some(base) = fits_by_resolution.first().and_then(|(_, f)| f.lower[0]) {
                scaling_probe_check(
                    &mut rb,
                    cfg,
                    domain,
                    &params,
                    cfg.resolutions[0],
                    &direction,
                    base,
                    pair.s,
                    dom_idx,
                );
            }
        }
    }
    Ok(rb.finish())
}

fn run_single_resolution(
    rb: &mut ReportBuilder,
    cfg: &SuiteConfig,
    fault: &FaultInjection,
    domain: &StarDomain,
    params: &FracParams,
    cap: &CapData,
    tag: &str,
) -> Fits {
    let mut fits = Fits::default();

    // (a) positivity floor over the reflected cap.
    let mut min_v = f64::INFINITY;
    for &flat in &cap.cap_flats {
        min_v = min_v.min(cap.v.values[flat] - fault.cap_depression);
    }
    if cap.cap_flats.is_empty() {
        min_v = 0.0;
    }
    rb.push(check(
        format!("cap_positivity{tag}"),
        anchors::POSITIVITY,
        json!({
            "cap_nodes": cap.cap_flats.len(),
            "eps_h": cap.eps,
            "h": cap.h,
            "u_sup": cap.u_sup,
            "contact_case": format!("{:?}", cap.crit.contact_case),
            "lambda": cap.crit.lambda,
        }),
        min_v,
        -cap.eps,
        min_v + cap.eps,
    ));

    // Degenerate (symmetric) configurations carry no mass on K; the
    // remaining checks are then vacuous and recorded as such.
    let degenerate = cap.k_norm <= 1e-12 * cap.u_sup.max(1.0);
    if degenerate {
        for name in ["lower_bound_case_i", "lower_bound_case_ii", "lower_bound_case_iii"] {
            rb.push(check(
                format!("{name}{tag}"),
                anchors::LOWER,
                json!({ "degenerate": true, "k_norm": cap.k_norm }),
                0.0,
                0.0,
                0.0,
            ));
        }
        rb.push(check(
            format!("hopf_quotient{tag}"),
            anchors::HOPF,
            json!({ "degenerate": true }),
            0.0,
            0.0,
            0.0,
        ));
        rb.push(check(
            format!("corner_quotient{tag}"),
            anchors::CORNER,
            json!({ "degenerate": true }),
            0.0,
            0.0,
            0.0,
        ));
        return fits;
    }

    lower_bound_checks(rb, params, cap, tag, &mut fits);
    hopf_check(rb, domain, params, cap, tag, &mut fits);
    corner_check(rb, cfg, domain, params, cap, tag, &mut fits);
    fits
}

/// Structural probe of the unnamed constants: the fitted lower-bound
/// constant must rescale like `σ^{-(n+2+2s)}` when the domain is dilated by
/// σ.  The discrete pipeline commutes with dilation, so any drift here
/// betrays an absolute length scale hiding in the machinery.
fn scaling_probe_check(
    rb: &mut ReportBuilder,
    cfg: &SuiteConfig,
    domain: &StarDomain,
    params: &FracParams,
    resolution: usize,
    direction: &[f64],
    base_constant: f64,
    s: f64,
    dom_idx: usize,
) {
    let id = format!("diameter_scaling[s={s},domain={dom_idx}]");
    let sigma = 2.0;
    let scaled = match domain.scale(sigma) {
        Ok(d) => d,
        Err(e) => {
            rb.push(failed_check(id, anchors::LOWER, e));
            return;
        }
    };
    let tag = format!("[s={s},domain={dom_idx},scaled]");
    let Some(cap) = build_cap(rb, &scaled, params, resolution, direction, &tag) else {
        return;
    };
    let scaled_constant = match fit_lower_constants(&cap, params) {
        Ok(fit) => match &fit.cases[0] {
            Ok((c, _)) => *c,
            Err(msg) => {
                rb.push(failed_check(id, anchors::LOWER, msg));
                return;
            }
        },
        Err(msg) => {
            rb.push(failed_check(id, anchors::LOWER, msg));
            return;
        }
    };
    if !(base_constant > 0.0 && scaled_constant > 0.0) {
        rb.push(failed_check(id, anchors::LOWER, "nonpositive fitted constants"));
        return;
    }
    let measured = (base_constant / scaled_constant).log2();
    let expected = params.n as f64 + 2.0 + 2.0 * params.s;
    let tol = cfg.tol("scaling_exponent", 0.05);
    rb.push(check(
        id,
        anchors::LOWER,
        json!({
            "base_constant": base_constant,
            "scaled_constant": scaled_constant,
            "dilation": sigma,
            "expected_exponent": expected,
        }),
        measured,
        expected,
        tol - (measured - expected).abs(),
    ));
}

/// Result of fitting the three ball-offset lower-bound constants.
struct LowerFit {
    rho: f64,
    /// Per case: fitted constant and sample count, or an error message.
    cases: [Result<(f64, usize), String>; 3],
}

/// Fit the lower-bound constant `v / (‖δv‖ δ_H (ρ²-|x-a|²)^s)` over
/// well-interior sample nodes of each case ball, shrinking ρ until all
/// three trial balls sit inside the reflected cap.
fn fit_lower_constants(cap: &CapData, params: &FracParams) -> Result<LowerFit, String> {
    let mut rho = 0.35 * cap.depth_max.min(cap.transverse_halfwidth);
    let mut chosen = None;
    'shrink: for _ in 0..8 {
        let offsets = [0.0, 0.5 * rho, 1.2 * rho];
        let mut node_sets: Vec<Vec<usize>> = Vec::new();
        for &off in &offsets {
            let a = cap.frame.point(off, cap.transverse_mid);
            let mut nodes = Vec::new();
            for &flat in &cap.cap_flats {
                let x = cap.u.node_coord(flat);
                let dx = x[0] - a[0];
                let dy = x[1] - a[1];
                if dx * dx + dy * dy < rho * rho {
                    nodes.push(flat);
                }
            }
            // Every half-ball grid point must already be a cap member;
            // otherwise the ball pokes out of U and ρ must shrink.
            let expected = half_ball_nodes(cap, &a, rho);
            if nodes.len() < expected || nodes.len() < 12 {
                rho *= 0.72;
                continue 'shrink;
            }
            node_sets.push(nodes);
        }
        chosen = Some((rho, node_sets));
        break;
    }
    let Some((rho, node_sets)) = chosen else {
        return Err("no admissible ball radius found inside the reflected cap".into());
    };
    let offsets = [0.0, 0.5 * rho, 1.2 * rho];
    let cases = std::array::from_fn(|case| {
        let nodes = &node_sets[case];
        let a = cap.frame.point(offsets[case], cap.transverse_mid);
        let mut fitted = f64::INFINITY;
        let mut used = 0usize;
        for &flat in nodes {
            let x = cap.u.node_coord(flat);
            let depth = cap.frame.depth(&x);
            let dx = x[0] - a[0];
            let dy = x[1] - a[1];
            let r2 = dx * dx + dy * dy;
            if r2 > 0.81 * rho * rho || depth < 0.1 * rho {
                continue;
            }
            let weight = cap.k_norm * depth * (rho * rho - r2).powf(params.s);
            fitted = fitted.min(cap.v.values[flat] / weight);
            used += 1;
        }
        if used < 6 || !fitted.is_finite() {
            Err(format!("only {used} usable sample nodes in the case ball"))
        } else {
            Ok((fitted, used))
        }
    });
    Ok(LowerFit { rho, cases })
}

/// (b) The interior lower bound: three ball offsets `δ(a) ∈ {0, ρ/2, 1.2ρ}`.
fn lower_bound_checks(
    rb: &mut ReportBuilder,
    params: &FracParams,
    cap: &CapData,
    tag: &str,
    fits: &mut Fits,
) {
    let names = ["lower_bound_case_i", "lower_bound_case_ii", "lower_bound_case_iii"];
    let fit = match fit_lower_constants(cap, params) {
        Ok(fit) => fit,
        Err(msg) => {
            for name in names {
                rb.push(failed_check(format!("{name}{tag}"), anchors::LOWER, &msg));
            }
            return;
        }
    };
    let offsets = [0.0, 0.5 * fit.rho, 1.2 * fit.rho];
    for (case, outcome) in fit.cases.iter().enumerate() {
        match outcome {
            Ok((fitted, used)) => {
                fits.lower[case] = Some(*fitted);
                push_fit_check(
                    rb,
                    format!("{}{tag}", names[case]),
                    anchors::LOWER,
                    json!({
                        "rho": fit.rho,
                        "center_depth": offsets[case],
                        "samples": used,
                        "k_norm": cap.k_norm,
                    }),
                    *fitted,
                );
            }
            Err(msg) => {
                rb.push(failed_check(format!("{}{tag}", names[case]), anchors::LOWER, msg));
            }
        }
    }
}

/// Count of grid nodes inside the ball's intersection with the lower side of
/// the plane — the membership test in `fit_lower_constants` must find exactly
/// these as cap members.
fn half_ball_nodes(cap: &CapData, a: &[f64], rho: f64) -> usize {
    let mut count = 0usize;
    for flat in cap.u.masked_indices() {
        let x = cap.u.node_coord(flat);
        let dx = x[0] - a[0];
        let dy = x[1] - a[1];
        if dx * dx + dy * dy < rho * rho && cap.frame.depth(&x) > 0.0 {
            count += 1;
        }
    }
    count
}

/// (c) The boundary quotient at the near-contact point: march inward along
/// the reflected normal and require `v / (t^s δ_H)` to stay positive down to
/// `t = 4h`.
fn hopf_check(
    rb: &mut ReportBuilder,
    domain: &StarDomain,
    params: &FracParams,
    cap: &CapData,
    tag: &str,
    fits: &mut Fits,
) {
    let id = format!("hopf_quotient{tag}");
    let plane = cap.crit.plane();
    // Closest approach of the reflected upper boundary to ∂Ω, off the plane.
    let m = 2048usize;
    let mut best: Option<(f64, usize)> = None;
    for k in 0..m {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
        let x = domain.boundary_point(theta);
        if cap.frame.depth(&x) > -1e-6 {
            continue;
        }
        let q = reflect_point(&x, &plane);
        let gap = domain.radial_gap(&q);
        if best.map_or(true, |(g, _)| gap < g) {
            best = Some((gap, k));
        }
    }
    let Some((_, k_star)) = best else {
        rb.push(failed_check(id, anchors::HOPF, "no upper boundary samples found"));
        return;
    };
    let theta = 2.0 * std::f64::consts::PI * k_star as f64 / m as f64;
    let p = reflect_point(&domain.boundary_point(theta), &plane);
    let nu = reflect_vec(&domain.outward_normal(theta), &plane.e);

    let t_max = 0.6 * cap.depth_max;
    let t_min = 4.0 * cap.h;
    if t_max <= t_min {
        rb.push(failed_check(
            id,
            anchors::HOPF,
            format!("ladder collapsed: 4h = {t_min} exceeds cap depth scale {t_max}"),
        ));
        return;
    }
    let mut fitted = f64::INFINITY;
    let mut used = 0usize;
    for j in 0..12 {
        let t = t_min * (t_max / t_min).powf(j as f64 / 11.0);
        let x = vec![p[0] - t * nu[0], p[1] - t * nu[1]];
        if !in_cap(cap, domain, &x) {
            continue;
        }
        let depth = cap.frame.depth(&x);
        let q = cap.v.eval(&x) / (t.powf(params.s) * depth);
        fitted = fitted.min(q);
        used += 1;
    }
    if used < 4 || !fitted.is_finite() {
        rb.push(failed_check(
            id,
            anchors::HOPF,
            format!("only {used} usable ladder points"),
        ));
        return;
    }
    fits.hopf = Some(fitted);
    push_fit_check(
        rb,
        id,
        anchors::HOPF,
        json!({
            "contact_point": p,
            "normal": nu,
            "t_range": [t_min, t_max],
            "ladder_points": used,
            "k_norm": cap.k_norm,
        }),
        fitted,
    );
}

/// (d) The corner quotient at a crossing of ∂Ω with the critical plane:
/// `v(z + tη)/t^{1+s}` along the diagonal `η = (into the lower side) +
/// (inward along the plane)` must stay positive on `(4h, ρ/2)`.
fn corner_check(
    rb: &mut ReportBuilder,
    cfg: &SuiteConfig,
    domain: &StarDomain,
    params: &FracParams,
    cap: &CapData,
    tag: &str,
    fits: &mut Fits,
) {
    let _ = cfg;
    let id = format!("corner_quotient{tag}");
    // Plane ∩ ∂Ω crossings via sign changes of the offset along the boundary.
    let m = 4096usize;
    let offset = |theta: f64| -cap.frame.depth(&domain.boundary_point(theta));
    let mut crossings = Vec::new();
    let mut prev = offset(0.0);
    for k in 1..=m {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
        let cur = offset(theta);
        if prev.signum() != cur.signum() && prev != 0.0 {
            let mut lo = 2.0 * std::f64::consts::PI * (k - 1) as f64 / m as f64;
            let mut hi = theta;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if offset(mid).signum() == prev.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            crossings.push(0.5 * (lo + hi));
        }
        prev = cur;
    }
    let Some(&theta_z) = crossings
        .iter()
        .max_by(|a, b| {
            let ta = cap.frame.transverse(&domain.boundary_point(**a));
            let tb = cap.frame.transverse(&domain.boundary_point(**b));
            ta.total_cmp(&tb)
        })
    else {
        rb.push(failed_check(id, anchors::CORNER, "no plane/boundary crossing found"));
        return;
    };
    let z = domain.boundary_point(theta_z);
    let nu = domain.outward_normal(theta_z);
    // Split ν into its plane-normal and in-plane components; the marching
    // direction combines unit steps into the lower side and inward along
    // the plane.
    let nu_dot_e = nu[0] * cap.frame.e[0] + nu[1] * cap.frame.e[1];
    let mut w = [
        nu[0] - nu_dot_e * cap.frame.e[0],
        nu[1] - nu_dot_e * cap.frame.e[1],
    ];
    let w_norm = (w[0] * w[0] + w[1] * w[1]).sqrt();
    if w_norm > 1e-9 {
        w = [w[0] / w_norm, w[1] / w_norm];
    } else {
        w = [nu[0], nu[1]];
    }
    let eta = [
        -cap.frame.e[0] - w[0],
        -cap.frame.e[1] - w[1],
    ];

    let t_max = 0.45 * cap.depth_max;
    let t_min = 4.0 * cap.h;
    if t_max <= t_min {
        rb.push(failed_check(
            id,
            anchors::CORNER,
            format!("ladder collapsed: 4h = {t_min} exceeds corner scale {t_max}"),
        ));
        return;
    }
    let mut fitted = f64::INFINITY;
    let mut used = 0usize;
    for j in 0..12 {
        let t = t_min * (t_max / t_min).powf(j as f64 / 11.0);
        let x = vec![z[0] + t * eta[0], z[1] + t * eta[1]];
        if !in_cap(cap, domain, &x) {
            continue;
        }
        let q = cap.v.eval(&x) / t.powf(1.0 + params.s);
        fitted = fitted.min(q);
        used += 1;
    }
    if used < 4 || !fitted.is_finite() {
        rb.push(failed_check(
            id,
            anchors::CORNER,
            format!("only {used} usable ladder points"),
        ));
        return;
    }
    fits.corner = Some(fitted);
    push_fit_check(
        rb,
        id,
        anchors::CORNER,
        json!({
            "corner": z,
            "eta": eta,
            "t_range": [t_min, t_max],
            "ladder_points": used,
            "k_norm": cap.k_norm,
        }),
        fitted,
    );
}

/// Relative movement of every fitted constant between consecutive
/// resolutions must stay under the drift tolerance.
fn drift_checks(
    rb: &mut ReportBuilder,
    cfg: &SuiteConfig,
    s: f64,
    dom_idx: usize,
    fits: &[(usize, Fits)],
) {
    if fits.len() < 2 {
        return;
    }
    let tol = cfg.tol("drift", 0.2);
    let mut worst = 0.0_f64;
    let mut compared = Vec::new();
    for pair in fits.windows(2) {
        let (_, coarse) = &pair[0];
        let (_, fine) = &pair[1];
        let mut fold = |name: &str, a: Option<f64>, b: Option<f64>| {
            if let (Some(a), Some(b)) = (a, b) {
                if a.abs() > 0.0 {
                    let drift = (b - a).abs() / a.abs();
                    worst = worst.max(drift);
                    compared.push(format!("{name}: {drift:.3}"));
                }
            }
        };
        for case in 0..3 {
            fold(
                ["case_i", "case_ii", "case_iii"][case],
                coarse.lower[case],
                fine.lower[case],
            );
        }
        fold("hopf", coarse.hopf, fine.hopf);
        fold("corner", coarse.corner, fine.corner);
    }
    if compared.is_empty() {
        return;
    }
    rb.push(check(
        format!("fitted_constant_drift[s={s},domain={dom_idx}]"),
        anchors::DRIFT,
        json!({ "drifts": compared }),
        worst,
        tol,
        tol - worst,
    ));
}
