//! End-to-end acceptance runs.
//!
//! Each test exercises one headline guarantee of the library at its shipped
//! default configuration and reports through the harness as a single
//! pass/fail line.  Canonical suite runs are shared across tests through
//! lazily initialized cells; every canonical suite is executed twice so the
//! determinism test can compare full reports without a third run.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use fraclap::quadrature::fields;
use fraclap::solver::{eigen_lambda1, frac_normal_derivative, solve_dirichlet};
use fraclap::specfun::annulus_factors;
use fraclap::suites::{
    run_barrier_suite, run_identity_suite, run_maxprinciple_suite, run_stability_sweep,
    CheckRecord, Report, SuiteConfig,
};
use fraclap::{Ball, FracParams, ReactionSpec, StarDomain};

/// A canonical suite run, its immediate re-run, and the wall time of the
/// first run alone.
struct Timed {
    first: Report,
    second: Report,
    elapsed: Duration,
}

fn timed(run: impl Fn() -> Report) -> Timed {
    let t0 = Instant::now();
    let first = run();
    let elapsed = t0.elapsed();
    let second = run();
    Timed {
        first,
        second,
        elapsed,
    }
}

fn identity_runs() -> &'static Timed {
    static CELL: OnceLock<Timed> = OnceLock::new();
    CELL.get_or_init(|| {
        timed(|| {
            run_identity_suite(&SuiteConfig::identity_default())
                .expect("canonical identity config is valid")
        })
    })
}

fn barrier_runs() -> &'static Timed {
    static CELL: OnceLock<Timed> = OnceLock::new();
    CELL.get_or_init(|| {
        timed(|| {
            run_barrier_suite(&SuiteConfig::barrier_default())
                .expect("canonical barrier config is valid")
        })
    })
}

fn maxprinciple_runs() -> &'static Timed {
    static CELL: OnceLock<Timed> = OnceLock::new();
    CELL.get_or_init(|| {
        timed(|| {
            run_maxprinciple_suite(&SuiteConfig::maxprinciple_default())
                .expect("canonical moving-planes config is valid")
        })
    })
}

fn stability_runs() -> &'static Timed {
    static CELL: OnceLock<Timed> = OnceLock::new();
    CELL.get_or_init(|| {
        timed(|| {
            run_stability_sweep(&SuiteConfig::stability_default())
                .expect("canonical stability config is valid")
        })
    })
}

fn checks_with_prefix<'r>(report: &'r Report, prefix: &str) -> Vec<&'r CheckRecord> {
    report
        .checks
        .iter()
        .filter(|c| c.id.starts_with(prefix))
        .collect()
}

fn assert_all_pass(checks: &[&CheckRecord]) {
    for c in checks {
        assert!(
            c.pass,
            "check {} failed: measured {:e} vs target {:e} (margin {:e})",
            c.id, c.measured, c.target, c.margin
        );
    }
}

/// The quadrature oracle applied to the ball torsion profile returns 1 at
/// twenty interior probe points for every shipped `(n, s)` pair, within
/// 1e-6 in one dimension and 1e-3 in two, and the whole canonical identity
/// suite finishes inside a minute.
#[test]
fn interior_torsion_identity_holds_at_probe_points() {
    let runs = identity_runs();
    let checks = checks_with_prefix(&runs.first, "interior_identity");
    assert_eq!(checks.len(), 6, "expected six interior identity checks");
    assert_all_pass(&checks);
    for c in &checks {
        assert_eq!(c.inputs["points"], 20, "twenty probe points per pair");
        let expected_tol = if c.id.contains("n=1") { 1e-6 } else { 1e-3 };
        assert!(
            (c.target - expected_tol).abs() <= 1e-15,
            "{}: tolerance drifted from {expected_tol:e} to {:e}",
            c.id,
            c.target
        );
    }
    assert!(
        runs.elapsed < Duration::from_secs(60),
        "canonical identity suite took {:?}",
        runs.elapsed
    );
}

/// Outside the ball the oracle agrees with the closed-form expression in
/// relative terms at ten exterior points per pair (1e-5 in one dimension,
/// 1e-3 in two), inside the same one-minute budget.
#[test]
fn exterior_closed_form_matches_the_oracle() {
    let runs = identity_runs();
    let checks = checks_with_prefix(&runs.first, "exterior_closed_form");
    assert_eq!(checks.len(), 6, "expected six exterior agreement checks");
    assert_all_pass(&checks);
    for c in &checks {
        assert_eq!(c.inputs["points"], 10, "ten exterior points per pair");
        let expected_tol = if c.id.contains("n=1") { 1e-5 } else { 1e-3 };
        assert!(
            (c.target - expected_tol).abs() <= 1e-15,
            "{}: tolerance drifted from {expected_tol:e} to {:e}",
            c.id,
            c.target
        );
    }
    assert!(
        runs.elapsed < Duration::from_secs(60),
        "canonical identity suite took {:?}",
        runs.elapsed
    );
}

/// Points closer than 1e-10 to the support sphere are declared divergent by
/// the oracle for every tested order.
#[test]
fn oracle_declares_divergence_on_the_support_sphere() {
    let runs = identity_runs();
    let checks = checks_with_prefix(&runs.first, "sphere_divergence");
    assert_eq!(checks.len(), 6, "expected six divergence checks");
    assert_all_pass(&checks);
    for c in &checks {
        assert_eq!(
            c.measured, 1.0,
            "{}: every probed offset must be declared divergent",
            c.id
        );
        let offsets = c.inputs["offsets"]
            .as_array()
            .expect("offsets recorded")
            .iter()
            .map(|v| v.as_f64().expect("numeric offset"))
            .collect::<Vec<_>>();
        assert!(!offsets.is_empty());
        for d in offsets {
            assert!(
                d.abs() <= 1e-10,
                "{}: probed offset {d:e} farther than 1e-10 from the sphere",
                c.id
            );
        }
    }
}

/// The annulus comparison factors stay on the correct side (`f ≤ 1`,
/// `g ≤ 0`) over ten thousand arguments for all nine `(n, s)` pairs, with
/// at most 1e-12 slack, in under five seconds.
#[test]
fn annulus_factor_signs_hold_across_the_sweep() {
    let t0 = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    let count = 10_000usize;
    for n in 1..=3u32 {
        for &s in &[0.25, 0.5, 0.75] {
            let params = FracParams::new(n, s).expect("valid parameters");
            for j in 0..count {
                let tau = j as f64 / count as f64;
                let af = annulus_factors(&params, tau).expect("factors evaluate");
                worst = worst.max(af.f - 1.0).max(af.g);
            }
        }
    }
    let elapsed = t0.elapsed();
    assert!(
        worst <= 1e-12,
        "sign violation of {worst:e} beyond the 1e-12 slack"
    );
    assert!(
        elapsed < Duration::from_secs(5),
        "sweep of 9 x 10^4 evaluations took {elapsed:?}"
    );

    // The shipped suite must agree with the direct sweep.
    let checks = checks_with_prefix(&identity_runs().first, "annulus_signs");
    assert_eq!(checks.len(), 9, "expected nine sign-sweep checks");
    assert_all_pass(&checks);
}

/// The two-ball barrier obeys its linear bound on more than a thousand
/// stratified samples per configuration with at most 1e-9 slack, collapses
/// to the exact linear form on the overlap region to 1e-12, and matches the
/// quadrature oracle at ten cross-check points.
#[test]
fn barrier_bound_holds_on_stratified_samples() {
    let runs = barrier_runs();
    assert!(
        runs.first.all_pass(),
        "barrier suite has failures: {:?}",
        runs.first.summary
    );

    let annulus = checks_with_prefix(&runs.first, "annulus_inequality");
    assert_eq!(annulus.len(), 18, "six pairs x three center ratios");
    for c in &annulus {
        let total = c.inputs["stratified_total"]
            .as_u64()
            .expect("sample count recorded");
        assert!(
            total >= 1_000,
            "{}: only {total} stratified samples",
            c.id
        );
        assert!((c.target - 1e-9).abs() <= 1e-24, "{}: slack drifted", c.id);
    }

    let overlap = checks_with_prefix(&runs.first, "overlap_identity");
    assert_eq!(overlap.len(), 18);
    for c in &overlap {
        assert!((c.target - 1e-12).abs() <= 1e-27, "{}: tolerance drifted", c.id);
    }

    let oracle = checks_with_prefix(&runs.first, "oracle_cross_check");
    assert_eq!(oracle.len(), 10, "ten oracle cross-check points");
}

/// The normalization constants take their exact special values at
/// `(n, s) = (1, 1/2)` and satisfy the dimension recursions across
/// `n = 1..6`, all to twelve digits.
#[test]
fn special_constants_and_recursions_are_exact() {
    let p = FracParams::new(1, 0.5).expect("valid parameters");
    assert!((p.gamma_ns - 1.0).abs() <= 1e-12, "gamma(1,1/2) = {}", p.gamma_ns);
    assert!((p.a_ns - 0.5).abs() <= 1e-12, "a(1,1/2) = {}", p.a_ns);
    assert!(
        (p.kappa_ns - 8.0 / (3.0 * PI)).abs() <= 1e-12,
        "kappa(1,1/2) = {}",
        p.kappa_ns
    );

    for &s in &[0.25, 0.5, 0.75] {
        for n in 1..=6u32 {
            let low = FracParams::new(n, s).expect("valid parameters");
            let high = FracParams::new(n + 2, s).expect("valid parameters");
            let nn = f64::from(n);
            let gamma_ratio = nn / (nn + 2.0 * s);
            let a_ratio = nn / (nn + 2.0 * s + 2.0);
            let gamma_res = (high.gamma_ns - gamma_ratio * low.gamma_ns).abs() / low.gamma_ns;
            let a_res = (high.a_ns - a_ratio * low.a_ns).abs() / low.a_ns;
            assert!(
                gamma_res <= 1e-12,
                "gamma recursion residual {gamma_res:e} at n={n}, s={s}"
            );
            assert!(a_res <= 1e-12, "a recursion residual {a_res:e} at n={n}, s={s}");
        }
    }

    let report = &identity_runs().first;
    assert_all_pass(&checks_with_prefix(report, "constants_special_values"));
    assert_all_pass(&checks_with_prefix(report, "constants_recursions"));
}

/// The discrete principal eigenvalue of the interval (-1, 1) at s = 1/2
/// clears the isoperimetric floor 4/(3*pi) at three refinement levels inside
/// thirty seconds.
#[test]
fn interval_eigenvalue_clears_the_isoperimetric_floor() {
    let t0 = Instant::now();
    let domain = StarDomain::interval(-1.0, 1.0).expect("valid interval");
    let params = FracParams::new(1, 0.5).expect("valid parameters");
    let floor = 4.0 / (3.0 * PI);
    for n in [256usize, 512, 1024] {
        let lambda = eigen_lambda1(&domain, &params, n).expect("eigenvalue converges");
        assert!(
            lambda > floor,
            "lambda1 = {lambda} at N = {n} does not clear the floor {floor}"
        );
    }
    let elapsed = t0.elapsed();
    assert!(
        elapsed < Duration::from_secs(30),
        "three eigenvalue solves took {elapsed:?}"
    );
}

/// The one-dimensional torsion solve converges monotonically to the closed
/// form under dyadic refinement, is within 2e-2 at N = 512, and its
/// boundary flux recovers sqrt(2) at both endpoints within 2e-2.
#[test]
fn torsion_solver_converges_and_recovers_the_flux() {
    let domain = StarDomain::interval(-1.0, 1.0).expect("valid interval");
    let params = FracParams::new(1, 0.5).expect("valid parameters");
    let ball = Ball::new(vec![0.0], 1.0).expect("unit ball");
    let exact = fields::torsion_field(&ball, &params).expect("torsion profile");

    let mut sup_errors = Vec::new();
    let mut finest = None;
    for n in [64usize, 128, 256, 512] {
        let u = solve_dirichlet(&domain, &ReactionSpec::constant(1.0), &params, n)
            .expect("solve succeeds");
        let sup = u
            .masked_indices()
            .iter()
            .map(|&i| (u.values[i] - exact.eval(&u.node_coord(i))).abs())
            .fold(0.0_f64, f64::max);
        sup_errors.push(sup);
        finest = Some(u);
    }
    for w in sup_errors.windows(2) {
        assert!(
            w[1] < w[0],
            "sup error went from {:e} to {:e} under refinement",
            w[0],
            w[1]
        );
    }
    let last = *sup_errors.last().expect("nonempty");
    assert!(last <= 2e-2, "sup error {last:e} at N = 512 exceeds 2e-2");

    let trace = frac_normal_derivative(&finest.expect("solved"), 2).expect("trace extraction");
    assert_eq!(trace.values.len(), 2, "both interval endpoints traced");
    for (v, p) in trace.values.iter().zip(&trace.points) {
        assert!(
            (v - 2.0_f64.sqrt()).abs() <= 2e-2,
            "boundary flux {v} at {p:?} misses sqrt(2) by more than 2e-2"
        );
    }
}

/// On the eccentric ellipse with a generic reflection direction, the
/// antisymmetric difference stays above the discretization floor over the
/// whole reflected cap, and the floor itself halves under one grid
/// refinement.  The axis-aligned direction is kept as a symmetric control:
/// its critical cap carries no mass and every check reports vacuously green.
#[test]
fn reflected_cap_stays_nonnegative_on_the_ellipse() {
    let mut cfg = SuiteConfig::maxprinciple_default();
    cfg.domains = vec![StarDomain::ellipse(vec![0.0, 0.0], [1.1, 1.0]).expect("valid ellipse")];
    cfg.direction = Some(vec![1.0, 1.0]);
    let report = run_maxprinciple_suite(&cfg).expect("ellipse run completes");

    let caps = checks_with_prefix(&report, "cap_positivity");
    assert_eq!(caps.len(), 2, "one cap positivity check per resolution");
    assert_all_pass(&caps);
    let eps: Vec<f64> = caps
        .iter()
        .map(|c| c.inputs["eps_h"].as_f64().expect("floor recorded"))
        .collect();
    let ratio = eps[1] / eps[0];
    assert!(
        (0.45..=0.56).contains(&ratio),
        "floor ratio {ratio} after one refinement is not close to 1/2 (floors {eps:?})"
    );

    let mut control = cfg;
    control.direction = Some(vec![1.0, 0.0]);
    let symmetric = run_maxprinciple_suite(&control).expect("control run completes");
    assert!(
        symmetric.all_pass(),
        "symmetric control has failures: {:?}",
        symmetric.summary
    );
    let control_caps = checks_with_prefix(&symmetric, "cap_positivity");
    assert_eq!(control_caps.len(), 2);
    for c in control_caps {
        assert!(
            c.measured.abs() <= 1e-12,
            "{}: symmetric direction should zero the antisymmetric difference, got {:e}",
            c.id,
            c.measured
        );
    }
}

/// Across the shipped ellipse family, all four deficit quantities vanish at
/// zero eccentricity, decrease monotonically toward it, and the log-log
/// slope of deficit against boundary seminorm clears 1/(s+2) - 0.05 for
/// every order; the full sweep stays under ten minutes.
#[test]
fn stability_sweep_confirms_the_deficit_seminorm_relation() {
    let runs = stability_runs();
    assert!(
        runs.first.all_pass(),
        "stability sweep has failures: {:?}",
        runs.first.summary
    );
    assert!(
        runs.elapsed < Duration::from_secs(600),
        "stability sweep took {:?}",
        runs.elapsed
    );

    let slopes = checks_with_prefix(&runs.first, "stability_slope");
    assert_eq!(slopes.len(), 3, "one slope check per order");
    for c in &slopes {
        let s: f64 = c.id
            .split("s=")
            .nth(1)
            .and_then(|t| t.trim_end_matches(']').parse().ok())
            .expect("order encoded in the check id");
        let threshold = 1.0 / (s + 2.0) - 0.05;
        assert!(
            (c.target - threshold).abs() <= 1e-12,
            "{}: slope threshold drifted from {threshold}",
            c.id
        );
        assert!(c.measured >= threshold, "{}: slope {} too shallow", c.id, c.measured);
    }

    for family in ["vanish_rho", "vanish_seminorm", "vanish_cap", "vanish_symdiff"] {
        assert_eq!(
            checks_with_prefix(&runs.first, family).len(),
            3,
            "{family}: one vanishing check per order"
        );
    }
    for family in [
        "monotone_rho",
        "monotone_seminorm",
        "monotone_cap",
        "monotone_symdiff",
    ] {
        assert_eq!(
            checks_with_prefix(&runs.first, family).len(),
            3,
            "{family}: one monotonicity check per order"
        );
    }

    let table = runs.first.table.as_ref().expect("sweep table present");
    assert_eq!(table.rows.len(), 18, "three orders x six eccentricities");
}

/// Re-running every canonical suite produces byte-identical reports once
/// the timing metadata is stripped.
#[test]
fn canonical_reports_are_deterministic() {
    for (name, runs) in [
        ("identities", identity_runs()),
        ("barrier", barrier_runs()),
        ("maxprinciple", maxprinciple_runs()),
        ("stability", stability_runs()),
    ] {
        assert!(
            runs.first.all_pass(),
            "{name}: canonical run has failures: {:?}",
            runs.first.summary
        );
        assert_eq!(
            runs.first.canonical_json(),
            runs.second.canonical_json(),
            "{name}: canonical reports differ between consecutive runs"
        );
    }
}
