//! Runnable verification suites.
//!
//! Each suite wires the closed forms, the quadrature oracle, the geometry
//! layer and the solver into a list of named checks and returns a [`Report`].
//! Reports are fully determined by their [`SuiteConfig`]: there is no hidden
//! state, no random sampling, and parallel sections merge in a fixed order,
//! so two runs with the same config produce byte-identical canonical JSON.
//!
//! Every check carries a short mathematical `anchor` string naming the
//! identity or inequality it probes, a `measured` value, a `target`, and a
//! signed `margin` with the convention `pass ⇔ margin ≥ 0`.

mod barrier;
mod identity;
mod maxprinciple;
mod stability;

pub use barrier::run_barrier_suite;
pub use identity::run_identity_suite;
pub use maxprinciple::run_maxprinciple_suite;
pub use stability::run_stability_sweep;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::geometry::StarDomain;

/// A `(dimension, order)` pair a suite iterates over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamPair {
    pub n: u32,
    pub s: f64,
}

impl ParamPair {
    pub fn new(n: u32, s: f64) -> Self {
        Self { n, s }
    }
}

/// Everything a suite run depends on.
///
/// * `params` — the `(n, s)` grid;
/// * `domains` — explicit domains for suites that solve on them;
/// * `resolutions` — grid nodes across the bounding box, one run per entry;
/// * `offsets` — suite-specific scalar family: ball-center ratios `a₁/ρ` for
///   the barrier suite, shape deviations `ε` for the stability sweep;
/// * `direction` — the moving-planes direction `e` (normalized on use);
/// * `tolerances` — optional per-check overrides keyed by check family;
///   every tolerance, explicit or default, is multiplied by `tol_scale`;
/// * `output_dir` — where report artifacts go when a caller asks for them;
/// * `deterministic` — declarative flag: configs never introduce randomness,
///   and this field records that the run is meant to be reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub name: String,
    pub params: Vec<ParamPair>,
    #[serde(default)]
    pub domains: Vec<StarDomain>,
    #[serde(default)]
    pub resolutions: Vec<usize>,
    #[serde(default)]
    pub offsets: Vec<f64>,
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default = "one")]
    pub tol_scale: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub deterministic: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

/// Configuration error: the config cannot describe a meaningful run.
#[derive(Debug, thiserror::Error)]
#[error("invalid suite config: {what}")]
pub struct ConfigError {
    pub what: String,
}

pub(crate) fn cfg_err(what: impl Into<String>) -> ConfigError {
    ConfigError { what: what.into() }
}

impl SuiteConfig {
    fn base(name: &str) -> Self {
        Self {
            name: name.to_string(),
            params: Vec::new(),
            domains: Vec::new(),
            resolutions: Vec::new(),
            offsets: Vec::new(),
            direction: None,
            tolerances: BTreeMap::new(),
            tol_scale: 1.0,
            output_dir: None,
            deterministic: true,
        }
    }

    /// Canonical closed-form identity suite: `n ∈ {1,2,3} × s ∈ {1/4, 1/2, 3/4}`.
    /// Quadrature-oracle checks run only for `n ≤ 2`; the sign sweep and the
    /// constants checks cover all nine pairs.
    pub fn identity_default() -> Self {
        let mut cfg = Self::base("identities");
        for n in 1..=3u32 {
            for &s in &[0.25, 0.5, 0.75] {
                cfg.params.push(ParamPair::new(n, s));
            }
        }
        cfg
    }

    /// Canonical two-ball barrier suite: `n ∈ {1,2} × s ∈ {1/4, 1/2, 3/4}`,
    /// center ratios `a₁/ρ ∈ {0.1, 0.25, 0.45}` at `ρ = 1`.
    pub fn barrier_default() -> Self {
        let mut cfg = Self::base("barrier");
        for n in 1..=2u32 {
            for &s in &[0.25, 0.5, 0.75] {
                cfg.params.push(ParamPair::new(n, s));
            }
        }
        cfg.offsets = vec![0.1, 0.25, 0.45];
        cfg
    }

    /// Canonical moving-planes suite: the x₁-asymmetric perturbed disc
    /// `r(θ) = 1 + 0.1·cos 3θ`, direction `e₁`, `s = 1/2`, two resolutions
    /// so refinement drift of the fitted constants can be reported.
    pub fn maxprinciple_default() -> Self {
        let mut cfg = Self::base("maxprinciple");
        cfg.params = vec![ParamPair::new(2, 0.5)];
        let domain = StarDomain::polar(vec![0.0, 0.0], 1.0, vec![0.0, 0.0, 0.1], vec![])
            .expect("canonical perturbed disc is valid");
        cfg.domains = vec![domain];
        cfg.resolutions = vec![48, 96];
        cfg.direction = Some(vec![1.0, 0.0]);
        cfg
    }

    /// Canonical stability sweep: ellipses with semi-axes `(1+ε, 1)` for
    /// `ε ∈ {0, 0.005, 0.01, 0.02, 0.04, 0.08}`, diagonal direction, three
    /// orders `s`, one resolution.
    pub fn stability_default() -> Self {
        let mut cfg = Self::base("stability");
        for &s in &[0.25, 0.5, 0.75] {
            cfg.params.push(ParamPair::new(2, s));
        }
        cfg.offsets = vec![0.0, 0.005, 0.01, 0.02, 0.04, 0.08];
        cfg.resolutions = vec![64];
        cfg.direction = Some(vec![1.0, 1.0]);
        cfg
    }

    /// Structural validation shared by all suites.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.tol_scale > 0.0) || !self.tol_scale.is_finite() {
            return Err(cfg_err(format!(
                "tol_scale must be a positive finite number, got {}",
                self.tol_scale
            )));
        }
        for (key, &v) in &self.tolerances {
            if !(v > 0.0) || !v.is_finite() {
                return Err(cfg_err(format!("tolerance '{key}' must be positive, got {v}")));
            }
        }
        for p in &self.params {
            if p.n == 0 || !(p.s > 0.0 && p.s < 1.0) {
                return Err(cfg_err(format!(
                    "param pair n={}, s={} out of range (n ≥ 1, 0 < s < 1)",
                    p.n, p.s
                )));
            }
        }
        for &r in &self.resolutions {
            if r < 8 {
                return Err(cfg_err(format!("resolution {r} too small to mean anything")));
            }
        }
        Ok(())
    }

    /// Effective tolerance for a check family: the override if present,
    /// otherwise `default`, both scaled by `tol_scale`.
    pub fn tol(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default) * self.tol_scale
    }
}

/// Deliberate-fault hooks.  All-default means an honest run; tests flip one
/// field at a time to demonstrate that each suite can actually fail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultInjection {
    /// Multiplies the torsion normalization constant fed to the interior
    /// identity check (identity suite).
    pub gamma_scale: f64,
    /// Added to the closed-form barrier value before the annulus inequality
    /// check (barrier suite).
    pub barrier_shift: f64,
    /// Subtracted from the antisymmetric field before the cap positivity
    /// check (moving-planes suite).
    pub cap_depression: f64,
    /// Subtracted from the fitted log–log slope (stability sweep).
    pub slope_shift: f64,
}

impl Default for FaultInjection {
    fn default() -> Self {
        Self {
            gamma_scale: 1.0,
            barrier_shift: 0.0,
            cap_depression: 0.0,
            slope_shift: 0.0,
        }
    }
}

/// One verified statement: `pass ⇔ margin ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    /// Stable identifier, unique within a report.
    pub id: String,
    /// Short mathematical statement of what is being checked.
    pub anchor: String,
    /// The inputs that determined the measured value.
    pub inputs: Value,
    pub measured: f64,
    pub target: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Pass/fail counts over a report's checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

/// Run metadata; excluded from the canonical (comparable) serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Meta {
    /// Seconds since the Unix epoch at report creation.
    pub unix_time: u64,
    pub runtime_seconds: f64,
}

/// A rectangular numeric table attached to a report (the stability sweep's
/// per-ε quantities).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// The outcome of a suite run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub version: String,
    pub meta: Meta,
    pub checks: Vec<CheckRecord>,
    pub summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub table: Option<SweepTable>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.summary.failed == 0
    }

    /// Deterministic serialization: the full report minus the `meta` block.
    /// Two runs of the same config produce identical canonical JSON.
    pub fn canonical_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("report serializes");
        if let Value::Object(map) = &mut value {
            map.remove("meta");
        }
        serde_json::to_string_pretty(&value).expect("value serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Checks as CSV with quoted text fields.
    pub fn checks_csv(&self) -> String {
        fn quote(field: &str) -> String {
            format!("\"{}\"", field.replace('"', "\"\""))
        }
        let mut out = String::from("id,anchor,measured,target,margin,pass\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                quote(&c.id),
                quote(&c.anchor),
                c.measured,
                c.target,
                c.margin,
                c.pass
            ));
        }
        out
    }

    /// Write `<suite>.json` (always), `<suite>_checks.csv` when `csv` is
    /// requested, and `<suite>_table.csv` when a table is present.  Returns
    /// the written paths.
    pub fn write_artifacts(&self, dir: &Path, csv: bool) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let json_path = dir.join(format!("{}.json", self.suite));
        let mut f = std::fs::File::create(&json_path)?;
        f.write_all(self.to_json().as_bytes())?;
        f.write_all(b"\n")?;
        written.push(json_path);
        if csv {
            let path = dir.join(format!("{}_checks.csv", self.suite));
            std::fs::write(&path, self.checks_csv())?;
            written.push(path);
        }
        if let Some(table) = &self.table {
            let path = dir.join(format!("{}_table.csv", self.suite));
            std::fs::write(&path, table.to_csv())?;
            written.push(path);
        }
        Ok(written)
    }

    /// Parse a report back from its JSON form.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Accumulates checks during a run and stamps metadata at the end.
pub(crate) struct ReportBuilder {
    suite: String,
    started: Instant,
    checks: Vec<CheckRecord>,
    table: Option<SweepTable>,
}

impl ReportBuilder {
    pub fn new(suite: &str) -> Self {
        Self {
            suite: suite.to_string(),
            started: Instant::now(),
            checks: Vec::new(),
            table: None,
        }
    }

    pub fn push(&mut self, check: CheckRecord) {
        self.checks.push(check);
    }

    pub fn set_table(&mut self, table: SweepTable) {
        self.table = Some(table);
    }

    pub fn finish(self) -> Report {
        let passed = self.checks.iter().filter(|c| c.pass).count();
        let total = self.checks.len();
        let unix_time = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Report {
            suite: self.suite,
            version: env!("CARGO_PKG_VERSION").to_string(),
            meta: Meta {
                unix_time,
                runtime_seconds: self.started.elapsed().as_secs_f64(),
            },
            checks: self.checks,
            summary: Summary {
                total,
                passed,
                failed: total - passed,
            },
            table: self.table,
        }
    }
}

/// Build a check; `pass` is derived from the sign of `margin`.  Non-finite
/// margins (from degenerate data) are clamped to a large negative failure.
pub(crate) fn check(
    id: impl Into<String>,
    anchor: &str,
    inputs: Value,
    measured: f64,
    target: f64,
    margin: f64,
) -> CheckRecord {
    let sane = |v: f64, fallback: f64| if v.is_finite() { v } else { fallback };
    let margin = sane(margin, -1e308);
    CheckRecord {
        id: id.into(),
        anchor: anchor.to_string(),
        inputs,
        measured: sane(measured, 0.0),
        target: sane(target, 0.0),
        margin,
        pass: margin >= 0.0,
    }
}

/// A failed check carrying an error message instead of a measurement, so a
/// broken sub-computation shows up as a red row rather than an abort.
pub(crate) fn failed_check(
    id: impl Into<String>,
    anchor: &str,
    error: impl std::fmt::Display,
) -> CheckRecord {
    CheckRecord {
        id: id.into(),
        anchor: anchor.to_string(),
        inputs: serde_json::json!({ "error": error.to_string() }),
        measured: 0.0,
        target: 0.0,
        margin: -1.0,
        pass: false,
    }
}

/// Least-squares slope of `y` against `x`.
pub(crate) fn lsq_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    sxy / sxx
}

/// Mathematical anchor strings shared across suites.
pub mod anchors {
    pub const INTERIOR: &str = "(-Δ)^s ψ_B = 1 in B";
    pub const EXTERIOR: &str = "closed-form (-Δ)^s ψ_B vs quadrature oracle outside B";
    pub const SINGULAR: &str = "(-Δ)^s ψ_B(x) = -∞ on ∂B";
    pub const SIGNS: &str = "f(τ) ⩽ 1 and g(τ) ⩽ 0";
    pub const HYP: &str = "₂F₁ transformation and Gauss-sum residuals";
    pub const CONSTANTS: &str = "γ_{1,1/2} = 1, a_{1,1/2} = 1/2, κ_{1,1/2} = 8/(3π)";
    pub const LIFT: &str = "(-Δ)^s [p ψ_B] via the harmonic lift";
    pub const HARMONIC: &str = "Δp = 0 for the lift polynomials";
    pub const EXPONENT: &str = "R ∝ κ_{n,s}^{1/(2s)} · Lip^{-1/(2s)}";
    pub const MASS: &str = "kernel mass partition Σ_m 2W_m + tail = ∫_{Q₀^c} |z|^{-n-2s}";
    pub const BARRIER: &str = "(-Δ)^s φ(x) ⩽ ((n+2s)/n) x₁ on B ∖ closure(B⋆)";
    pub const OVERLAP: &str = "(-Δ)^s φ = 2(n+2s) x₁ / n on B ∩ B⋆";
    pub const AXIS: &str = "x₁ → 0⁺: both sides of the barrier bound vanish linearly";
    pub const POSITIVITY: &str = "v_λ ≥ 0 in Ω'_λ (up to the discretization floor ε_h)";
    pub const LOWER: &str = "v(x) ≥ C ‖δ_{∂H} v‖_{L¹(K)} δ_{∂H}(x) (ρ² - |x-a|²)₊^s";
    pub const HOPF: &str = "v(p - tν) / (t^s δ_{∂H}(p - tν)) ≥ C̄ ‖δ_{∂H} v‖_{L¹(K)}";
    pub const CORNER: &str = "v(tη)/t^{1+s} ≥ C̄ ‖δ_{∂H} v‖_{L¹(K)} for 0 < t < ρ/2";
    pub const DRIFT: &str = "fitted constants move < 20% under h → h/2";
    pub const STABILITY: &str = "ρ(Ω) ⩽ C [∂_ν^s u]_{∂Ω}^{1/(s+2)}";
    pub const CAP: &str = "∫_K δ_{π_λ}(x) u(x) dx";
    pub const SYMDIFF: &str = "|Ω △ Ω'| control";
    pub const VANISH: &str = "all deficit quantities vanish on the ball";
    pub const MONOTONE: &str = "deficit quantities decrease monotonically as ε → 0";
}
