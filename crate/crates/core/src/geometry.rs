//! Star-shaped domains in one and two dimensions and the geometric
//! functionals used by the stability experiments: ball deficit ρ(Ω),
//! diameter, interior-sphere radius, the barrier radius R, critical planes
//! of the moving-planes method, reflections, and symmetric-difference
//! measures.
//!
//! Domains are described radially about a center (an interval in 1D), with
//! conservative regularity metadata (bounds on r, r′, r″) attached at
//! construction.  All searches are deterministic: fixed sample grids, coarse
//! scans, and compass pattern refinement.

use serde::{Deserialize, Serialize};

/// Errors from geometric routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    /// Sampled boundary data violates the domain's regularity metadata.
    #[error("degenerate curvature data: {what}")]
    DegenerateCurvature { what: String },
    /// The containment predicate cannot be resolved at sampling resolution.
    #[error("containment ambiguous near mu = {mu}: margin gap {gap:.3e}")]
    AmbiguousContainment { mu: f64, gap: f64 },
    /// Bad arguments.
    #[error("domain error: {what}")]
    Domain { what: String },
}

fn err(what: impl Into<String>) -> GeometryError {
    GeometryError::Domain { what: what.into() }
}

/// Shape kinds with their defining parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "lowercase")]
pub enum DomainShape {
    /// The open interval (a, b) on the line.
    Interval { a: f64, b: f64 },
    /// A disc of the given radius about `center`.
    Ball { center: Vec<f64>, radius: f64 },
    /// An axis-aligned ellipse with semi-axes `semi_axes` about `center`.
    Ellipse { center: Vec<f64>, semi_axes: [f64; 2] },
    /// A trigonometric-polynomial radius about `center`:
    /// `r(θ) = base + Σ_k cosine[k-1]·cos(kθ) + sine[k-1]·sin(kθ)`.
    Polar {
        center: Vec<f64>,
        base: f64,
        cosine: Vec<f64>,
        sine: Vec<f64>,
    },
}

/// Conservative bounds on the radial map and its first two derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regularity {
    pub r_min: f64,
    pub r_max: f64,
    pub dr_max: f64,
    pub ddr_max: f64,
}

/// A bounded star-shaped C² domain (an interval in 1D).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarDomain {
    pub dimension: u32,
    #[serde(flatten)]
    pub shape: DomainShape,
    pub center_hint: Vec<f64>,
    pub regularity: Regularity,
}

/// A hyperplane `{x : x·e = mu}` with unit normal `e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub e: Vec<f64>,
    pub mu: f64,
}

impl Hyperplane {
    /// Normalizes `e`; errors on the zero vector or unsupported dimension.
    pub fn new(e: Vec<f64>, mu: f64) -> Result<Self, GeometryError> {
        if e.is_empty() || e.len() > 2 {
            return Err(err(format!("hyperplane normal must have dim 1 or 2, got {}", e.len())));
        }
        let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(err("hyperplane normal must be nonzero and finite"));
        }
        Ok(Self {
            e: e.iter().map(|v| v / norm).collect(),
            mu,
        })
    }

    pub fn signed_offset(&self, x: &[f64]) -> f64 {
        dot(x, &self.e) - self.mu
    }
}

/// Reflection `x ↦ x − 2(x·e − μ)e` across the plane.
pub fn reflect_point(x: &[f64], plane: &Hyperplane) -> Vec<f64> {
    let t = plane.signed_offset(x);
    x.iter().zip(&plane.e).map(|(xi, ei)| xi - 2.0 * t * ei).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Which side of the moving-planes contact dichotomy was detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactCase {
    /// The reflected cap touches the boundary at a point off the plane.
    Tangency,
    /// The binding contact sits on the critical plane itself.
    Orthogonality,
}

/// Output of the critical-plane search for a direction `e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPlaneResult {
    pub e: Vec<f64>,
    /// The critical offset λ: reflected caps fit for μ > λ and not below.
    pub lambda: f64,
    pub contact_case: ContactCase,
    pub contact_point: Vec<f64>,
    /// `sup { x·e : x ∈ Ω }`.
    pub big_lambda: f64,
}

impl CriticalPlaneResult {
    pub fn plane(&self) -> Hyperplane {
        Hyperplane {
            e: self.e.clone(),
            mu: self.lambda,
        }
    }
}

/// Settings for the ball-deficit center search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterSearch {
    /// Coarse grid points per axis over the bounding box.
    pub grid: usize,
    /// Pattern-search step floor, relative to the diameter.
    pub refine_tol: f64,
}

impl Default for CenterSearch {
    fn default() -> Self {
        Self {
            grid: 9,
            refine_tol: 1e-9,
        }
    }
}

/// Ball deficit about the best searched center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoDeficit {
    /// `rho_e − rho_i` at the minimizing center.
    pub rho: f64,
    pub center: Vec<f64>,
    pub rho_i: f64,
    pub rho_e: f64,
}

const BOUNDARY_SAMPLES: usize = 4096;

impl StarDomain {
    pub fn interval(a: f64, b: f64) -> Result<Self, GeometryError> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(err(format!("interval needs a < b finite, got ({a}, {b})")));
        }
        let half = 0.5 * (b - a);
        Ok(Self {
            dimension: 1,
            shape: DomainShape::Interval { a, b },
            center_hint: vec![0.5 * (a + b)],
            regularity: Regularity {
                r_min: half,
                r_max: half,
                dr_max: 0.0,
                ddr_max: 0.0,
            },
        })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self, GeometryError> {
        if center.len() != 2 {
            return Err(err("ball domains are two-dimensional; use interval for 1D"));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(err(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self {
            dimension: 2,
            center_hint: center.clone(),
            shape: DomainShape::Ball { center, radius },
            regularity: Regularity {
                r_min: radius,
                r_max: radius,
                dr_max: 0.0,
                ddr_max: 0.0,
            },
        })
    }

    pub fn ellipse(center: Vec<f64>, semi_axes: [f64; 2]) -> Result<Self, GeometryError> {
        if center.len() != 2 {
            return Err(err("ellipse center must be two-dimensional"));
        }
        let [a, b] = semi_axes;
        if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(err(format!("ellipse semi-axes must be positive, got {semi_axes:?}")));
        }
        let (hi, lo) = (a.max(b), a.min(b));
        let d = (hi * hi - lo * lo).abs();
        Ok(Self {
            dimension: 2,
            center_hint: center.clone(),
            shape: DomainShape::Ellipse { center, semi_axes },
            regularity: Regularity {
                r_min: lo,
                r_max: hi,
                dr_max: hi * d / (2.0 * lo * lo) + 1e-15,
                ddr_max: 0.75 * hi * d * d / lo.powi(4) + hi * d / (lo * lo) + 1e-15,
            },
        })
    }

    pub fn polar(
        center: Vec<f64>,
        base: f64,
        cosine: Vec<f64>,
        sine: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        if center.len() != 2 {
            return Err(err("polar-domain center must be two-dimensional"));
        }
        let l1: f64 = cosine.iter().chain(&sine).map(|c| c.abs()).sum();
        if !(base - l1 > 0.0) {
            return Err(err(format!(
                "polar radius may vanish: base {base} minus coefficient mass {l1} is not positive"
            )));
        }
        let mut dr = 0.0;
        let mut ddr = 0.0;
        for (k, c) in cosine.iter().enumerate() {
            let kf = (k + 1) as f64;
            dr += kf * c.abs();
            ddr += kf * kf * c.abs();
        }
        for (k, c) in sine.iter().enumerate() {
            let kf = (k + 1) as f64;
            dr += kf * c.abs();
            ddr += kf * kf * c.abs();
        }
        Ok(Self {
            dimension: 2,
            center_hint: center.clone(),
            shape: DomainShape::Polar {
                center,
                base,
                cosine,
                sine,
            },
            regularity: Regularity {
                r_min: base - l1,
                r_max: base + l1,
                dr_max: dr,
                ddr_max: ddr,
            },
        })
    }

    pub fn from_json(text: &str) -> Result<Self, GeometryError> {
        serde_json::from_str(text).map_err(|e| err(format!("domain JSON parse: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("domain serialization cannot fail")
    }

    /// The star center of the radial description.
    pub fn center(&self) -> Vec<f64> {
        match &self.shape {
            DomainShape::Interval { a, b } => vec![0.5 * (a + b)],
            DomainShape::Ball { center, .. }
            | DomainShape::Ellipse { center, .. }
            | DomainShape::Polar { center, .. } => center.clone(),
        }
    }

    /// Translates the whole domain by `tau`.
    pub fn translate(&self, tau: &[f64]) -> Result<Self, GeometryError> {
        if tau.len() != self.dimension as usize {
            return Err(err("translation dimension mismatch"));
        }
        let mut out = self.clone();
        match &mut out.shape {
            DomainShape::Interval { a, b } => {
                *a += tau[0];
                *b += tau[0];
            }
            DomainShape::Ball { center, .. }
            | DomainShape::Ellipse { center, .. }
            | DomainShape::Polar { center, .. } => {
                for (c, t) in center.iter_mut().zip(tau) {
                    *c += t;
                }
            }
        }
        for (c, t) in out.center_hint.iter_mut().zip(tau) {
            *c += t;
        }
        Ok(out)
    }

    /// Dilates the domain by `factor` about its own center.
    pub fn scale(&self, factor: f64) -> Result<Self, GeometryError> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(err(format!("scale factor must be positive, got {factor}")));
        }
        match &self.shape {
            DomainShape::Interval { a, b } => {
                let c = 0.5 * (a + b);
                Self::interval(c + factor * (a - c), c + factor * (b - c))
            }
            DomainShape::Ball { center, radius } => Self::ball(center.clone(), factor * radius),
            DomainShape::Ellipse { center, semi_axes } => Self::ellipse(
                center.clone(),
                [factor * semi_axes[0], factor * semi_axes[1]],
            ),
            DomainShape::Polar {
                center,
                base,
                cosine,
                sine,
            } => Self::polar(
                center.clone(),
                factor * base,
                cosine.iter().map(|c| factor * c).collect(),
                sine.iter().map(|c| factor * c).collect(),
            ),
        }
    }

    /// Radial map `(r, r′, r″)` at angle θ about the star center (2D only).
    pub fn radial(&self, theta: f64) -> (f64, f64, f64) {
        match &self.shape {
            DomainShape::Interval { .. } => {
                unreachable!("radial map queried on a 1D domain")
            }
            DomainShape::Ball { radius, .. } => (*radius, 0.0, 0.0),
            DomainShape::Ellipse { semi_axes, .. } => {
                let [a, b] = *semi_axes;
                let (sin, cos) = theta.sin_cos();
                let d = b * b * cos * cos + a * a * sin * sin;
                let dp = (a * a - b * b) * (2.0 * theta).sin();
                let dpp = 2.0 * (a * a - b * b) * (2.0 * theta).cos();
                let r = a * b / d.sqrt();
                let dr = -0.5 * a * b * dp / d.powf(1.5);
                let ddr = 0.75 * a * b * dp * dp / d.powf(2.5) - 0.5 * a * b * dpp / d.powf(1.5);
                (r, dr, ddr)
            }
            DomainShape::Polar {
                base, cosine, sine, ..
            } => {
                let mut r = *base;
                let mut dr = 0.0;
                let mut ddr = 0.0;
                for (k, c) in cosine.iter().enumerate() {
                    let kf = (k + 1) as f64;
                    let (s, co) = (kf * theta).sin_cos();
                    r += c * co;
                    dr -= c * kf * s;
                    ddr -= c * kf * kf * co;
                }
                for (k, c) in sine.iter().enumerate() {
                    let kf = (k + 1) as f64;
                    let (s, co) = (kf * theta).sin_cos();
                    r += c * s;
                    dr += c * kf * co;
                    ddr -= c * kf * kf * s;
                }
                (r, dr, ddr)
            }
        }
    }

    /// Signed curvature of the boundary at angle θ (2D only).
    pub fn curvature(&self, theta: f64) -> f64 {
        let (r, dr, ddr) = self.radial(theta);
        (r * r + 2.0 * dr * dr - r * ddr) / (r * r + dr * dr).powf(1.5)
    }

    /// Boundary point at angle θ (2D only).
    pub fn boundary_point(&self, theta: f64) -> Vec<f64> {
        let c = self.center();
        let (r, _, _) = self.radial(theta);
        vec![c[0] + r * theta.cos(), c[1] + r * theta.sin()]
    }

    /// Unit outward normal at angle θ (2D only).
    pub fn outward_normal(&self, theta: f64) -> Vec<f64> {
        let (r, dr, _) = self.radial(theta);
        let (sin, cos) = theta.sin_cos();
        // Rotate the tangent r′u + r u⊥ by −90°.
        let nx = dr * sin + r * cos;
        let ny = -dr * cos + r * sin;
        let norm = (nx * nx + ny * ny).sqrt();
        vec![nx / norm, ny / norm]
    }

    /// Deterministic boundary sample cloud (endpoints in 1D).
    pub fn boundary_samples(&self, m: usize) -> Vec<Vec<f64>> {
        match &self.shape {
            DomainShape::Interval { a, b } => vec![vec![*a], vec![*b]],
            _ => (0..m)
                .map(|j| self.boundary_point(2.0 * std::f64::consts::PI * j as f64 / m as f64))
                .collect(),
        }
    }

    /// Radial clearance of `x`: positive inside, negative outside, in length
    /// units (exact signed distance in 1D).
    pub fn radial_gap(&self, x: &[f64]) -> f64 {
        match &self.shape {
            DomainShape::Interval { a, b } => (x[0] - a).min(b - x[0]),
            _ => {
                let c = self.center();
                let (dx, dy) = (x[0] - c[0], x[1] - c[1]);
                let dist = (dx * dx + dy * dy).sqrt();
                let (r, _, _) = self.radial(dy.atan2(dx));
                r - dist
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.radial_gap(x) > 0.0
    }

    /// Lebesgue measure |Ω|.
    pub fn measure(&self) -> f64 {
        match &self.shape {
            DomainShape::Interval { a, b } => b - a,
            DomainShape::Ball { radius, .. } => std::f64::consts::PI * radius * radius,
            DomainShape::Ellipse { semi_axes, .. } => {
                std::f64::consts::PI * semi_axes[0] * semi_axes[1]
            }
            DomainShape::Polar { .. } => {
                // Periodic trapezoid of r²/2: exact for trigonometric
                // polynomials once the grid out-resolves the degree.
                let m = 8192;
                let sum: f64 = (0..m)
                    .map(|j| {
                        let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                        let (r, _, _) = self.radial(th);
                        0.5 * r * r
                    })
                    .sum();
                sum * 2.0 * std::f64::consts::PI / m as f64
            }
        }
    }

    /// Axis-aligned bounding box from boundary samples.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let pts = self.boundary_samples(BOUNDARY_SAMPLES);
        let d = self.dimension as usize;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in &pts {
            for j in 0..d {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        (lo, hi)
    }

    fn validate_regularity(&self) -> Result<(), GeometryError> {
        if self.dimension == 1 {
            return Ok(());
        }
        let m = 1024;
        for j in 0..m {
            let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            let (r, dr, ddr) = self.radial(th);
            let slack = |bound: f64| bound * (1.0 + 1e-9) + 1e-12;
            if !(r > 0.0) {
                return Err(GeometryError::DegenerateCurvature {
                    what: format!("radius not positive at theta {th:.6}: {r}"),
                });
            }
            if r < self.regularity.r_min - slack(0.0) - 1e-12 * self.regularity.r_max
                || r > slack(self.regularity.r_max)
                || dr.abs() > slack(self.regularity.dr_max)
                || ddr.abs() > slack(self.regularity.ddr_max)
            {
                return Err(GeometryError::DegenerateCurvature {
                    what: format!(
                        "sampled (r, r', r'') = ({r:.6}, {dr:.6}, {ddr:.6}) at theta {th:.6} violates metadata {:?}",
                        self.regularity
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Compass pattern search minimizing `f`, deterministic.
fn compass_min(
    f: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    step0: f64,
    min_step: f64,
) -> (Vec<f64>, f64) {
    let d = start.len();
    let mut x = start.to_vec();
    let mut fx = f(&x);
    let mut step = step0;
    while step >= min_step {
        let mut improved = false;
        for j in 0..d {
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[j] += sign * step;
                let fy = f(&y);
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

/// Largest boundary-pair distance, refined to 1e-8 relative.
pub fn diameter(domain: &StarDomain) -> f64 {
    match &domain.shape {
        DomainShape::Interval { a, b } => b - a,
        _ => {
            let m = 512;
            let pts = domain.boundary_samples(m);
            let mut best = (0usize, 0usize, 0.0f64);
            for i in 0..m {
                for j in (i + 1)..m {
                    let d2 = (pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2);
                    if d2 > best.2 {
                        best = (i, j, d2);
                    }
                }
            }
            let th = |k: usize| 2.0 * std::f64::consts::PI * k as f64 / m as f64;
            let objective = |ang: &[f64]| {
                let p = domain.boundary_point(ang[0]);
                let q = domain.boundary_point(ang[1]);
                -((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
            };
            let (_, neg) = compass_min(
                &objective,
                &[th(best.0), th(best.1)],
                2.0 * std::f64::consts::PI / m as f64,
                1e-10,
            );
            -neg
        }
    }
}

/// Ball deficit ρ(Ω): circumradius minus inradius, minimized over centers.
pub fn rho_deficit(domain: &StarDomain, search: &CenterSearch) -> RhoDeficit {
    let pts = domain.boundary_samples(BOUNDARY_SAMPLES);
    let radii = |x: &[f64]| -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for p in &pts {
            let d = p
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    };
    let objective = |x: &[f64]| {
        if !domain.contains(x) {
            return f64::INFINITY;
        }
        let (lo, hi) = radii(x);
        hi - lo
    };
    let (blo, bhi) = domain.bounding_box();
    let d = domain.dimension as usize;
    let g = search.grid.max(2);
    let mut best_x = domain.center_hint.clone();
    let mut best = objective(&best_x);
    let mut idx = vec![0usize; d];
    loop {
        let x: Vec<f64> = (0..d)
            .map(|j| blo[j] + (bhi[j] - blo[j]) * (idx[j] as f64 + 0.5) / g as f64)
            .collect();
        let v = objective(&x);
        if v < best {
            best = v;
            best_x = x;
        }
        // Odometer increment over the grid.
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < g {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == d {
                break;
            }
        }
        if k == d {
            break;
        }
    }
    let diam = diameter(domain);
    let step0 = (bhi[0] - blo[0]).max(if d > 1 { bhi[1] - blo[1] } else { 0.0 }) / g as f64;
    let (center, rho) = compass_min(&objective, &best_x, step0, search.refine_tol * diam);
    let (rho_i, rho_e) = radii(&center);
    RhoDeficit {
        rho,
        center,
        rho_i,
        rho_e,
    }
}

/// Certified-by-sampling lower bound on the interior-sphere radius.
pub fn inner_sphere_radius(domain: &StarDomain) -> Result<f64, GeometryError> {
    domain.validate_regularity()?;
    match &domain.shape {
        DomainShape::Interval { a, b } => Ok(0.5 * (b - a)),
        _ => {
            let m = 4096;
            let mut max_curv: f64 = 0.0;
            for j in 0..m {
                let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                max_curv = max_curv.max(domain.curvature(th));
            }
            if !(max_curv > 0.0) {
                return Err(GeometryError::DegenerateCurvature {
                    what: "no positive curvature sample on a closed boundary".into(),
                });
            }
            let mut bound = 1.0 / max_curv;
            // Medial clearance: the largest interior ball tangent at p must
            // not swallow any other boundary point q.
            let mp = 1024;
            let pts: Vec<(Vec<f64>, Vec<f64>)> = (0..mp)
                .map(|j| {
                    let th = 2.0 * std::f64::consts::PI * j as f64 / mp as f64;
                    (domain.boundary_point(th), domain.outward_normal(th))
                })
                .collect();
            for (p, nu) in &pts {
                for (q, _) in &pts {
                    let w = [q[0] - p[0], q[1] - p[1]];
                    let along = w[0] * nu[0] + w[1] * nu[1];
                    if along < -1e-12 {
                        let d2 = w[0] * w[0] + w[1] * w[1];
                        bound = bound.min(d2 / (-2.0 * along));
                    }
                }
            }
            Ok(bound)
        }
    }
}

/// The comparison radius `R = min(r_Ω, κ^{1/(2s)} |B₁|^{-1/n} / lip^{1/(2s)})`.
pub fn r_param(
    domain: &StarDomain,
    params: &crate::specfun::FracParams,
    lip_f: f64,
) -> Result<f64, GeometryError> {
    if !(lip_f >= 0.0) {
        return Err(err(format!("Lipschitz constant must be >= 0, got {lip_f}")));
    }
    if domain.dimension != params.n {
        return Err(err(format!(
            "domain dimension {} does not match parameter dimension {}",
            domain.dimension, params.n
        )));
    }
    let r_omega = inner_sphere_radius(domain)?;
    if lip_f == 0.0 {
        return Ok(r_omega);
    }
    let n = params.n;
    let vol = crate::specfun::unit_ball_volume(n);
    let expo = 1.0 / (2.0 * params.s);
    let second = params.kappa_ns.powf(expo) * vol.powf(-1.0 / f64::from(n)) / lip_f.powf(expo);
    Ok(r_omega.min(second))
}

/// Containment state of the reflected cap at offset μ: the minimum clearance
/// of the reflected cap-boundary cloud inside Ω, plus the binding sample.
struct CapProbe {
    min_gap: f64,
    binding: Option<Vec<f64>>,
}

fn probe_cap(
    domain: &StarDomain,
    e: &[f64],
    mu: f64,
    cloud: &[Vec<f64>],
) -> CapProbe {
    let plane = Hyperplane {
        e: e.to_vec(),
        mu,
    };
    let mut min_gap = f64::INFINITY;
    let mut binding = None;
    for p in cloud {
        let off = dot(p, e) - mu;
        if off <= 0.0 {
            continue;
        }
        let q = reflect_point(p, &plane);
        let gap = domain.radial_gap(&q);
        if gap < min_gap {
            min_gap = gap;
            binding = Some(q);
        }
    }
    CapProbe { min_gap, binding }
}

/// Critical offset λ_e of the moving-planes method for direction `e`.
///
/// Planes sweep down from the top face; λ is the infimum offset below which
/// the reflected cap no longer fits inside Ω.  The containment predicate is
/// evaluated on a boundary sample cloud with a clearance slack of half the
/// bisection tolerance, so sub-resolution wiggles do not bias the bracket.
pub fn critical_value(
    domain: &StarDomain,
    e: &[f64],
) -> Result<CriticalPlaneResult, GeometryError> {
    if e.len() != domain.dimension as usize {
        return Err(err(format!(
            "direction dimension {} does not match domain dimension {}",
            e.len(),
            domain.dimension
        )));
    }
    let e = Hyperplane::new(e.to_vec(), 0.0)?.e;
    let cloud = domain.boundary_samples(BOUNDARY_SAMPLES);
    let offsets: Vec<f64> = cloud.iter().map(|p| dot(p, &e)).collect();
    let big_lambda = offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mu_low = offsets.iter().copied().fold(f64::INFINITY, f64::min);
    let diam = diameter(domain);
    let tol = 1e-8 * diam;
    let margin = 0.5 * tol;
    let pass = |mu: f64| probe_cap(domain, &e, mu, &cloud).min_gap >= -margin;

    // Coarse downward scan for the first failing offset.
    let steps = 256;
    let mut hi = big_lambda;
    let mut lo = None;
    for k in 1..=steps {
        let mu = big_lambda - (big_lambda - mu_low) * k as f64 / steps as f64;
        if pass(mu) {
            hi = mu;
        } else {
            lo = Some(mu);
            break;
        }
    }
    let mut lo = match lo {
        Some(v) => v,
        None => {
            // The full reflection fits: the domain is symmetric to sampling
            // resolution and λ sits at the lowest sampled offset.
            mu_low
        }
    };
    let mut hi = hi;
    while hi - lo > tol {
        let mid = 0.5 * (hi + lo);
        if pass(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let lambda = hi;

    // Post-check: a clear pass just above and a clear fail just below.
    let delta = 1e-6 * diam;
    if !pass(lambda + delta) {
        return Err(GeometryError::AmbiguousContainment {
            mu: lambda + delta,
            gap: probe_cap(domain, &e, lambda + delta, &cloud).min_gap,
        });
    }
    if lambda - delta > mu_low && pass(lambda - delta) {
        return Err(GeometryError::AmbiguousContainment {
            mu: lambda - delta,
            gap: probe_cap(domain, &e, lambda - delta, &cloud).min_gap,
        });
    }

    // Contact classification at λ: if a near-binding sample sits close to
    // the plane the constraint is an orthogonal crossing, else a tangency.
    let probe = probe_cap(domain, &e, lambda, &cloud);
    let band = 2e-3 * diam;
    let near_tol = probe.min_gap + 10.0 * tol;
    let mut plane_bound = false;
    let mut best_off = f64::INFINITY;
    let mut contact = probe.binding.clone().unwrap_or_else(|| {
        // Empty cap (degenerate sliver): report the top support point.
        let k = offsets
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        cloud[k].clone()
    });
    let plane_at_lambda = Hyperplane {
        e: e.clone(),
        mu: lambda,
    };
    for p in &cloud {
        let off = dot(p, &e) - lambda;
        if off <= 0.0 {
            continue;
        }
        let q = reflect_point(p, &plane_at_lambda);
        let gap = domain.radial_gap(&q);
        if gap <= near_tol && off < best_off {
            best_off = off;
            if off <= band {
                plane_bound = true;
                contact = q;
            }
        }
    }
    let contact_case = if plane_bound {
        ContactCase::Orthogonality
    } else {
        ContactCase::Tangency
    };
    Ok(CriticalPlaneResult {
        e,
        lambda,
        contact_case,
        contact_point: contact,
        big_lambda,
    })
}

/// Interval set along a line, built from sign changes of a scalar gap.
fn line_intervals(
    gap: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    samples: usize,
) -> Vec<(f64, f64)> {
    let mut roots = Vec::new();
    let mut prev_t = lo;
    let mut prev_g = gap(lo);
    for k in 1..=samples {
        let t = lo + (hi - lo) * k as f64 / samples as f64;
        let g = gap(t);
        if (prev_g > 0.0) != (g > 0.0) {
            let (mut a, mut b) = (prev_t, t);
            let mut ga = prev_g;
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                let gm = gap(m);
                if (ga > 0.0) != (gm > 0.0) {
                    b = m;
                } else {
                    a = m;
                    ga = gm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev_t = t;
        prev_g = g;
    }
    let mut cuts = vec![lo];
    cuts.extend(roots);
    cuts.push(hi);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        if gap(0.5 * (w[0] + w[1])) > 0.0 {
            out.push((w[0], w[1]));
        }
    }
    out
}

fn xor_length(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut cuts: Vec<f64> = a
        .iter()
        .chain(b)
        .flat_map(|&(x, y)| [x, y])
        .collect();
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();
    let inside = |set: &[(f64, f64)], t: f64| set.iter().any(|&(x, y)| x < t && t < y);
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        if inside(a, mid) != inside(b, mid) {
            acc += w[1] - w[0];
        }
    }
    acc
}

/// `|Ω △ Ω′|` with Ω′ the reflection of Ω across the plane.
///
/// Columns perpendicular to the first axis are sliced analytically (interval
/// XOR per column); the column count doubles until two successive refinements
/// agree to 1e-4 relative (with an absolute floor for the symmetric case).
pub fn symmetric_difference_measure(domain: &StarDomain, plane: &Hyperplane) -> f64 {
    use rayon::prelude::*;
    if domain.dimension == 1 {
        let (a, b) = match &domain.shape {
            DomainShape::Interval { a, b } => (*a, *b),
            _ => unreachable!("1D domains are intervals"),
        };
        let pa = reflect_point(&[a], plane)[0];
        let pb = reflect_point(&[b], plane)[0];
        let (ra, rb) = (pa.min(pb), pa.max(pb));
        let overlap = (b.min(rb) - a.max(ra)).max(0.0);
        return (b - a) + (rb - ra) - 2.0 * overlap;
    }

    let cloud = domain.boundary_samples(BOUNDARY_SAMPLES.min(1024));
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in cloud.iter() {
        let q = reflect_point(p, plane);
        for v in [p.as_slice(), q.as_slice()] {
            for j in 0..2 {
                lo[j] = lo[j].min(v[j]);
                hi[j] = hi[j].max(v[j]);
            }
        }
    }
    let pad = 1e-6 * ((hi[0] - lo[0]) + (hi[1] - lo[1]));
    let (x_lo, x_hi) = (lo[0] - pad, hi[0] + pad);
    let (y_lo, y_hi) = (lo[1] - pad, hi[1] + pad);

    let column_measure = |cols: usize| -> f64 {
        let dx = (x_hi - x_lo) / cols as f64;
        let vals: Vec<f64> = (0..cols)
            .into_par_iter()
            .map(|i| {
                let x1 = x_lo + (i as f64 + 0.5) * dx;
                let gap_omega = |t: f64| domain.radial_gap(&[x1, t]);
                let gap_reflected = |t: f64| {
                    let q = reflect_point(&[x1, t], plane);
                    domain.radial_gap(&q)
                };
                let a = line_intervals(&gap_omega, y_lo, y_hi, 256);
                let b = line_intervals(&gap_reflected, y_lo, y_hi, 256);
                xor_length(&a, &b)
            })
            .collect();
        crate::quadrature::pairwise_sum(&vals) * dx
    };

    let floor = 1e-9 * domain.measure().max(1e-12);
    let mut prev = column_measure(256);
    for cols in [512, 1024, 2048, 4096, 8192] {
        let cur = column_measure(cols);
        let scale = cur.abs().max(prev.abs());
        if (cur - prev).abs() <= 1e-4 * scale || scale <= floor {
            return cur;
        }
        prev = cur;
    }
    prev
}
