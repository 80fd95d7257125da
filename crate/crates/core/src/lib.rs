//! Desk-scale numerics for the fractional Laplacian `(-Δ)^s` in one and two
//! dimensions.
//!
//! The crate is organised as a small verification stack:
//!
//! * [`specfun`] — gamma, the Gauss hypergeometric function, and the handful
//!   of `(n, s)`-dependent constants everything else is built from;
//! * [`closedform`] — exact fractional Laplacians of torsion-type profiles
//!   `(ρ² − |x|²)₊^s`, harmonic lifts, and a two-ball barrier, all valued in
//!   an extended real type that makes the boundary blow-up explicit;
//! * [`quadrature`] — an adaptive singular-integral oracle that evaluates
//!   `(-Δ)^s` of a black-box field to a requested tolerance, used to
//!   cross-check every closed form;
//! * [`geometry`] — star-shaped domains, ball-deficit, reflections and
//!   critical hyperplanes for the moving-planes method;
//! * [`solver`] — collocation solves of `(-Δ)^s u = f(u)` with zero exterior
//!   data, fractional normal derivatives, and the discrete spectral bounds;
//! * [`suites`] — runnable check suites that tie the above together and emit
//!   deterministic machine-readable reports.

pub mod closedform;
pub mod geometry;
pub mod quadrature;
pub mod solver;
pub mod specfun;
pub mod suites;

pub use closedform::{Ball, BarrierConfig, ExtendedValue};
pub use geometry::{CriticalPlaneResult, Hyperplane, StarDomain};
pub use quadrature::Field;
pub use solver::{GridField, ReactionSpec};
pub use specfun::FracParams;
pub use suites::{Report, SuiteConfig};
