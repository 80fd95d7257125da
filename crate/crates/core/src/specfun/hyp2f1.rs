//! Gauss hypergeometric function `₂F₁(a, b; c; τ)` on `τ ∈ [0, 1]`.
//!
//! Strategy: direct series for `τ ≤ 1/2`; the standard connection formula in
//! `1 − τ` for `τ > 1/2`; Gauss summation at `τ = 1`.  When the connection
//! formula degenerates (`a + b − c` an integer) evaluation is rerouted to a
//! fixed-order Gauss–Jacobi quadrature of the Euler integral representation.

use super::gamma::{gamma, recip_gamma};
use super::SpecFunError;

/// Series termination: three consecutive terms below this relative size.
const SERIES_EPS: f64 = 1e-16;
/// Hard cap on series terms before reporting non-convergence.
const MAX_TERMS: usize = 100_000;
/// Threshold for treating `a + b - c` as an integer (log case).
const INT_EPS: f64 = 1e-9;
/// Fixed order of the Gauss–Jacobi fallback rule.
const JACOBI_ORDER: usize = 80;

/// `₂F₁(a, b; c; τ)` for `0 ≤ τ ≤ 1`, `c > 0`.
///
/// At `τ = 1` the value is the Gauss sum, defined only when `c − a − b > 0`;
/// otherwise a divergence error is returned.
pub fn gauss_2f1(a: f64, b: f64, c: f64, tau: f64) -> Result<f64, SpecFunError> {
    if !(0.0..=1.0).contains(&tau) || tau.is_nan() {
        return Err(SpecFunError::Domain {
            what: format!("2F1 argument tau = {tau} outside [0, 1]"),
        });
    }
    if !(c > 0.0) {
        return Err(SpecFunError::Domain {
            what: format!("2F1 requires c > 0, got c = {c}"),
        });
    }
    if tau == 1.0 {
        return gauss_sum(a, b, c);
    }
    if tau <= 0.5 {
        return series(a, b, c, tau);
    }
    let d = c - a - b;
    if (d - d.round()).abs() < INT_EPS {
        // Log case: the 1-τ connection coefficients have gamma poles.
        return euler_integral(a, b, c, tau)
            .or_else(|_| euler_integral(b, a, c, tau))
            .or_else(|_| series(a, b, c, tau));
    }
    connection(a, b, c, tau)
}

/// `₂F₁(a, b; c; 1) = Γ(c)Γ(c−a−b) / (Γ(c−a)Γ(c−b))` for `c − a − b > 0`.
pub fn gauss_sum(a: f64, b: f64, c: f64) -> Result<f64, SpecFunError> {
    let d = c - a - b;
    if !(d > 0.0) {
        return Err(SpecFunError::Divergent {
            what: format!("2F1 at tau = 1 diverges: c - a - b = {d} <= 0"),
        });
    }
    Ok(gamma(c)? * gamma(d)? * recip_gamma(c - a) * recip_gamma(c - b))
}

/// Plain power series around 0; converges for `|τ| < 1` (slowly near 1).
fn series(a: f64, b: f64, c: f64, tau: f64) -> Result<f64, SpecFunError> {
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut quiet = 0u32;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * tau;
        sum += term;
        if term.abs() < SERIES_EPS * sum.abs().max(f64::MIN_POSITIVE) {
            quiet += 1;
            if quiet >= 3 {
                return Ok(sum);
            }
        } else {
            quiet = 0;
        }
    }
    Err(SpecFunError::NoConvergence {
        max_terms: MAX_TERMS,
    })
}

/// Connection formula at `1 − τ`, valid when `c − a − b` is not an integer.
fn connection(a: f64, b: f64, c: f64, tau: f64) -> Result<f64, SpecFunError> {
    let w = 1.0 - tau;
    let d = c - a - b;
    let coef1 = gamma(c)? * gamma(d)? * recip_gamma(c - a) * recip_gamma(c - b);
    let coef2 = gamma(c)? * gamma(-d)? * recip_gamma(a) * recip_gamma(b);
    let t1 = if coef1 != 0.0 {
        coef1 * series(a, b, 1.0 - d, w)?
    } else {
        0.0
    };
    let t2 = if coef2 != 0.0 {
        coef2 * w.powf(d) * series(c - a, c - b, 1.0 + d, w)?
    } else {
        0.0
    };
    Ok(t1 + t2)
}

/// Euler integral `₂F₁ = Γ(c)/(Γ(b)Γ(c−b)) ∫₀¹ t^{b−1}(1−t)^{c−b−1}(1−τt)^{−a} dt`
/// by fixed-order Gauss–Jacobi; requires `c > b > 0`.
fn euler_integral(a: f64, b: f64, c: f64, tau: f64) -> Result<f64, SpecFunError> {
    if !(c > b && b > 0.0) {
        return Err(SpecFunError::Domain {
            what: format!("Euler integral needs c > b > 0, got b = {b}, c = {c}"),
        });
    }
    // Jacobi weight (1-x)^alpha (1+x)^beta on [-1, 1]; t = (1+x)/2 maps the
    // Euler weight t^{b-1}(1-t)^{c-b-1} onto alpha = c-b-1, beta = b-1.
    let (nodes, weights) = jacobi_rule(JACOBI_ORDER, c - b - 1.0, b - 1.0)?;
    let mut acc = 0.0;
    for (&x, &w) in nodes.iter().zip(weights.iter()) {
        let t = 0.5 * (1.0 + x);
        acc += w * (1.0 - tau * t).powf(-a);
    }
    let front = gamma(c)? * recip_gamma(b) * recip_gamma(c - b) * 2f64.powf(1.0 - c);
    Ok(front * acc)
}

/// Gauss–Jacobi nodes/weights on `[-1, 1]` for weight `(1-x)^α (1+x)^β`,
/// via Golub–Welsch on the symmetric Jacobi recurrence matrix.
fn jacobi_rule(m: usize, alpha: f64, beta: f64) -> Result<(Vec<f64>, Vec<f64>), SpecFunError> {
    if !(alpha > -1.0 && beta > -1.0) {
        return Err(SpecFunError::Domain {
            what: format!("Jacobi weight exponents must exceed -1: alpha={alpha}, beta={beta}"),
        });
    }
    let ab = alpha + beta;
    let mut diag = vec![0.0_f64; m];
    let mut off = vec![0.0_f64; m.saturating_sub(1)];
    diag[0] = (beta - alpha) / (ab + 2.0);
    for k in 1..m {
        let kf = k as f64;
        let den = (2.0 * kf + ab) * (2.0 * kf + ab + 2.0);
        diag[k] = (beta * beta - alpha * alpha) / den;
        let num = 4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab);
        let den2 = (2.0 * kf + ab).powi(2) * (2.0 * kf + ab + 1.0) * (2.0 * kf + ab - 1.0);
        off[k - 1] = (num / den2).sqrt();
    }
    let mut j = nalgebra::DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        j[(k, k)] = diag[k];
        if k + 1 < m {
            j[(k, k + 1)] = off[k];
            j[(k + 1, k)] = off[k];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(j);
    // Total mass of the weight: 2^{α+β+1} B(α+1, β+1).
    let mu0 = 2f64.powf(ab + 1.0) * gamma(alpha + 1.0)? * gamma(beta + 1.0)?
        * recip_gamma(ab + 2.0);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            (node, mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(pairs.into_iter().unzip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Reference values from 40-digit arithmetic, including the τ > 1/2
    /// regime that exercises the connection formula.
    const REF: [(f64, f64, f64, f64, f64); 8] = [
        (1.0, 0.5, 2.0, 0.5, 1.171572875253809902396623),
        (1.0, 0.5, 2.0, 0.9, 1.519493853295915744530388),
        (1.0, 1.0, 2.5, 0.99, 2.582412829583401410838037),
        (1.5, 1.5, 2.5, 0.75, 3.163201695375419065082458),
        (0.75, 1.25, 1.75, 0.9, 2.973406941670982761967413),
        (2.0, 1.5, 3.0, 0.6, 2.373270690198505798634812),
        (1.0, 0.5, 2.0, 0.999, 1.938693139936568955951211),
        (1.5, 0.5, 2.0, 0.25, 1.111732395853362071294717),
    ];

    #[test]
    fn matches_reference() {
        for &(a, b, c, t, want) in REF.iter() {
            assert_relative_eq!(gauss_2f1(a, b, c, t).unwrap(), want, max_relative = 1e-11);
        }
    }

    #[test]
    fn value_at_origin_is_one() {
        assert_eq!(gauss_2f1(1.3, 0.7, 2.2, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn gauss_summation_at_one() {
        // (n, s) = (2, 1/2): 2F1(1, n/2; (n+2s)/2+1; 1) = (n+2s)/(2s) = 3.
        assert_relative_eq!(gauss_2f1(1.0, 1.0, 2.5, 1.0).unwrap(), 3.0, max_relative = 1e-12);
        // Divergent when c - a - b <= 0.
        assert!(matches!(
            gauss_2f1(1.5, 1.5, 2.5, 1.0),
            Err(SpecFunError::Divergent { .. })
        ));
    }

    #[test]
    fn domain_errors() {
        assert!(gauss_2f1(1.0, 1.0, 2.0, -0.1).is_err());
        assert!(gauss_2f1(1.0, 1.0, 2.0, 1.5).is_err());
        assert!(gauss_2f1(1.0, 1.0, -1.0, 0.3).is_err());
    }

    #[test]
    fn series_and_connection_agree_at_the_split() {
        // Either branch must produce the same value just across tau = 1/2.
        for &(a, b, c) in &[(1.0, 0.5, 2.0), (1.5, 1.5, 2.5), (0.75, 1.25, 1.75)] {
            let below = series(a, b, c, 0.5).unwrap();
            let above = connection(a, b, c, 0.500001).unwrap();
            // 2F1 is C^1 in tau here; the slope is O(1), so 1e-4 headroom.
            assert_relative_eq!(below, above, max_relative = 1e-4);
            let exact_above = series(a, b, c, 0.500001).unwrap();
            assert_relative_eq!(above, exact_above, max_relative = 1e-12);
        }
    }

    #[test]
    fn log_case_reroutes_to_quadrature_fallback() {
        // a + b - c integer: connection coefficients blow up, the Euler
        // integral takes over.  2F1(1,1;2;t) = -ln(1-t)/t.
        let t = 0.7_f64;
        let want = -(1.0 - t).ln() / t;
        assert_relative_eq!(gauss_2f1(1.0, 1.0, 2.0, t).unwrap(), want, max_relative = 1e-9);
        assert_relative_eq!(
            gauss_2f1(0.5, 1.5, 2.0, 0.8).unwrap(),
            1.716828884961267953612083,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            gauss_2f1(1.5, 2.5, 3.0, 0.85).unwrap(),
            9.370576475037508216039850,
            max_relative = 1e-8
        );
    }

    #[test]
    fn quadrature_fallback_matches_series_reference_at_half() {
        // Degenerate-parameter evaluations agree with the direct series at
        // tau = 1/2 to 1e-9.
        for &(a, b, c) in &[(1.0, 1.0, 2.0), (0.5, 1.5, 2.0), (1.5, 2.5, 3.0)] {
            let direct = series(a, b, c, 0.5).unwrap();
            let via_euler = euler_integral(a, b, c, 0.5)
                .or_else(|_| euler_integral(b, a, c, 0.5))
                .unwrap();
            assert_relative_eq!(direct, via_euler, max_relative = 1e-9);
        }
    }

    #[test]
    fn euler_transformation_identity() {
        // 2F1(a,b;c;t) = (1-t)^{c-a-b} 2F1(c-a, c-b; c; t) on the torsion
        // exterior family a = (n+2s)/2, b = s+1, c = a+1.
        for &(n, s) in &[(1.0, 0.25), (1.0, 0.5), (2.0, 0.75), (2.0, 0.5)] {
            let a = 0.5 * (n + 2.0 * s);
            let b = s + 1.0;
            let c = a + 1.0;
            for &t in &[0.1, 0.3, 0.45, 0.49] {
                let lhs = gauss_2f1(a, b, c, t).unwrap();
                let rhs = (1.0 - t).powf(c - a - b) * gauss_2f1(c - a, c - b, c, t).unwrap();
                assert_relative_eq!(lhs, rhs, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn contiguous_relation_identity() {
        // (b t / c) 2F1(a, b+1; c+1; t) = 2F1(a, b; c; t) - 2F1(a-1, b; c; t).
        for &(a, b, c) in &[(1.5, 1.0, 2.5), (2.0, 0.75, 2.25), (1.25, 1.5, 3.0)] {
            for &t in &[0.15, 0.35, 0.6, 0.85] {
                let lhs = (b * t / c) * gauss_2f1(a, b + 1.0, c + 1.0, t).unwrap();
                let rhs =
                    gauss_2f1(a, b, c, t).unwrap() - gauss_2f1(a - 1.0, b, c, t).unwrap();
                assert_relative_eq!(lhs, rhs, max_relative = 1e-9, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn monotone_on_positive_parameter_family() {
        // tau -> 2F1((n+2s)/2, s+1; (n+2s)/2+2; tau) is nondecreasing
        // (positive series coefficients).
        for &(n, s) in &[(1.0, 0.25), (2.0, 0.5), (2.0, 0.75)] {
            let a = 0.5 * (n + 2.0 * s);
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=40 {
                let t = k as f64 / 40.0 * 0.995;
                let v = gauss_2f1(a, s + 1.0, a + 2.0, t).unwrap();
                assert!(v >= prev, "not monotone at t = {t}");
                prev = v;
            }
        }
    }

    #[test]
    fn jacobi_rule_integrates_polynomials_exactly() {
        // Weight (1-x)^0.5 (1+x)^0 on [-1,1]:
        // ∫ x^2 (1-x)^{1/2} dx = 2^{3/2} · 22/105.
        let (nodes, weights) = jacobi_rule(12, 0.5, 0.0).unwrap();
        let got: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(&x, &w)| w * x * x)
            .sum();
        let want = 2f64.powf(1.5) * 22.0 / 105.0;
        assert_relative_eq!(got, want, max_relative = 1e-12);
    }
}
