//! Chi-squared CDF and quantile.
//!
//! The CDF is the regularized lower incomplete gamma function P(df/2, t/2),
//! computed by series expansion for small arguments and by a continued
//! fraction (modified Lentz) otherwise. The quantile inverts the CDF by
//! bracketed bisection.

const MAX_ITER: usize = 400;
const FPMIN: f64 = 1e-300;

/// CDF of the chi-squared distribution with `df` degrees of freedom.
///
/// ```
/// use spacetsiv::chi2::chi2_cdf;
///
/// assert_eq!(chi2_cdf(0.0, 3), 0.0);
/// // two degrees of freedom: 1 - exp(-t/2)
/// assert!((chi2_cdf(2.0, 2) - (1.0 - (-1.0f64).exp())).abs() < 1e-13);
/// ```
pub fn chi2_cdf(t: f64, df: u32) -> f64 {
    assert!(df >= 1, "chi2_cdf requires df >= 1");
    if t <= 0.0 {
        return 0.0;
    }
    reg_lower_gamma(df as f64 / 2.0, t / 2.0)
}

/// Quantile of the chi-squared distribution with `df` degrees of freedom,
/// for `p` in (0, 1). Inverts [`chi2_cdf`] by bisection to 1e-12.
///
/// ```
/// use spacetsiv::chi2::chi2_quantile;
///
/// assert!((chi2_quantile(0.95, 1) - 3.8415).abs() < 1e-4);
/// ```
pub fn chi2_quantile(p: f64, df: u32) -> f64 {
    assert!(df >= 1, "chi2_quantile requires df >= 1");
    assert!(p > 0.0 && p < 1.0, "chi2_quantile requires p in (0, 1)");
    let dff = df as f64;
    let mut hi = dff + 10.0 * (2.0 * dff).sqrt() + 10.0;
    while chi2_cdf(hi, df) < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Regularized lower incomplete gamma P(a, x) for a > 0, x >= 0.
fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    // exp(-x + a ln x - ln Γ(a)), shared by both expansions
    let prefactor = (-x + a * x.ln() - ln_gamma(a)).exp();
    if x < a + 1.0 {
        lower_series(a, x, prefactor)
    } else {
        1.0 - upper_continued_fraction(a, x, prefactor)
    }
}

/// Series expansion of P(a, x): prefactor · Σ x^n / (a (a+1) ⋯ (a+n)).
fn lower_series(a: f64, x: f64, prefactor: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * f64::EPSILON {
            break;
        }
    }
    (prefactor * sum).clamp(0.0, 1.0)
}

/// Continued fraction for Q(a, x) using the modified Lentz algorithm.
fn upper_continued_fraction(a: f64, x: f64, prefactor: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < f64::EPSILON {
            break;
        }
    }
    (prefactor * h).clamp(0.0, 1.0)
}

/// Lanczos approximation (g = 7, 9 coefficients) of ln Γ(x) for x > 0.
fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507343278686905,
        -0.13857109526572012,
        9.984_369_578_019_572e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection: Γ(x) Γ(1-x) = π / sin(πx)
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().ln()
            - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, c) in COEFFS.iter().enumerate() {
        acc += c / (z + i as f64 + 1.0);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cdf_is_zero_at_origin() {
        for df in [1, 2, 3, 10, 50] {
            assert_eq!(chi2_cdf(0.0, df), 0.0);
            assert_eq!(chi2_cdf(-1.0, df), 0.0);
        }
    }

    #[test]
    fn df2_has_closed_form() {
        // For two degrees of freedom the CDF is 1 - exp(-t/2).
        for t in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 40.0] {
            assert_relative_eq!(chi2_cdf(t, 2), 1.0 - (-t / 2.0).exp(), epsilon = 1e-13);
        }
    }

    #[test]
    fn quantile_round_trip() {
        for t in [0.5, 2.0, 10.0] {
            let p = chi2_cdf(t, 3);
            assert_relative_eq!(chi2_quantile(p, 3), t, epsilon = 1e-9);
        }
        for df in [1, 5, 20] {
            for p in [0.01, 0.3, 0.5, 0.9, 0.99, 0.999] {
                assert_relative_eq!(chi2_cdf(chi2_quantile(p, df), df), p, epsilon = 1e-10);
            }
        }
    }

    /// Composite Simpson integration of the chi-squared density after the
    /// substitution t = u², which removes the df = 1 singularity at zero:
    /// ∫₀^q pdf(t) dt = ∫₀^√q 2u · pdf(u²) du.
    fn cdf_by_quadrature(q: f64, df: u32) -> f64 {
        let half = df as f64 / 2.0;
        // Γ(1/2) = √π, Γ(1) = 1, Γ(3/2) = √π/2, Γ(2) = 1, Γ(5/2) = 3√π/4
        let gamma_half = match df {
            1 => std::f64::consts::PI.sqrt(),
            2 => 1.0,
            3 => std::f64::consts::PI.sqrt() / 2.0,
            4 => 1.0,
            5 => 3.0 * std::f64::consts::PI.sqrt() / 4.0,
            _ => panic!("quadrature oracle only covers df <= 5"),
        };
        let norm = 1.0 / (2f64.powf(half) * gamma_half);
        // 2u · (u²)^{df/2−1} = 2 u^{df−1}, smooth at zero for df ≥ 1
        let integrand =
            |u: f64| 2.0 * u.powi(df as i32 - 1) * norm * (-u * u / 2.0).exp();
        let upper = q.sqrt();
        let n = 40_000;
        let h = upper / n as f64;
        let mut sum = integrand(0.0) + integrand(upper);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * integrand(i as f64 * h);
        }
        sum * h / 3.0
    }

    #[test]
    fn cdf_matches_density_quadrature() {
        for df in [1, 3, 5] {
            for q in [0.3, 1.0, 3.0, 7.5] {
                assert_relative_eq!(chi2_cdf(q, df), cdf_by_quadrature(q, df), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn quantile_095_df1_matches_quadrature_oracle() {
        // Invert the quadrature CDF by bisection, independently of the
        // incomplete-gamma implementation.
        let (mut lo, mut hi) = (0.0_f64, 40.0_f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if cdf_by_quadrature(mid, 1) < 0.95 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let q = chi2_quantile(0.95, 1);
        assert_relative_eq!(q, oracle, epsilon = 1e-8);
        assert_relative_eq!(q, 3.8415, epsilon = 1e-4);
    }
}
