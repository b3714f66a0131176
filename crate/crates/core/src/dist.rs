//! Normal and chi-square tail functions used by the tests.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use statrs::function::{erf, gamma};

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Two-sided p-value `P(|Z| ≥ |z|)`.
pub fn normal_two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    erf::erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Upper tail `P(X ≥ x)` of a chi-square with `df` degrees of freedom, via
/// the regularized upper incomplete gamma function `Q(df/2, x/2)`.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma::gamma_ur(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0)
}

/// Chi-square quantile, i.e. the critical value at upper-tail level `1 - p`.
pub fn chi_square_quantile(p: f64, df: usize) -> f64 {
    ChiSquared::new(df as f64)
        .expect("df must be positive")
        .inverse_cdf(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_975() {
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-9);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-11);
    }

    #[test]
    fn chi_square_df3_closed_form() {
        // Q(3/2, x/2) = erfc(sqrt(x/2)) + sqrt(2x/pi) exp(-x/2)
        for &x in &[0.5, 1.0, 3.0, 7.81, 18.05] {
            let oracle = erf::erfc((x / 2.0f64).sqrt())
                + (2.0 * x / std::f64::consts::PI).sqrt() * (-x / 2.0f64).exp();
            assert!((chi_square_sf(x, 3) - oracle).abs() < 1e-10, "x = {x}");
        }
        assert!((chi_square_sf(3.0, 3) - 0.391625).abs() < 1e-6);
    }

    #[test]
    fn chi_square_df2_is_exponential() {
        for &x in &[0.1, 2.0, 9.0] {
            assert!((chi_square_sf(x, 2) - (-x / 2.0f64).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn critical_value_df3() {
        assert!((chi_square_quantile(0.95, 3) - 7.814727903251178).abs() < 1e-8);
    }

    #[test]
    fn two_sided_p_edges() {
        assert_eq!(normal_two_sided_p(0.0), 1.0);
        assert_eq!(normal_two_sided_p(f64::INFINITY), 0.0);
        assert!((normal_two_sided_p(1.959963984540054) - 0.05).abs() < 1e-11);
    }
}
