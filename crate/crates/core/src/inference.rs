//! Four families of tests on RMST estimates:
//!
//! 1. a single tier in one arm,
//! 2. the same tier between two arms (`var = Σ_T[j,j] + Σ_C[j,j]`),
//! 3. two tiers within one arm (`var = Σ[j,j] + Σ[k,k] − 2 Σ[k,j]`),
//! 4. all tiers jointly, a Wald chi-square with `J` degrees of freedom.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::dist::{chi_square_quantile, chi_square_sf, normal_quantile, normal_two_sided_p};
use crate::error::{Error, Result};
use crate::rmst::RmstEstimate;

/// Largest tier count accepted by the Wald test.
pub const MAX_WALD_TIERS: usize = 16;

/// Reciprocal condition number below which the combined covariance is
/// treated as singular.
pub const MIN_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestType {
    Single,
    BetweenArms,
    WithinArm,
    WaldOverall,
}

impl TestType {
    pub fn name(self) -> &'static str {
        match self {
            TestType::Single => "single",
            TestType::BetweenArms => "between_arms",
            TestType::WithinArm => "within_arm",
            TestType::WaldOverall => "wald_overall",
        }
    }
}

impl fmt::Display for TestType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub test_type: TestType,
    /// Point estimate, or the chi-square statistic for the Wald test.
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// z for the normal tests, chi-square for Wald.
    pub statistic: f64,
    pub df: Option<usize>,
    /// Chi-square critical value at `alpha` (Wald only).
    pub critical_value: Option<f64>,
    pub p_value: f64,
    pub alpha: f64,
}

impl InferenceResult {
    pub fn rejects(&self) -> bool {
        self.p_value < self.alpha
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

fn check_tier(est: &RmstEstimate, tier: usize) -> Result<()> {
    if tier == 0 || tier > est.num_tiers() {
        Err(Error::TierOutOfRange {
            tier,
            max: est.num_tiers(),
        })
    } else {
        Ok(())
    }
}

fn check_pair(a: &RmstEstimate, b: &RmstEstimate) -> Result<()> {
    if a.tau() != b.tau() {
        return Err(Error::TauMismatch(a.tau(), b.tau()));
    }
    if a.num_tiers() != b.num_tiers() {
        return Err(Error::TierCountMismatch(a.num_tiers(), b.num_tiers()));
    }
    Ok(())
}

/// Wald-type normal test of `estimate = null_value` given its variance.
pub fn normal_test(
    test_type: TestType,
    estimate: f64,
    variance: f64,
    null_value: f64,
    alpha: f64,
) -> Result<InferenceResult> {
    check_alpha(alpha)?;
    let se = variance.max(0.0).sqrt();
    let diff = estimate - null_value;
    let statistic = if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    let half = normal_quantile(1.0 - alpha / 2.0) * se;
    Ok(InferenceResult {
        test_type,
        estimate,
        std_error: Some(se),
        ci_low: Some(estimate - half),
        ci_high: Some(estimate + half),
        statistic,
        df: None,
        critical_value: None,
        p_value: normal_two_sided_p(statistic),
        alpha,
    })
}

/// Test and interval for the RMST of 1-based `tier`.
pub fn infer_single(
    est: &RmstEstimate,
    tier: usize,
    null_value: f64,
    alpha: f64,
) -> Result<InferenceResult> {
    check_tier(est, tier)?;
    let j = tier - 1;
    normal_test(
        TestType::Single,
        est.rmst()[j],
        est.cov()[(j, j)],
        null_value,
        alpha,
    )
}

/// Treatment minus control at 1-based `tier`; the arms are independent.
pub fn infer_between(
    treatment: &RmstEstimate,
    control: &RmstEstimate,
    tier: usize,
    alpha: f64,
) -> Result<InferenceResult> {
    check_pair(treatment, control)?;
    check_tier(treatment, tier)?;
    let j = tier - 1;
    normal_test(
        TestType::BetweenArms,
        treatment.rmst()[j] - control.rmst()[j],
        treatment.cov()[(j, j)] + control.cov()[(j, j)],
        0.0,
        alpha,
    )
}

/// `rmst_k − rmst_j` within one arm, using the cross-tier covariance.
pub fn infer_within(
    est: &RmstEstimate,
    tier_j: usize,
    tier_k: usize,
    alpha: f64,
) -> Result<InferenceResult> {
    check_tier(est, tier_j)?;
    check_tier(est, tier_k)?;
    if tier_j == tier_k {
        return Err(Error::SameTier(tier_j));
    }
    let (j, k) = (tier_j - 1, tier_k - 1);
    let cov = est.cov();
    normal_test(
        TestType::WithinArm,
        est.rmst()[k] - est.rmst()[j],
        cov[(j, j)] + cov[(k, k)] - 2.0 * cov[(k, j)],
        0.0,
        alpha,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareDecision {
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
}

/// Upper-tail decision for a chi-square statistic.
pub fn chi_square_decision(statistic: f64, df: usize, alpha: f64) -> Result<ChiSquareDecision> {
    check_alpha(alpha)?;
    let p_value = chi_square_sf(statistic, df);
    Ok(ChiSquareDecision {
        critical_value: chi_square_quantile(1.0 - alpha, df),
        p_value,
        reject: p_value < alpha,
    })
}

/// Reciprocal 1-norm condition number; 0 for a singular matrix.
pub fn reciprocal_condition(m: &DMatrix<f64>) -> f64 {
    let norm1 = |a: &DMatrix<f64>| {
        a.column_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let a = norm1(m);
    if a == 0.0 || !a.is_finite() {
        return 0.0;
    }
    match m.clone().lu().try_inverse() {
        Some(inv) => {
            let b = norm1(&inv);
            if b.is_finite() && b > 0.0 {
                1.0 / (a * b)
            } else {
                0.0
            }
        }
        None => 0.0,
    }
}

/// Joint test that the two RMST vectors are equal:
/// `(R_T − R_C)' (Σ_T + Σ_C)⁻¹ (R_T − R_C) ~ χ²_J`.
pub fn infer_wald(
    treatment: &RmstEstimate,
    control: &RmstEstimate,
    alpha: f64,
) -> Result<InferenceResult> {
    check_pair(treatment, control)?;
    check_alpha(alpha)?;
    let j = treatment.num_tiers();
    if j > MAX_WALD_TIERS {
        return Err(Error::TooManyTiers {
            found: j,
            max: MAX_WALD_TIERS,
        });
    }
    let diff = DVector::from_iterator(
        j,
        treatment
            .rmst()
            .iter()
            .zip(control.rmst())
            .map(|(t, c)| t - c),
    );
    let combined = treatment.cov() + control.cov();
    let rcond = reciprocal_condition(&combined);
    if !(rcond >= MIN_RCOND) {
        return Err(Error::SingularCovariance { rcond });
    }
    let solved = combined
        .lu()
        .solve(&diff)
        .ok_or(Error::SingularCovariance { rcond })?;
    let statistic = diff.dot(&solved).max(0.0);
    let decision = chi_square_decision(statistic, j, alpha)?;
    Ok(InferenceResult {
        test_type: TestType::WaldOverall,
        estimate: statistic,
        std_error: None,
        ci_low: None,
        ci_high: None,
        statistic,
        df: Some(j),
        critical_value: Some(decision.critical_value),
        p_value: decision.p_value,
        alpha,
    })
}
