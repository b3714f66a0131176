//! Restricted mean survival time per tier, influence contributions, and the
//! cross-tier covariance of the RMST vector.
//!
//! For tier `j` the estimator is `R_j = ∫_0^τ Ŝ_j(t) dt`. Its first-order
//! expansion is `R_j - R_j* ≈ n⁻¹ Σ_i Ψ_ij`, with
//!
//! ```text
//! Ψ_ij = Σ_{event times s ≤ τ} g_j(s) · (n / Y_j(s)) · (dN_ij(s) − Y_ij(s) dÂ_j(s))
//! g_j(s) = −∫_s^τ Ŝ_j(t) dt
//! ```
//!
//! and `cov[j][k] = n⁻² Σ_i Ψ_ij Ψ_ik` is the covariance of the estimates
//! themselves (not of `√n` times them). No `n / (n − 1)` correction is applied.

use nalgebra::DMatrix;

use crate::door::{Cohort, TierData};
use crate::error::{Error, Result};
use crate::km::{KmCurve, RiskTable};

/// `g(s, τ)` evaluated at the jump times of one tier up to `τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GValues {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmstEstimate {
    tau: f64,
    n: usize,
    rmst: Vec<f64>,
    cov: DMatrix<f64>,
    /// n × J; row order follows the cohort records.
    influence: DMatrix<f64>,
    g_cache: Vec<GValues>,
}

impl RmstEstimate {
    /// An estimate known only through its point values and covariance, e.g.
    /// numbers transcribed from a published table.
    pub fn from_summary(tau: f64, rmst: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let j = rmst.len();
        if cov.nrows() != j || cov.ncols() != j {
            return Err(Error::TierCountMismatch(j, cov.nrows()));
        }
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::InvalidTau(tau));
        }
        Ok(RmstEstimate {
            tau,
            n: 0,
            rmst,
            cov,
            influence: DMatrix::zeros(0, j),
            g_cache: Vec::new(),
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_tiers(&self) -> usize {
        self.rmst.len()
    }

    pub fn rmst(&self) -> &[f64] {
        &self.rmst
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn influence(&self) -> &DMatrix<f64> {
        &self.influence
    }

    pub fn g_cache(&self) -> &[GValues] {
        &self.g_cache
    }

    /// Standard error of 1-based `tier`.
    pub fn std_error(&self, tier: usize) -> f64 {
        self.cov[(tier - 1, tier - 1)].max(0.0).sqrt()
    }

    /// 1-based tiers `j` with `rmst_j > rmst_{j+1}`. Nested event times make
    /// such inversions impossible for true values, but heavy censoring can
    /// produce them in estimates; they are reported, never corrected.
    pub fn ordering_violations(&self) -> Vec<usize> {
        self.rmst
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] > w[1] + 1e-12 * self.tau.max(1.0))
            .map(|(j, _)| j + 1)
            .collect()
    }
}

fn check_tau(curve: &KmCurve, tau: f64) -> Result<()> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::InvalidTau(tau));
    }
    if tau > 0.0 && !curve.has_risk_at(tau) {
        return Err(Error::NoRiskAtTau { tier: None, tau });
    }
    Ok(())
}

fn with_tier(err: Error, tier: usize) -> Error {
    match err {
        Error::NoRiskAtTau { tau, .. } => Error::NoRiskAtTau {
            tier: Some(tier),
            tau,
        },
        other => other,
    }
}

/// Area under the step curve on `[0, τ]`.
pub fn rmst(curve: &KmCurve, tau: f64) -> Result<f64> {
    check_tau(curve, tau)?;
    Ok(curve.area_to(tau))
}

/// `g(s, τ) = −∫_s^τ Ŝ(t) dt` for `0 ≤ s ≤ τ`.
pub fn g_function(curve: &KmCurve, s: f64, tau: f64) -> f64 {
    -(curve.area_to(tau) - curve.area_to(s))
}

fn g_values(curve: &KmCurve, tau: f64) -> GValues {
    let m = curve.jump_times().partition_point(|&s| s <= tau);
    let times = curve.jump_times()[..m].to_vec();
    let total = curve.area_to(tau);
    let values = times.iter().map(|&s| -(total - curve.area_to(s))).collect();
    GValues { times, values }
}

/// Ψ̂_i for every subject of one tier, in `data` order.
///
/// Splits Ψ̂_i into the jump term at the subject's own event time and the
/// compensator term, a prefix sum over jumps up to `min(X_i, τ)`, so the
/// whole vector costs `O(n log m)`.
fn influence_from_parts(data: &TierData, curve: &KmCurve, g: &GValues) -> Vec<f64> {
    let n = curve.n() as f64;
    let m = g.times.len();
    // weight of a unit jump in subject i's counting process at jump k
    let w: Vec<f64> = (0..m)
        .map(|k| g.values[k] * n / curve.at_risk()[k] as f64)
        .collect();
    let mut compensator = Vec::with_capacity(m + 1);
    compensator.push(0.0);
    let mut acc = 0.0;
    for k in 0..m {
        acc += w[k] * curve.hazard_increments()[k];
        compensator.push(acc);
    }
    data.times
        .iter()
        .zip(&data.events)
        .map(|(&x, &event)| {
            let reached = g.times.partition_point(|&s| s <= x);
            let own = if event && reached > 0 && g.times[reached - 1] == x {
                w[reached - 1]
            } else {
                0.0
            };
            own - compensator[reached]
        })
        .collect()
}

/// Influence contributions Ψ̂_ij(τ) of 1-based `tier`, in cohort order.
pub fn influence_contributions(cohort: &Cohort, tier: usize, tau: f64) -> Result<Vec<f64>> {
    let data = cohort.tier(tier)?;
    let curve = KmCurve::fit(&RiskTable::from_tier(&data)?);
    check_tau(&curve, tau).map_err(|e| with_tier(e, tier))?;
    Ok(influence_from_parts(&data, &curve, &g_values(&curve, tau)))
}

/// Plug-in martingale variance
/// `ζ̂(τ) = Σ_{s ≤ τ} g(s, τ)² dN(s) / Y(s)²`.
///
/// Asymptotically equal to the influence-based variance; kept as a
/// cross-check because it cannot produce cross-tier terms.
pub fn martingale_variance(curve: &KmCurve, tau: f64) -> Result<f64> {
    check_tau(curve, tau)?;
    let g = g_values(curve, tau);
    Ok(g.values
        .iter()
        .enumerate()
        .map(|(k, gk)| {
            let y = curve.at_risk()[k] as f64;
            gk * gk * curve.events()[k] as f64 / (y * y)
        })
        .sum())
}

/// RMST vector, influence matrix and covariance for one arm.
pub fn estimate_arm(cohort: &Cohort, tau: f64) -> Result<RmstEstimate> {
    if cohort.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let n = cohort.len();
    let j_count = cohort.num_event_types();
    let mut rmst_values = Vec::with_capacity(j_count);
    let mut influence = DMatrix::zeros(n, j_count);
    let mut g_cache = Vec::with_capacity(j_count);
    for tier in 1..=j_count {
        let data = cohort.tier(tier)?;
        let curve = KmCurve::fit(&RiskTable::from_tier(&data)?);
        let value = rmst(&curve, tau).map_err(|e| with_tier(e, tier))?;
        let g = g_values(&curve, tau);
        let psi = influence_from_parts(&data, &curve, &g);
        influence.set_column(tier - 1, &nalgebra::DVector::from_vec(psi));
        rmst_values.push(value);
        g_cache.push(g);
    }

    let nf = n as f64;
    let mut cov = DMatrix::zeros(j_count, j_count);
    for a in 0..j_count {
        for b in a..j_count {
            let v = influence.column(a).dot(&influence.column(b)) / (nf * nf);
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(RmstEstimate {
        tau,
        n,
        rmst: rmst_values,
        cov,
        influence,
        g_cache,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::door::{validate_cohort, Arm, DoorConfig, SubjectRecord};

    fn one_tier(pairs: &[(f64, bool)]) -> Cohort {
        let recs = pairs
            .iter()
            .enumerate()
            .map(|(i, &(t, e))| SubjectRecord::new(format!("s{i}"), Arm::Control, vec![t], vec![e]))
            .collect();
        validate_cohort(recs, &DoorConfig::with_event_types(1).unwrap()).unwrap()
    }

    fn curve(c: &Cohort) -> KmCurve {
        KmCurve::fit(&RiskTable::from_tier(&c.tier(1).unwrap()).unwrap())
    }

    #[test]
    fn hand_integrated_rmst() {
        let c = one_tier(&[(1., true), (2., true), (3., false)]);
        assert!((rmst(&curve(&c), 3.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(rmst(&curve(&c), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn g_function_values() {
        let c = one_tier(&[(1., true), (2., true), (3., false)]);
        let km = curve(&c);
        assert_eq!(g_function(&km, 3.0, 3.0), 0.0);
        assert!((g_function(&km, 0.0, 3.0) + 2.0).abs() < 1e-15);
        assert!((g_function(&km, 1.0, 3.0) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn no_risk_at_tau_names_tier() {
        let c = one_tier(&[(1., true), (2., true), (3., false)]);
        assert!(matches!(
            rmst(&curve(&c), 3.5),
            Err(Error::NoRiskAtTau { tier: None, .. })
        ));
        assert!(matches!(
            estimate_arm(&c, 3.5),
            Err(Error::NoRiskAtTau { tier: Some(1), .. })
        ));
        assert!(matches!(rmst(&curve(&c), -1.0), Err(Error::InvalidTau(_))));
    }

    #[test]
    fn event_free_cohort() {
        let c = one_tier(&[(5., false), (6., false), (7., false)]);
        let est = estimate_arm(&c, 4.0).unwrap();
        assert_eq!(est.rmst(), &[4.0]);
        assert_eq!(est.cov()[(0, 0)], 0.0);
        assert!(est.influence().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn influence_three_subjects() {
        // Term by term: jumps at 1 (Y=3) and 2 (Y=2), g(1) = -1, g(2) = -1/3, n = 3.
        // w1 = -1 * 3/3 = -1, w2 = -1/3 * 3/2 = -1/2.
        // subject 1: own w1 - w1/3 = -2/3
        // subject 2: own w2 - (w1/3 + w2/2) = -1/2 + 1/3 + 1/4 = 1/12
        // subject 3: -(w1/3 + w2/2) = 7/12
        let c = one_tier(&[(1., true), (2., true), (3., false)]);
        let psi = influence_contributions(&c, 1, 3.0).unwrap();
        let expected = [-2.0 / 3.0, 1.0 / 12.0, 7.0 / 12.0];
        for (a, b) in psi.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
        assert!(psi.iter().sum::<f64>().abs() < 1e-14);
    }

    #[test]
    fn ordering_diagnostic() {
        let est =
            RmstEstimate::from_summary(2.0, vec![1.0, 0.9, 1.5], DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(est.ordering_violations(), vec![1]);
    }

    #[test]
    fn from_summary_checks_shape() {
        assert!(RmstEstimate::from_summary(1.0, vec![1.0, 2.0], DMatrix::zeros(3, 3)).is_err());
    }
}
