//! Replicated simulation studies: estimator performance against the Monte
//! Carlo truth, and rejection rates of the between-arm and Wald tests.
//!
//! Replicate `r` draws from seeds derived from `(config.seed, r)` only, so
//! the work fans out over replicates and the reduction runs in replicate
//! order. Output does not depend on the thread count.

use std::fmt;

use rayon::prelude::*;

use crate::dist::normal_quantile;
use crate::door::Arm;
use crate::error::{Error, Result};
use crate::inference::{infer_between, infer_wald};
use crate::oracle::TrueRmst;
use crate::rmst::estimate_arm;
use crate::sim::{derive_seed, simulate_arm, SimConfig, NUM_TIERS};

const TABLE1_STREAM: u64 = 1;
const POWER_STREAM: u64 = 2;
const ORACLE_STREAM: u64 = 3;

/// Summary of one (τ, tier) cell over replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub tier: usize,
    pub tau: f64,
    /// Mean estimate minus the oracle truth.
    pub bias: f64,
    /// Standard deviation of the estimates across replicates.
    pub se: f64,
    /// Mean estimated standard error.
    pub see: f64,
    /// Fraction of 95% intervals covering the truth.
    pub cp: f64,
    /// Mean number of observed tier events by τ.
    pub events: f64,
    /// Replicates with nobody at risk at τ in some tier; excluded above.
    pub failed_replicates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PowerTest {
    /// Between-arm test at a 1-based tier.
    BetweenTier(usize),
    WaldOverall,
}

impl fmt::Display for PowerTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PowerTest::BetweenTier(j) => write!(f, "between_tier_{j}"),
            PowerTest::WaldOverall => f.write_str("wald_overall"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerRow {
    pub test: PowerTest,
    pub n_per_arm: usize,
    pub tau: f64,
    /// Among replicates where the test could be computed.
    pub rejection_rate: f64,
    pub failed_replicates: usize,
}

fn require_replicates(found: usize, required: usize) -> Result<()> {
    if found < required {
        Err(Error::InsufficientReplicates { found, required })
    } else {
        Ok(())
    }
}

/// Seed of one arm in one replicate of a study stream.
pub fn replicate_seed(master: u64, stream: u64, replicate: usize, arm: Arm) -> u64 {
    derive_seed(master, &[stream, replicate as u64, arm.code() as u64])
}

/// Seed of the Monte Carlo oracle for one arm's rates.
pub fn oracle_seed(master: u64, arm: Arm) -> u64 {
    derive_seed(master, &[ORACLE_STREAM, arm.code() as u64])
}

struct CellDraw {
    estimate: f64,
    se: f64,
    events: usize,
}

/// Estimator performance for the control-arm rates at sample size `n`.
///
/// `truths` must contain an entry for every τ in `config.tau_list`.
pub fn run_table1_study(
    config: &SimConfig,
    n: usize,
    truths: &[TrueRmst],
) -> Result<Vec<StudyRow>> {
    require_replicates(config.replicates, 2)?;
    config.validate()?;
    let truth_for = |tau: f64| {
        truths
            .iter()
            .find(|t| t.tau == tau)
            .ok_or_else(|| Error::Config(format!("no oracle truth for tau = {tau}")))
    };
    let truths: Vec<&TrueRmst> = config
        .tau_list
        .iter()
        .map(|&t| truth_for(t))
        .collect::<Result<_>>()?;

    // [replicate][tau] -> per-tier draws, None when estimation failed
    let draws: Vec<Vec<Option<Vec<CellDraw>>>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = replicate_seed(config.seed, TABLE1_STREAM, r, Arm::Control);
            let cohort = simulate_arm(
                &config.rates_control,
                n,
                config.censor_max,
                seed,
                Arm::Control,
            );
            config
                .tau_list
                .iter()
                .map(|&tau| {
                    let est = estimate_arm(&cohort, tau).ok()?;
                    Some(
                        (1..=NUM_TIERS)
                            .map(|j| CellDraw {
                                estimate: est.rmst()[j - 1],
                                se: est.std_error(j),
                                events: cohort.tier(j).map(|d| d.events_by(tau)).unwrap_or(0),
                            })
                            .collect(),
                    )
                })
                .collect()
        })
        .collect();

    let z = normal_quantile(0.975);
    let mut rows = Vec::with_capacity(config.tau_list.len() * NUM_TIERS);
    for (a, &tau) in config.tau_list.iter().enumerate() {
        let ok: Vec<&Vec<CellDraw>> = draws.iter().filter_map(|d| d[a].as_ref()).collect();
        let failed = config.replicates - ok.len();
        for j in 0..NUM_TIERS {
            let truth = truths[a].values[j];
            let m = ok.len() as f64;
            let cells = || ok.iter().map(|d| &d[j]);
            let mean = cells().map(|c| c.estimate).sum::<f64>() / m;
            let var = cells().map(|c| (c.estimate - mean).powi(2)).sum::<f64>() / (m - 1.0);
            let see = cells().map(|c| c.se).sum::<f64>() / m;
            let covered = cells()
                .filter(|c| (c.estimate - truth).abs() <= z * c.se)
                .count() as f64;
            let events = cells().map(|c| c.events as f64).sum::<f64>() / m;
            rows.push(StudyRow {
                tier: j + 1,
                tau,
                bias: mean - truth,
                se: var.sqrt(),
                see,
                cp: covered / m,
                events,
                failed_replicates: failed,
            });
        }
    }
    Ok(rows)
}

/// Rejection rates of the per-tier between-arm tests and the Wald test for
/// every `(n, τ)` in the configuration grid (treatment vs control rates).
///
/// Smaller sample sizes reuse the leading subjects of the largest one.
pub fn run_power_study(config: &SimConfig, alpha: f64) -> Result<Vec<PowerRow>> {
    require_replicates(config.replicates, 100)?;
    config.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let n_max = *config.n_per_arm.iter().max().expect("validated");
    let tests: Vec<PowerTest> = (1..=NUM_TIERS)
        .map(PowerTest::BetweenTier)
        .chain(std::iter::once(PowerTest::WaldOverall))
        .collect();

    // [replicate][n][tau][test] -> Some(reject) or None
    let draws: Vec<Vec<Vec<Vec<Option<bool>>>>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let control = simulate_arm(
                &config.rates_control,
                n_max,
                config.censor_max,
                replicate_seed(config.seed, POWER_STREAM, r, Arm::Control),
                Arm::Control,
            );
            let treatment = simulate_arm(
                &config.rates_treatment,
                n_max,
                config.censor_max,
                replicate_seed(config.seed, POWER_STREAM, r, Arm::Treatment),
                Arm::Treatment,
            );
            config
                .n_per_arm
                .iter()
                .map(|&n| {
                    let c = control.prefix(n);
                    let t = treatment.prefix(n);
                    config
                        .tau_list
                        .iter()
                        .map(|&tau| {
                            let (Ok(ec), Ok(et)) = (estimate_arm(&c, tau), estimate_arm(&t, tau))
                            else {
                                return vec![None; tests.len()];
                            };
                            tests
                                .iter()
                                .map(|test| match *test {
                                    PowerTest::BetweenTier(j) => {
                                        infer_between(&et, &ec, j, alpha).ok().map(|x| x.rejects())
                                    }
                                    PowerTest::WaldOverall => {
                                        infer_wald(&et, &ec, alpha).ok().map(|x| x.rejects())
                                    }
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::new();
    for (ni, &n) in config.n_per_arm.iter().enumerate() {
        for (ti, &tau) in config.tau_list.iter().enumerate() {
            for (k, &test) in tests.iter().enumerate() {
                let outcomes: Vec<bool> = draws.iter().filter_map(|d| d[ni][ti][k]).collect();
                let rejected = outcomes.iter().filter(|&&x| x).count();
                rows.push(PowerRow {
                    test,
                    n_per_arm: n,
                    tau,
                    rejection_rate: if outcomes.is_empty() {
                        f64::NAN
                    } else {
                        rejected as f64 / outcomes.len() as f64
                    },
                    failed_replicates: config.replicates - outcomes.len(),
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::true_rmst_mc_many;
    use crate::sim::TransitionRates;

    fn config(replicates: usize) -> SimConfig {
        let alt = TransitionRates::new([0.5, 0.2, 0.1, 1.0, 0.4, 0.2, 0.6, 0.3, 0.3]).unwrap();
        let null =
            TransitionRates::new([0.3, 0.15, 0.06, 0.6, 0.3, 0.12, 0.36, 0.24, 0.24]).unwrap();
        SimConfig {
            rates_control: alt,
            rates_treatment: null,
            n_per_arm: vec![60, 120],
            censor_max: 4.0,
            tau_list: vec![1.0, 2.0],
            seed: 17,
            replicates,
        }
    }

    #[test]
    fn too_few_replicates() {
        let cfg = config(1);
        assert!(matches!(
            run_table1_study(&cfg, 50, &[]),
            Err(Error::InsufficientReplicates {
                found: 1,
                required: 2
            })
        ));
        assert!(matches!(
            run_power_study(&config(50), 0.05),
            Err(Error::InsufficientReplicates { required: 100, .. })
        ));
    }

    #[test]
    fn missing_truth_is_reported() {
        let cfg = config(5);
        let truths = true_rmst_mc_many(&cfg.rates_control, &[1.0], 1000, 1).unwrap();
        assert!(matches!(
            run_table1_study(&cfg, 50, &truths),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn table1_small_run_is_sane_and_deterministic() {
        let cfg = config(40);
        let truths = true_rmst_mc_many(&cfg.rates_control, &cfg.tau_list, 100_000, 3).unwrap();
        let a = run_table1_study(&cfg, 100, &truths).unwrap();
        let b = run_table1_study(&cfg, 100, &truths).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
        for row in &a {
            assert!(row.se >= 0.0 && row.see >= 0.0);
            assert!((0.0..=1.0).contains(&row.cp));
            assert!(row.bias.abs() < 0.05);
            assert_eq!(row.failed_replicates, 0);
        }
    }

    #[test]
    fn power_rows_cover_grid() {
        let cfg = config(100);
        let rows = run_power_study(&cfg, 0.05).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 5);
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.rejection_rate)));
        assert_eq!(rows[0].test.to_string(), "between_tier_1");
        assert_eq!(rows[4].test.to_string(), "wald_overall");
    }
}
