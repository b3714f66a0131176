//! Ground truth for the simulator: Monte Carlo true RMSTs (no censoring) and
//! closed forms for tier 1, where `T_1 ~ Exp(λ_1)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sim::{draw_event_times, subject_rng, TransitionRates, NUM_TIERS};

pub const DEFAULT_MC_REPS: usize = 1_000_000;

const CHUNK: usize = 8192;

#[derive(Debug, Clone, PartialEq)]
pub struct TrueRmst {
    pub tau: f64,
    /// `E[min(T_j, τ)]` per tier.
    pub values: Vec<f64>,
    pub mc_reps: usize,
    pub mc_standard_error: Vec<f64>,
}

/// Monte Carlo `E[min(T_j, τ)]` from `reps` uncensored subjects.
pub fn true_rmst_mc(rates: &TransitionRates, tau: f64, reps: usize, seed: u64) -> Result<TrueRmst> {
    Ok(true_rmst_mc_many(rates, &[tau], reps, seed)?.remove(0))
}

/// Same as [`true_rmst_mc`] for several `τ` from one set of draws.
pub fn true_rmst_mc_many(
    rates: &TransitionRates,
    taus: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<TrueRmst>> {
    if reps == 0 {
        return Err(Error::InsufficientReplicates {
            found: 0,
            required: 1,
        });
    }
    if let Some(&bad) = taus.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidTau(bad));
    }
    rates.validate()?;

    let width = taus.len() * NUM_TIERS;
    // per chunk: [sum | sum of squares], reduced in chunk order
    let chunks: Vec<Vec<f64>> = (0..reps.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; 2 * width];
            for i in c * CHUNK..((c + 1) * CHUNK).min(reps) {
                let t = draw_event_times(rates, &mut subject_rng(seed, i as u64));
                for (a, &tau) in taus.iter().enumerate() {
                    for j in 0..NUM_TIERS {
                        let v = t[j].min(tau);
                        acc[a * NUM_TIERS + j] += v;
                        acc[width + a * NUM_TIERS + j] += v * v;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; 2 * width];
    for chunk in &chunks {
        for (t, v) in total.iter_mut().zip(chunk) {
            *t += v;
        }
    }

    let r = reps as f64;
    Ok(taus
        .iter()
        .enumerate()
        .map(|(a, &tau)| {
            let mut values = Vec::with_capacity(NUM_TIERS);
            let mut se = Vec::with_capacity(NUM_TIERS);
            for j in 0..NUM_TIERS {
                let mean = total[a * NUM_TIERS + j] / r;
                let var = if reps > 1 {
                    ((total[width + a * NUM_TIERS + j] - r * mean * mean) / (r - 1.0)).max(0.0)
                } else {
                    0.0
                };
                values.push(mean);
                se.push((var / r).sqrt());
            }
            TrueRmst {
                tau,
                values,
                mc_reps: reps,
                mc_standard_error: se,
            }
        })
        .collect())
}

/// `(1 − e^{−λ_1 τ}) / λ_1`.
pub fn true_rmst1_closed_form(rates: &TransitionRates, tau: f64) -> f64 {
    let l = rates.exit_1();
    -(-l * tau).exp_m1() / l
}

/// Per-subject probability that a tier-1 event is observed by `τ`,
/// `P(T_1 ≤ min(C, τ))` with `C ~ Unif(0, censor_max)`:
///
/// `∫_0^{τ'} λ e^{−λt} (1 − t/c) dt`, `τ' = min(τ, c)`.
pub fn expected_observed_events_tier1(rates: &TransitionRates, censor_max: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let l = rates.exit_1();
    let upper = tau.min(censor_max);
    let e = (-l * upper).exp();
    (1.0 - e) - (1.0 - e * (1.0 + l * upper)) / (l * censor_max)
}
