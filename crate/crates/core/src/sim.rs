//! Five-state progressive multistate generator.
//!
//! States: 1 = initial, 2 = first stroke/bleed, 3 = second stroke/bleed,
//! 4 = disability, 5 = death. Allowed moves are 1→{2,4,5}, 2→{3,4,5},
//! 3→{4,5} and 4→5, each with a constant hazard. Sojourn times are
//! exponential with the state's total exit rate and the destination is drawn
//! with probability `λ_jk / λ_j`. Tier times are the entry times into
//! "level ≥ 2, ≥ 3, ≥ 4, = 5" on the DOOR scale, so `T_1 ≤ T_2 ≤ T_3 ≤ T_4`,
//! and each gap is added to the previous event time.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::door::{Arm, Cohort, SubjectRecord};
use crate::error::{Error, Result};

/// Number of tiered event times produced by the generator.
pub const NUM_TIERS: usize = 4;

/// Nine constant transition hazards, in the order
/// `λ12, λ14, λ15, λ23, λ24, λ25, λ34, λ35, λ45`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TransitionRates {
    pub l12: f64,
    pub l14: f64,
    pub l15: f64,
    pub l23: f64,
    pub l24: f64,
    pub l25: f64,
    pub l34: f64,
    pub l35: f64,
    pub l45: f64,
}

impl TransitionRates {
    pub fn new(r: [f64; 9]) -> Result<Self> {
        let rates = TransitionRates {
            l12: r[0],
            l14: r[1],
            l15: r[2],
            l23: r[3],
            l24: r[4],
            l25: r[5],
            l34: r[6],
            l35: r[7],
            l45: r[8],
        };
        rates.validate()?;
        Ok(rates)
    }

    pub fn as_array(&self) -> [f64; 9] {
        [
            self.l12, self.l14, self.l15, self.l23, self.l24, self.l25, self.l34, self.l35,
            self.l45,
        ]
    }

    /// Total exit rate of state 1.
    pub fn exit_1(&self) -> f64 {
        self.l12 + self.l14 + self.l15
    }

    pub fn exit_2(&self) -> f64 {
        self.l23 + self.l24 + self.l25
    }

    pub fn exit_3(&self) -> f64 {
        self.l34 + self.l35
    }

    pub fn exit_4(&self) -> f64 {
        self.l45
    }

    /// Every rate finite and nonnegative, and every state that can be entered
    /// has a positive exit rate.
    pub fn validate(&self) -> Result<()> {
        if let Some(bad) = self.as_array().iter().find(|r| !r.is_finite() || **r < 0.0) {
            return Err(Error::InvalidRates(format!(
                "rates must be finite and nonnegative, got {bad}"
            )));
        }
        let reach_2 = self.l12 > 0.0;
        let reach_3 = reach_2 && self.l23 > 0.0;
        let reach_4 = self.l14 > 0.0 || (reach_2 && self.l24 > 0.0) || (reach_3 && self.l34 > 0.0);
        let checks = [
            (true, self.exit_1(), 1),
            (reach_2, self.exit_2(), 2),
            (reach_3, self.exit_3(), 3),
            (reach_4, self.exit_4(), 4),
        ];
        for (reachable, exit, state) in checks {
            if reachable && exit <= 0.0 {
                return Err(Error::InvalidRates(format!(
                    "state {state} is reachable but has zero exit rate"
                )));
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for TransitionRates {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        let arr: [f64; 9] = v.try_into().map_err(|v: Vec<f64>| {
            Error::InvalidRates(format!("expected 9 rates, got {}", v.len()))
        })?;
        TransitionRates::new(arr)
    }
}

impl From<TransitionRates> for Vec<f64> {
    fn from(r: TransitionRates) -> Self {
        r.as_array().to_vec()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub rates_control: TransitionRates,
    pub rates_treatment: TransitionRates,
    /// Sample sizes per arm to study; a single trial uses the first.
    pub n_per_arm: Vec<usize>,
    /// Censoring times are `Unif(0, censor_max)`.
    pub censor_max: f64,
    pub tau_list: Vec<f64>,
    pub seed: u64,
    pub replicates: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.rates_control.validate()?;
        self.rates_treatment.validate()?;
        if self.n_per_arm.is_empty() || self.n_per_arm.contains(&0) {
            return Err(Error::Config("n_per_arm entries must be positive".into()));
        }
        if !(self.censor_max > 0.0) || !self.censor_max.is_finite() {
            return Err(Error::Config("censor_max must be positive".into()));
        }
        if self.tau_list.is_empty() || self.tau_list.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::Config("tau entries must be positive".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for a labelled sub-task (replicate, arm, ...).
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(mix(master), |acc, &l| mix(acc ^ mix(l)))
}

/// Independent generator for subject `index` under `seed`; the ChaCha stream
/// id carries the index so streams never overlap.
pub fn subject_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn exponential<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    // 1 - U lies in (0, 1]
    let u = 1.0 - rng.random::<f64>();
    -u.ln() / rate
}

/// Picks an index with probability proportional to `weights`.
fn categorical<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // rounding at the upper edge: last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Uncensored tier times `(T_1, T_2, T_3, T_4)` of one subject.
pub fn draw_event_times<R: Rng + ?Sized>(rates: &TransitionRates, rng: &mut R) -> [f64; NUM_TIERS] {
    let to_death = |from: f64, rng: &mut R| from + exponential(rates.exit_4(), rng);

    let t1 = exponential(rates.exit_1(), rng);
    match categorical(&[rates.l12, rates.l14, rates.l15], rates.exit_1(), rng) {
        2 => return [t1; 4],
        1 => return [t1, t1, t1, to_death(t1, rng)],
        _ => {}
    }

    let t2 = t1 + exponential(rates.exit_2(), rng);
    match categorical(&[rates.l23, rates.l24, rates.l25], rates.exit_2(), rng) {
        2 => return [t1, t2, t2, t2],
        1 => return [t1, t2, t2, to_death(t2, rng)],
        _ => {}
    }

    let t3 = t2 + exponential(rates.exit_3(), rng);
    match categorical(&[rates.l34, rates.l35], rates.exit_3(), rng) {
        1 => [t1, t2, t3, t3],
        _ => [t1, t2, t3, to_death(t3, rng)],
    }
}

/// Applies independent `Unif(0, censor_max)` censoring to tier times:
/// `D_j = 1` iff `C ≥ T_j`, observed time `min(T_j, C)`.
pub fn censor<R: Rng + ?Sized>(
    times: [f64; NUM_TIERS],
    censor_max: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<bool>) {
    let c = censor_max * rng.random::<f64>();
    times.iter().map(|&t| (t.min(c), c >= t)).unzip()
}

pub fn simulate_subject<R: Rng + ?Sized>(
    rates: &TransitionRates,
    censor_max: f64,
    subject_id: String,
    arm: Arm,
    rng: &mut R,
) -> SubjectRecord {
    let truth = draw_event_times(rates, rng);
    let (times, events) = censor(truth, censor_max, rng);
    SubjectRecord {
        subject_id,
        arm,
        times,
        events,
    }
}

/// `n` subjects of one arm. Subject `i` draws from `subject_rng(seed, i)`,
/// so the first `m` subjects are the same for every `n ≥ m`.
pub fn simulate_arm(
    rates: &TransitionRates,
    n: usize,
    censor_max: f64,
    seed: u64,
    arm: Arm,
) -> Cohort {
    let prefix = match arm {
        Arm::Control => 'c',
        Arm::Treatment => 't',
    };
    let records = (0..n)
        .map(|i| {
            let mut rng = subject_rng(seed, i as u64);
            simulate_subject(
                rates,
                censor_max,
                format!("{prefix}{}", i + 1),
                arm,
                &mut rng,
            )
        })
        .collect();
    Cohort::from_valid(NUM_TIERS, records)
}

/// Per-arm seed used by [`simulate_trial`].
pub fn arm_seed(seed: u64, arm: Arm) -> u64 {
    derive_seed(seed, &[arm.code() as u64])
}

/// Both arms of one trial with `n` subjects each, control first.
pub fn simulate_trial(config: &SimConfig, n: usize, seed: u64) -> Cohort {
    let control = simulate_arm(
        &config.rates_control,
        n,
        config.censor_max,
        arm_seed(seed, Arm::Control),
        Arm::Control,
    );
    let treatment = simulate_arm(
        &config.rates_treatment,
        n,
        config.censor_max,
        arm_seed(seed, Arm::Treatment),
        Arm::Treatment,
    );
    control
        .merge(treatment)
        .expect("both arms have the same tier count")
}
