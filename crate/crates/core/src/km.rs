//! Counting-process summaries and the Kaplan-Meier product-limit estimator.

use crate::door::{Cohort, TierData};
use crate::error::{Error, Result};

/// At-risk, event and censoring counts at each distinct observed time of one
/// tier.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTable {
    n: usize,
    times: Vec<f64>,
    at_risk: Vec<usize>,
    events: Vec<usize>,
    censored: Vec<usize>,
}

impl RiskTable {
    pub fn from_tier(data: &TierData) -> Result<Self> {
        let n = data.len();
        if n == 0 {
            return Err(Error::EmptyCohort);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| data.times[a].total_cmp(&data.times[b]));

        let mut times = Vec::new();
        let mut at_risk = Vec::new();
        let mut events = Vec::new();
        let mut censored = Vec::new();
        let mut remaining = n;
        let mut i = 0;
        while i < n {
            let t = data.times[order[i]];
            let (mut d, mut c) = (0, 0);
            while i < n && data.times[order[i]] == t {
                if data.events[order[i]] {
                    d += 1;
                } else {
                    c += 1;
                }
                i += 1;
            }
            times.push(t);
            at_risk.push(remaining);
            events.push(d);
            censored.push(c);
            remaining -= d + c;
        }
        Ok(RiskTable {
            n,
            times,
            at_risk,
            events,
            censored,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn at_risk(&self) -> &[usize] {
        &self.at_risk
    }

    pub fn events(&self) -> &[usize] {
        &self.events
    }

    pub fn censored(&self) -> &[usize] {
        &self.censored
    }

    /// `Y(t)`: subjects whose observed time is at least `t`.
    pub fn at_risk_at(&self, t: f64) -> usize {
        let idx = self.times.partition_point(|&s| s < t);
        self.at_risk.get(idx).copied().unwrap_or(0)
    }

    /// Estimated proportion at risk, `Y(t) / n`.
    pub fn pi_hat(&self, t: f64) -> f64 {
        self.at_risk_at(t) as f64 / self.n as f64
    }
}

/// Builds the risk table of 1-based `tier`.
pub fn build_risk_table(cohort: &Cohort, tier: usize) -> Result<RiskTable> {
    RiskTable::from_tier(&cohort.tier(tier)?)
}

/// Right-continuous step survival curve. Only event times are stored;
/// the curve is 1 before the first jump and flat after the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct KmCurve {
    times: Vec<f64>,
    at_risk: Vec<usize>,
    events: Vec<usize>,
    hazard: Vec<f64>,
    survival: Vec<f64>,
    // area under the curve on [0, times[k]]
    cum_area: Vec<f64>,
    n: usize,
    max_time: f64,
}

impl KmCurve {
    pub fn fit(table: &RiskTable) -> Self {
        let mut curve = KmCurve {
            times: Vec::new(),
            at_risk: Vec::new(),
            events: Vec::new(),
            hazard: Vec::new(),
            survival: Vec::new(),
            cum_area: Vec::new(),
            n: table.n,
            max_time: table.times.last().copied().unwrap_or(0.0),
        };
        let mut s = 1.0;
        let mut area = 0.0;
        let mut prev_t = 0.0;
        for ((&t, &y), &d) in table.times.iter().zip(&table.at_risk).zip(&table.events) {
            if d == 0 {
                continue;
            }
            area += s * (t - prev_t);
            prev_t = t;
            let dh = d as f64 / y as f64;
            s *= 1.0 - dh;
            curve.times.push(t);
            curve.at_risk.push(y);
            curve.events.push(d);
            curve.hazard.push(dh);
            curve.survival.push(s);
            curve.cum_area.push(area);
        }
        curve
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.times
    }

    pub fn survival(&self) -> &[f64] {
        &self.survival
    }

    /// Nelson-Aalen increments `dN(t) / Y(t)` at the jump times.
    pub fn hazard_increments(&self) -> &[f64] {
        &self.hazard
    }

    pub fn at_risk(&self) -> &[usize] {
        &self.at_risk
    }

    pub fn events(&self) -> &[usize] {
        &self.events
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest observed (event or censoring) time.
    pub fn max_time(&self) -> f64 {
        self.max_time
    }

    /// Whether anyone is still at risk at `t`, i.e. `Y(t) > 0`.
    pub fn has_risk_at(&self, t: f64) -> bool {
        self.n > 0 && t <= self.max_time
    }

    pub fn survival_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }

    /// Exact integral of the step curve over `[0, x]`.
    pub fn area_to(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let k = self.times.partition_point(|&s| s <= x);
        if k == 0 {
            x
        } else {
            self.cum_area[k - 1] + self.survival[k - 1] * (x - self.times[k - 1])
        }
    }

    /// Staircase vertices `(t, S(t))` starting at `(0, 1)`, one per jump.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        std::iter::once((0.0, 1.0))
            .chain(
                self.times
                    .iter()
                    .copied()
                    .zip(self.survival.iter().copied()),
            )
            .collect()
    }
}

pub fn km_fit(table: &RiskTable) -> KmCurve {
    KmCurve::fit(table)
}
