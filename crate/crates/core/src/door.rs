//! Tiered DOOR event data.
//!
//! A DOOR (desirability of outcome ranking) scale with `K + 1` ordinal levels
//! yields `K` nested event times per subject: tier `j` is the first time the
//! subject reaches level `j + 1` or worse. Observed times are nondecreasing
//! across tiers and censoring at one tier censors every worse tier at the same
//! time.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    Control,
    Treatment,
}

impl Arm {
    /// Wire code used in CSV files: 0 = control, 1 = treatment.
    pub fn code(self) -> u8 {
        match self {
            Arm::Control => 0,
            Arm::Treatment => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Arm> {
        match code {
            0 => Some(Arm::Control),
            1 => Some(Arm::Treatment),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Arm::Control => "control",
            Arm::Treatment => "treatment",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "0" => Ok(Arm::Control),
            "1" => Ok(Arm::Treatment),
            other => Err(format!("arm must be 0 or 1, got {other:?}")),
        }
    }
}

/// Level labels of a DOOR scale, best first. The number of tiered event
/// times is one less than the number of levels.
#[derive(Debug, Clone, PartialEq)]
pub struct DoorConfig {
    labels: Vec<String>,
}

impl DoorConfig {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidDoorConfig(
                "at least two levels are required".into(),
            ));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if label.trim().is_empty() {
                return Err(Error::InvalidDoorConfig("empty level label".into()));
            }
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidDoorConfig(format!(
                    "duplicate level label {label:?}"
                )));
            }
        }
        Ok(DoorConfig { labels })
    }

    /// Generic labels `level 1` .. `level K+1`.
    pub fn with_event_types(num_event_types: usize) -> Result<Self> {
        if num_event_types == 0 {
            return Err(Error::InvalidDoorConfig(
                "at least one event type is required".into(),
            ));
        }
        Self::new(
            (1..=num_event_types + 1)
                .map(|l| format!("level {l}"))
                .collect(),
        )
    }

    pub fn num_event_types(&self) -> usize {
        self.labels.len() - 1
    }

    pub fn num_levels(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub arm: Arm,
    /// Observed times `X_1 <= ... <= X_K`.
    pub times: Vec<f64>,
    /// `true` where the tier event was observed, `false` where censored.
    pub events: Vec<bool>,
}

impl SubjectRecord {
    pub fn new(
        subject_id: impl Into<String>,
        arm: Arm,
        times: Vec<f64>,
        events: Vec<bool>,
    ) -> Self {
        SubjectRecord {
            subject_id: subject_id.into(),
            arm,
            times,
            events,
        }
    }

    /// First violated invariant, if any. Tiers are reported 1-based.
    fn check(&self, num_event_types: usize) -> Option<Violation> {
        let id = || self.subject_id.clone();
        if self.times.len() != num_event_types || self.events.len() != num_event_types {
            let found = if self.times.len() != num_event_types {
                self.times.len()
            } else {
                self.events.len()
            };
            return Some(Violation::ArityMismatch {
                subject_id: id(),
                expected: num_event_types,
                found,
            });
        }
        for (j, &t) in self.times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Some(Violation::InvalidTime {
                    subject_id: id(),
                    tier: j + 1,
                });
            }
        }
        for j in 1..num_event_types {
            if self.times[j] < self.times[j - 1] {
                return Some(Violation::NonMonotoneTimes {
                    subject_id: id(),
                    tier: j + 1,
                });
            }
        }
        if let Some(first_censored) = self.events.iter().position(|&e| !e) {
            let c = self.times[first_censored];
            for k in first_censored + 1..num_event_types {
                if self.events[k] || self.times[k] != c {
                    return Some(Violation::CensoringNotPropagated {
                        subject_id: id(),
                        tier: k + 1,
                    });
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Visit {
    pub day: f64,
    /// Ordinal DOOR level, 1 = most desirable.
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalRecord {
    pub subject_id: String,
    pub arm: Arm,
    pub visits: Vec<Visit>,
}

/// A set of records that all satisfy the tier invariants.
///
/// Only obtainable through [`validate_cohort`] (or the simulator, which
/// produces valid records by construction).
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    num_event_types: usize,
    records: Vec<SubjectRecord>,
}

impl Cohort {
    pub(crate) fn from_valid(num_event_types: usize, records: Vec<SubjectRecord>) -> Self {
        debug_assert!(records.iter().all(|r| r.check(num_event_types).is_none()));
        Cohort {
            num_event_types,
            records,
        }
    }

    pub fn num_event_types(&self) -> usize {
        self.num_event_types
    }

    pub fn records(&self) -> &[SubjectRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<SubjectRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Subcohort of one arm, keeping record order.
    pub fn arm(&self, arm: Arm) -> Cohort {
        Cohort {
            num_event_types: self.num_event_types,
            records: self
                .records
                .iter()
                .filter(|r| r.arm == arm)
                .cloned()
                .collect(),
        }
    }

    /// Observed `(time, event)` pairs for 1-based `tier`.
    pub fn tier(&self, tier: usize) -> Result<TierData> {
        if tier == 0 || tier > self.num_event_types {
            return Err(Error::TierOutOfRange {
                tier,
                max: self.num_event_types,
            });
        }
        let j = tier - 1;
        Ok(TierData {
            times: self.records.iter().map(|r| r.times[j]).collect(),
            events: self.records.iter().map(|r| r.events[j]).collect(),
        })
    }

    /// The first `n` records (all of them if `n` exceeds the size).
    pub fn prefix(&self, n: usize) -> Cohort {
        Cohort {
            num_event_types: self.num_event_types,
            records: self.records[..n.min(self.records.len())].to_vec(),
        }
    }

    /// Concatenation of two cohorts with the same tier count.
    pub fn merge(mut self, other: Cohort) -> Result<Cohort> {
        if self.num_event_types != other.num_event_types {
            return Err(Error::TierCountMismatch(
                self.num_event_types,
                other.num_event_types,
            ));
        }
        self.records.extend(other.records);
        Ok(self)
    }
}

/// Right-censored data for a single tier, in cohort record order.
#[derive(Debug, Clone, PartialEq)]
pub struct TierData {
    pub times: Vec<f64>,
    pub events: Vec<bool>,
}

impl TierData {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of observed events at or before `tau`.
    pub fn events_by(&self, tau: f64) -> usize {
        self.times
            .iter()
            .zip(&self.events)
            .filter(|&(&t, &e)| e && t <= tau)
            .count()
    }
}

/// Checks every record and returns the cohort, or all violations found
/// (one per offending record).
pub fn validate_cohort(records: Vec<SubjectRecord>, config: &DoorConfig) -> Result<Cohort> {
    let k = config.num_event_types();
    let violations: Vec<Violation> = records.iter().filter_map(|r| r.check(k)).collect();
    if violations.is_empty() {
        Ok(Cohort {
            num_event_types: k,
            records,
        })
    } else {
        Err(Error::Validation(violations))
    }
}

/// Running maximum of ordinal levels (worst-so-far, since 1 is best).
pub fn worst_so_far(levels: &[u32]) -> Vec<u32> {
    levels
        .iter()
        .scan(0u32, |worst, &l| {
            *worst = (*worst).max(l);
            Some(*worst)
        })
        .collect()
}

/// Converts visit-level ordinal states into one tiered event-time record.
///
/// Tier `j` fires at the first visit whose worst-so-far level is at least
/// `j + 1`. Unreached tiers are censored at the last visit day.
pub fn monotonize_trajectory(
    rec: &LongitudinalRecord,
    config: &DoorConfig,
) -> Result<SubjectRecord> {
    let Some(last) = rec.visits.last() else {
        return Err(Error::EmptyTrajectory(rec.subject_id.clone()));
    };
    let max_level = config.num_levels() as u32;
    for (i, v) in rec.visits.iter().enumerate() {
        if !v.day.is_finite() || v.day < 0.0 || (i > 0 && v.day <= rec.visits[i - 1].day) {
            return Err(Error::NonIncreasingVisits {
                subject_id: rec.subject_id.clone(),
                visit: i + 1,
            });
        }
        if v.level == 0 || v.level > max_level {
            return Err(Error::LevelOutOfRange {
                subject_id: rec.subject_id.clone(),
                level: v.level,
                max: max_level,
            });
        }
    }

    let levels: Vec<u32> = rec.visits.iter().map(|v| v.level).collect();
    let worst = worst_so_far(&levels);
    let k = config.num_event_types();
    let mut times = Vec::with_capacity(k);
    let mut events = Vec::with_capacity(k);
    for tier in 1..=k {
        let threshold = tier as u32 + 1;
        match worst.iter().position(|&w| w >= threshold) {
            Some(i) => {
                times.push(rec.visits[i].day);
                events.push(true);
            }
            None => {
                times.push(last.day);
                events.push(false);
            }
        }
    }
    Ok(SubjectRecord {
        subject_id: rec.subject_id.clone(),
        arm: rec.arm,
        times,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(times: &[f64], events: &[u8]) -> SubjectRecord {
        SubjectRecord::new(
            "s1",
            Arm::Control,
            times.to_vec(),
            events.iter().map(|&e| e == 1).collect(),
        )
    }

    fn four() -> DoorConfig {
        DoorConfig::with_event_types(4).unwrap()
    }

    fn longitudinal(days: &[f64], levels: &[u32]) -> LongitudinalRecord {
        LongitudinalRecord {
            subject_id: "p".into(),
            arm: Arm::Treatment,
            visits: days
                .iter()
                .zip(levels)
                .map(|(&day, &level)| Visit { day, level })
                .collect(),
        }
    }

    #[test]
    fn accepts_fully_ordered_events() {
        let c = validate_cohort(vec![rec(&[1., 2., 3., 4.], &[1, 1, 1, 1])], &four()).unwrap();
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn accepts_propagated_censoring() {
        assert!(validate_cohort(vec![rec(&[1., 2., 2., 2.], &[1, 0, 0, 0])], &four()).is_ok());
    }

    #[test]
    fn rejects_event_after_censoring() {
        let err =
            validate_cohort(vec![rec(&[1., 2., 3., 4.], &[1, 0, 1, 1])], &four()).unwrap_err();
        match err {
            Error::Validation(v) => assert_eq!(
                v,
                vec![Violation::CensoringNotPropagated {
                    subject_id: "s1".into(),
                    tier: 3
                }]
            ),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reports_every_bad_record() {
        let mut a = rec(&[2., 1., 3., 4.], &[1, 1, 1, 1]);
        a.subject_id = "a".into();
        let mut b = rec(&[1., 2., 3.], &[1, 1, 1]);
        b.subject_id = "b".into();
        let good = rec(&[1., 1., 1., 1.], &[0, 0, 0, 0]);
        let Err(Error::Validation(v)) = validate_cohort(vec![a, good, b], &four()) else {
            panic!("expected validation error");
        };
        assert_eq!(v.len(), 2);
        assert_eq!(
            v[0],
            Violation::NonMonotoneTimes {
                subject_id: "a".into(),
                tier: 2
            }
        );
        assert!(matches!(
            v[1],
            Violation::ArityMismatch {
                expected: 4,
                found: 3,
                ..
            }
        ));
    }

    #[test]
    fn rejects_negative_time() {
        let r = validate_cohort(vec![rec(&[-1., 2., 3., 4.], &[1, 1, 1, 1])], &four());
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn config_rules() {
        assert!(DoorConfig::new(vec!["a".into()]).is_err());
        assert!(DoorConfig::new(vec!["a".into(), "a".into()]).is_err());
        assert!(DoorConfig::with_event_types(0).is_err());
        assert_eq!(four().num_levels(), 5);
    }

    #[test]
    fn worst_so_far_running_max() {
        assert_eq!(worst_so_far(&[1, 2, 1, 3]), vec![1, 2, 2, 3]);
    }

    #[test]
    fn no_events_censors_at_last_visit() {
        let cfg = DoorConfig::with_event_types(3).unwrap();
        let r = monotonize_trajectory(&longitudinal(&[0., 7., 14.], &[1, 1, 1]), &cfg).unwrap();
        assert_eq!(r.times, vec![14., 14., 14.]);
        assert_eq!(r.events, vec![false, false, false]);
    }

    #[test]
    fn death_closes_remaining_tiers() {
        let cfg = DoorConfig::with_event_types(3).unwrap();
        let r = monotonize_trajectory(&longitudinal(&[0., 7., 10.], &[1, 2, 4]), &cfg).unwrap();
        assert_eq!(r.times, vec![7., 10., 10.]);
        assert_eq!(r.events, vec![true, true, true]);
    }

    #[test]
    fn improvement_does_not_undo_an_event() {
        let cfg = DoorConfig::with_event_types(3).unwrap();
        let r =
            monotonize_trajectory(&longitudinal(&[0., 7., 14., 21.], &[1, 2, 1, 3]), &cfg).unwrap();
        assert_eq!(r.times, vec![7., 21., 21.]);
        assert_eq!(r.events, vec![true, true, false]);
    }

    #[test]
    fn trajectory_errors() {
        let cfg = DoorConfig::with_event_types(3).unwrap();
        assert!(matches!(
            monotonize_trajectory(&longitudinal(&[], &[]), &cfg),
            Err(Error::EmptyTrajectory(_))
        ));
        assert!(matches!(
            monotonize_trajectory(&longitudinal(&[0., 0.], &[1, 1]), &cfg),
            Err(Error::NonIncreasingVisits { visit: 2, .. })
        ));
        assert!(matches!(
            monotonize_trajectory(&longitudinal(&[0.], &[5]), &cfg),
            Err(Error::LevelOutOfRange { level: 5, .. })
        ));
    }

    fn trajectory() -> impl Strategy<Value = (usize, LongitudinalRecord)> {
        (1usize..6).prop_flat_map(|k| {
            prop::collection::vec((0.1f64..10.0, 1u32..=(k as u32 + 1)), 1..12).prop_map(
                move |steps| {
                    let mut day = 0.0;
                    let visits = steps
                        .into_iter()
                        .map(|(gap, level)| {
                            day += gap;
                            Visit { day, level }
                        })
                        .collect();
                    (
                        k,
                        LongitudinalRecord {
                            subject_id: "p".into(),
                            arm: Arm::Control,
                            visits,
                        },
                    )
                },
            )
        })
    }

    proptest! {
        #[test]
        fn monotonized_records_validate((k, traj) in trajectory()) {
            let cfg = DoorConfig::with_event_types(k).unwrap();
            let r = monotonize_trajectory(&traj, &cfg).unwrap();
            prop_assert!(r.times.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(validate_cohort(vec![r], &cfg).is_ok());
        }

        #[test]
        fn worst_so_far_is_idempotent(levels in prop::collection::vec(1u32..8, 0..20)) {
            let once = worst_so_far(&levels);
            prop_assert_eq!(worst_so_far(&once), once);
        }
    }
}
