use std::fmt;

use thiserror::Error;

/// A single record-level problem found while validating a cohort.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `X_tier < X_{tier-1}`.
    NonMonotoneTimes { subject_id: String, tier: usize },
    /// A censored tier was followed by an event, or by a different time.
    CensoringNotPropagated { subject_id: String, tier: usize },
    ArityMismatch {
        subject_id: String,
        expected: usize,
        found: usize,
    },
    /// Negative, NaN or infinite observed time.
    InvalidTime { subject_id: String, tier: usize },
}

impl Violation {
    pub fn subject_id(&self) -> &str {
        match self {
            Violation::NonMonotoneTimes { subject_id, .. }
            | Violation::CensoringNotPropagated { subject_id, .. }
            | Violation::ArityMismatch { subject_id, .. }
            | Violation::InvalidTime { subject_id, .. } => subject_id,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonMonotoneTimes { subject_id, tier } => {
                write!(
                    f,
                    "subject {subject_id}: time at tier {tier} is below the previous tier"
                )
            }
            Violation::CensoringNotPropagated { subject_id, tier } => write!(
                f,
                "subject {subject_id}: censoring not propagated to tier {tier}"
            ),
            Violation::ArityMismatch {
                subject_id,
                expected,
                found,
            } => write!(
                f,
                "subject {subject_id}: expected {expected} tiers, found {found}"
            ),
            Violation::InvalidTime { subject_id, tier } => {
                write!(f, "subject {subject_id}: invalid time at tier {tier}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cohort validation failed for {} record(s): {}", .0.len(), join_violations(.0))]
    Validation(Vec<Violation>),

    #[error("subject {0}: trajectory has no visits")]
    EmptyTrajectory(String),

    #[error("subject {subject_id}: visit days must be strictly increasing (visit {visit})")]
    NonIncreasingVisits { subject_id: String, visit: usize },

    #[error("subject {subject_id}: DOOR level {level} outside 1..={max}")]
    LevelOutOfRange {
        subject_id: String,
        level: u32,
        max: u32,
    },

    #[error("invalid DOOR configuration: {0}")]
    InvalidDoorConfig(String),

    #[error("cohort is empty")]
    EmptyCohort,

    #[error("tier {tier} out of range 1..={max}")]
    TierOutOfRange { tier: usize, max: usize },

    #[error("tiers must differ (got {0} twice)")]
    SameTier(usize),

    #[error("no subject at risk at tau = {tau}{}; lower tau", tier_suffix(*.tier))]
    NoRiskAtTau { tier: Option<usize>, tau: f64 },

    #[error("invalid restriction time tau = {0}")]
    InvalidTau(f64),

    #[error("estimates use different tau ({0} vs {1})")]
    TauMismatch(f64, f64),

    #[error("estimates have different numbers of tiers ({0} vs {1})")]
    TierCountMismatch(usize, usize),

    #[error(
        "combined covariance is singular (reciprocal condition {rcond:.3e}); \
         drop tiers without events or lower tau"
    )]
    SingularCovariance { rcond: f64 },

    #[error("at most {max} tiers are supported, got {found}")]
    TooManyTiers { found: usize, max: usize },

    #[error("invalid alpha {0}; must lie in (0, 1)")]
    InvalidAlpha(f64),

    #[error("invalid transition rates: {0}")]
    InvalidRates(String),

    #[error("at least {required} replicates required, got {found}")]
    InsufficientReplicates { found: usize, required: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn tier_suffix(tier: Option<usize>) -> String {
    tier.map(|t| format!(" for tier {t}")).unwrap_or_default()
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
