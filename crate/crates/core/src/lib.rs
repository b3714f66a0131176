//! Restricted mean survival times (RMSTs) over tiered DOOR event times.
//!
//! Each subject contributes nested event times `T_1 ≤ … ≤ T_K`, one per
//! worsening of the desirability-of-outcome ranking. Per tier the crate fits
//! a Kaplan-Meier curve, integrates it up to a restriction time τ, and builds
//! the joint covariance of the `K` RMSTs from per-subject influence
//! contributions. On top of that sit four tests (single tier, between arms,
//! within arm across tiers, overall Wald), a five-state trial simulator with
//! a Monte Carlo oracle, and replicated simulation studies.

pub mod dist;
pub mod door;
pub mod error;
pub mod inference;
pub mod io;
pub mod km;
pub mod oracle;
pub mod rmst;
pub mod sim;
pub mod study;

pub use door::{
    monotonize_trajectory, validate_cohort, Arm, Cohort, DoorConfig, LongitudinalRecord,
    SubjectRecord, TierData, Visit,
};
pub use error::{Error, Result, Violation};
pub use inference::{
    infer_between, infer_single, infer_wald, infer_within, InferenceResult, TestType,
};
pub use km::{build_risk_table, km_fit, KmCurve, RiskTable};
pub use oracle::{expected_observed_events_tier1, true_rmst1_closed_form, true_rmst_mc, TrueRmst};
pub use rmst::{estimate_arm, g_function, influence_contributions, rmst, RmstEstimate};
pub use sim::{simulate_arm, simulate_subject, SimConfig, TransitionRates};
pub use study::{run_power_study, run_table1_study, PowerRow, PowerTest, StudyRow};
