//! Analysis reports and study tables.
//!
//! Human-readable tables print at a fixed number of decimals; CSV output
//! uses the shortest decimal form that reads back to the same `f64`.

use std::fmt::Write as _;

use crate::dist::normal_quantile;
use crate::door::{Arm, Cohort};
use crate::error::{Error, Result};
use crate::inference::{infer_between, infer_single, infer_wald, infer_within, InferenceResult};
use crate::io::config::TestPlan;
use crate::km::{build_risk_table, km_fit};
use crate::oracle::TrueRmst;
use crate::rmst::{estimate_arm, RmstEstimate};
use crate::study::{PowerRow, StudyRow};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub tool_version: String,
    pub config_sha256: String,
    pub input_sha256: String,
    pub n_control: usize,
    pub n_treatment: usize,
    pub num_tiers: usize,
    pub taus: Vec<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmSummary {
    pub arm: Arm,
    pub estimate: RmstEstimate,
    /// Normal `1 − α` interval per tier.
    pub intervals: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleResult {
    pub arm: Arm,
    pub tier: usize,
    pub result: InferenceResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WithinResult {
    pub arm: Arm,
    /// Reported as `RMST_k − RMST_j`.
    pub tier_j: usize,
    pub tier_k: usize,
    pub result: InferenceResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauSection {
    pub tau: f64,
    pub control: ArmSummary,
    pub treatment: ArmSummary,
    pub single_null: Option<f64>,
    pub single: Vec<SingleResult>,
    /// Treatment minus control, one per tier.
    pub between: Vec<InferenceResult>,
    pub within: Vec<WithinResult>,
    pub wald: Option<InferenceResult>,
}

/// Plot-ready Kaplan-Meier staircase of one tier in one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveExport {
    pub arm: Arm,
    pub tier: usize,
    /// `(0, 1)`, one vertex per jump, then the last observed time.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub metadata: Metadata,
    pub sections: Vec<TauSection>,
    pub curves: Vec<CurveExport>,
}

fn summarize(estimate: RmstEstimate, arm: Arm, alpha: f64) -> ArmSummary {
    let z = normal_quantile(1.0 - alpha / 2.0);
    let intervals = (1..=estimate.num_tiers())
        .map(|j| {
            let r = estimate.rmst()[j - 1];
            let h = z * estimate.std_error(j);
            (r - h, r + h)
        })
        .collect();
    ArmSummary {
        arm,
        estimate,
        intervals,
    }
}

/// Kaplan-Meier exports for every tier of one arm.
pub fn curve_exports(cohort: &Cohort, arm: Arm) -> Result<Vec<CurveExport>> {
    let sub = cohort.arm(arm);
    (1..=cohort.num_event_types())
        .map(|tier| {
            let curve = km_fit(&build_risk_table(&sub, tier)?);
            let mut points = curve.steps();
            let last = *points.last().expect("steps start at (0, 1)");
            if curve.max_time() > last.0 {
                points.push((curve.max_time(), last.1));
            }
            Ok(CurveExport { arm, tier, points })
        })
        .collect()
}

/// Fits both arms at every `τ` and runs the planned tests.
pub fn analyze(
    cohort: &Cohort,
    taus: &[f64],
    alpha: f64,
    plan: &TestPlan,
    config_sha256: &str,
    input_sha256: &str,
) -> Result<AnalysisReport> {
    let control = cohort.arm(Arm::Control);
    let treatment = cohort.arm(Arm::Treatment);
    if control.is_empty() || treatment.is_empty() {
        return Err(Error::Schema(
            "the dataset must contain both arms (0 and 1)".into(),
        ));
    }
    if taus.is_empty() {
        return Err(Error::Config("at least one tau is required".into()));
    }
    let k = cohort.num_event_types();

    let mut sections = Vec::with_capacity(taus.len());
    for &tau in taus {
        let ec = estimate_arm(&control, tau)?;
        let et = estimate_arm(&treatment, tau)?;

        let mut single = Vec::new();
        if let Some(null) = plan.single_null {
            for (arm, est) in [(Arm::Control, &ec), (Arm::Treatment, &et)] {
                for tier in 1..=k {
                    single.push(SingleResult {
                        arm,
                        tier,
                        result: infer_single(est, tier, null, alpha)?,
                    });
                }
            }
        }
        let between = if plan.between {
            (1..=k)
                .map(|j| infer_between(&et, &ec, j, alpha))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let mut within = Vec::new();
        for (arm, est) in [(Arm::Control, &ec), (Arm::Treatment, &et)] {
            for &(j, kk) in &plan.within_pairs {
                within.push(WithinResult {
                    arm,
                    tier_j: j,
                    tier_k: kk,
                    result: infer_within(est, j, kk, alpha)?,
                });
            }
        }
        let wald = if plan.wald {
            Some(infer_wald(&et, &ec, alpha)?)
        } else {
            None
        };
        sections.push(TauSection {
            tau,
            control: summarize(ec, Arm::Control, alpha),
            treatment: summarize(et, Arm::Treatment, alpha),
            single_null: plan.single_null,
            single,
            between,
            within,
            wald,
        });
    }

    let mut curves = curve_exports(cohort, Arm::Control)?;
    curves.extend(curve_exports(cohort, Arm::Treatment)?);

    Ok(AnalysisReport {
        metadata: Metadata {
            tool_version: TOOL_VERSION.to_string(),
            config_sha256: config_sha256.to_string(),
            input_sha256: input_sha256.to_string(),
            n_control: control.len(),
            n_treatment: treatment.len(),
            num_tiers: k,
            taus: taus.to_vec(),
            alpha,
        },
        sections,
        curves,
    })
}

/// `est(lo, hi)` at `precision` decimals, e.g. `11.28(10.61, 11.95)`.
pub fn format_ci(estimate: f64, lo: f64, hi: f64, precision: usize) -> String {
    format!("{estimate:.precision$}({lo:.precision$}, {hi:.precision$})")
}

fn p_clause(p: f64, precision: usize) -> String {
    let f = format_p(p, precision);
    match f.strip_prefix('<') {
        Some(rest) => format!("p < {rest}"),
        None => format!("p = {f}"),
    }
}

/// p-values below the printable resolution show as `<0.001` (for 3 decimals).
pub fn format_p(p: f64, precision: usize) -> String {
    let floor = 10f64.powi(-(precision as i32));
    if p < floor {
        format!("<{floor:.precision$}")
    } else {
        format!("{p:.precision$}")
    }
}

fn result_ci(r: &InferenceResult, precision: usize) -> String {
    format_ci(
        r.estimate,
        r.ci_low.unwrap_or(f64::NAN),
        r.ci_high.unwrap_or(f64::NAN),
        precision,
    )
}

/// Left-aligned columns separated by two spaces.
fn render_table(rows: &[Vec<String>]) -> String {
    let ncol = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..ncol)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c + 1 == row.len() {
                line.push_str(cell);
            } else {
                let pad = widths[c] - cell.chars().count();
                line.push_str(cell);
                line.push_str(&" ".repeat(pad + 2));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

impl AnalysisReport {
    /// Table-shaped text report.
    pub fn to_text(&self, precision: usize) -> String {
        let m = &self.metadata;
        let p = precision;
        let mut out = String::new();
        let _ = writeln!(out, "DOOR RMST analysis");
        let meta = vec![
            vec!["tool_version".into(), m.tool_version.clone()],
            vec!["config_sha256".into(), m.config_sha256.clone()],
            vec!["input_sha256".into(), m.input_sha256.clone()],
            vec!["n_control".into(), m.n_control.to_string()],
            vec!["n_treatment".into(), m.n_treatment.to_string()],
            vec!["event_types".into(), m.num_tiers.to_string()],
            vec!["alpha".into(), m.alpha.to_string()],
        ];
        out.push_str(&render_table(&meta));

        let level = format!("{}%", ((1.0 - m.alpha) * 1e8).round() / 1e6);
        for s in &self.sections {
            let _ = writeln!(out, "\ntau = {}", s.tau);
            let mut rows = vec![vec![
                "".to_string(),
                "Control".to_string(),
                "Treatment".to_string(),
            ]];
            if !s.between.is_empty() {
                rows[0].push("Treatment - Control".into());
                rows[0].push("p".into());
            }
            for j in 0..m.num_tiers {
                let cell = |a: &ArmSummary| {
                    let (lo, hi) = a.intervals[j];
                    format_ci(a.estimate.rmst()[j], lo, hi, p)
                };
                let mut row = vec![
                    format!("RMST_{}", j + 1),
                    cell(&s.control),
                    cell(&s.treatment),
                ];
                if let Some(b) = s.between.get(j) {
                    row.push(result_ci(b, p));
                    row.push(format_p(b.p_value, p));
                }
                rows.push(row);
            }
            let _ = writeln!(out, "RMST with {level} CI");
            out.push_str(&render_table(&rows));

            for a in [&s.control, &s.treatment] {
                let bad = a.estimate.ordering_violations();
                if !bad.is_empty() {
                    let tiers: Vec<String> = bad
                        .iter()
                        .map(|j| format!("RMST_{j} > RMST_{}", j + 1))
                        .collect();
                    let _ = writeln!(
                        out,
                        "note: {} estimates not ordered: {}",
                        a.arm,
                        tiers.join(", ")
                    );
                }
            }

            if !s.within.is_empty() {
                let _ = writeln!(out, "\nWithin arm");
                let rows: Vec<Vec<String>> = s
                    .within
                    .iter()
                    .map(|w| {
                        vec![
                            w.arm.to_string(),
                            format!("RMST_{} - RMST_{}", w.tier_k, w.tier_j),
                            result_ci(&w.result, p),
                            p_clause(w.result.p_value, p),
                        ]
                    })
                    .collect();
                out.push_str(&render_table(&rows));
            }

            if let Some(null) = s.single_null {
                let _ = writeln!(out, "\nSingle tier (null = {null:.p$})");
                let rows: Vec<Vec<String>> = s
                    .single
                    .iter()
                    .map(|r| {
                        vec![
                            r.arm.to_string(),
                            format!("RMST_{}", r.tier),
                            format!("z = {:.p$}", r.result.statistic),
                            p_clause(r.result.p_value, p),
                        ]
                    })
                    .collect();
                out.push_str(&render_table(&rows));
            }

            if let Some(w) = &s.wald {
                let crit = w.critical_value.unwrap_or(f64::NAN);
                let df = w.df.unwrap_or(0);
                let verdict = if w.rejects() {
                    format!("{:.p$} > {crit:.p$}, reject", w.statistic)
                } else {
                    format!("{:.p$} <= {crit:.p$}, do not reject", w.statistic)
                };
                let _ = writeln!(
                    out,
                    "\nWald overall: statistic {:.p$}, df {df}, critical value {crit:.p$}, {}; {verdict}",
                    w.statistic,
                    p_clause(w.p_value, p),
                );
            }
        }
        out
    }

    /// Every estimate and test at full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "tau,section,arm,tier,tier_other,estimate,std_error,ci_low,ci_high,statistic,df,critical_value,p_value,reject\n",
        );
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let line = |tau: f64,
                    section: &str,
                    arm: &str,
                    tier: String,
                    other: String,
                    r: &InferenceResult| {
            format!(
                "{tau},{section},{arm},{tier},{other},{},{},{},{},{},{},{},{},{}\n",
                r.estimate,
                opt(r.std_error),
                opt(r.ci_low),
                opt(r.ci_high),
                r.statistic,
                r.df.map(|d| d.to_string()).unwrap_or_default(),
                opt(r.critical_value),
                r.p_value,
                u8::from(r.rejects()),
            )
        };
        for s in &self.sections {
            for a in [&s.control, &s.treatment] {
                for j in 0..a.estimate.num_tiers() {
                    let (lo, hi) = a.intervals[j];
                    let _ = writeln!(
                        out,
                        "{},rmst,{},{},,{},{},{lo},{hi},,,,,",
                        s.tau,
                        a.arm.name(),
                        j + 1,
                        a.estimate.rmst()[j],
                        a.estimate.std_error(j + 1),
                    );
                }
            }
            for r in &s.single {
                out.push_str(&line(
                    s.tau,
                    "single",
                    r.arm.name(),
                    r.tier.to_string(),
                    String::new(),
                    &r.result,
                ));
            }
            for (j, r) in s.between.iter().enumerate() {
                out.push_str(&line(
                    s.tau,
                    "between",
                    "treatment-control",
                    (j + 1).to_string(),
                    String::new(),
                    r,
                ));
            }
            for w in &s.within {
                out.push_str(&line(
                    s.tau,
                    "within",
                    w.arm.name(),
                    w.tier_k.to_string(),
                    w.tier_j.to_string(),
                    &w.result,
                ));
            }
            if let Some(w) = &s.wald {
                out.push_str(&line(
                    s.tau,
                    "wald",
                    "treatment-control",
                    String::new(),
                    String::new(),
                    w,
                ));
            }
        }
        out
    }

    /// Covariance matrices at full precision, one row per entry.
    pub fn covariance_csv(&self) -> String {
        let mut out = String::from("tau,arm,tier_row,tier_col,cov\n");
        for s in &self.sections {
            for a in [&s.control, &s.treatment] {
                let c = a.estimate.cov();
                for i in 0..c.nrows() {
                    for j in 0..c.ncols() {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{}",
                            s.tau,
                            a.arm.name(),
                            i + 1,
                            j + 1,
                            c[(i, j)]
                        );
                    }
                }
            }
        }
        out
    }

    pub fn metadata_csv(&self) -> String {
        let m = &self.metadata;
        let taus: Vec<String> = m.taus.iter().map(f64::to_string).collect();
        format!(
            "key,value\ntool_version,{}\nconfig_sha256,{}\ninput_sha256,{}\nn_control,{}\nn_treatment,{}\nevent_types,{}\ntau,{}\nalpha,{}\n",
            m.tool_version,
            m.config_sha256,
            m.input_sha256,
            m.n_control,
            m.n_treatment,
            m.num_tiers,
            taus.join(";"),
            m.alpha
        )
    }
}

pub fn curve_csv(curve: &CurveExport) -> String {
    let mut out = String::from("time,survival\n");
    for (t, s) in &curve.points {
        let _ = writeln!(out, "{t},{s}");
    }
    out
}

pub fn table1_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from("tier,tau,bias,se,see,cp,events,failed_replicates\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.tier, r.tau, r.bias, r.se, r.see, r.cp, r.events, r.failed_replicates
        );
    }
    out
}

pub fn table1_text(rows: &[StudyRow], n: usize, precision: usize) -> String {
    let p = precision;
    let mut table = vec![vec![
        "tau".to_string(),
        "tier".into(),
        "Bias".into(),
        "SE".into(),
        "SEE".into(),
        "CP".into(),
        "Events".into(),
        "failed".into(),
    ]];
    for r in rows {
        table.push(vec![
            r.tau.to_string(),
            format!("RMST_{}", r.tier),
            format!("{:.p$}", r.bias),
            format!("{:.p$}", r.se),
            format!("{:.p$}", r.see),
            format!("{:.p$}", r.cp),
            format!("{:.2}", r.events),
            r.failed_replicates.to_string(),
        ]);
    }
    format!("N = {n}\n{}", render_table(&table))
}

pub fn power_csv(rows: &[PowerRow]) -> String {
    let mut out = String::from("test,n_per_arm,tau,rejection_rate\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.test, r.n_per_arm, r.tau, r.rejection_rate
        );
    }
    out
}

pub fn power_text(rows: &[PowerRow], precision: usize) -> String {
    let mut table = vec![vec![
        "test".to_string(),
        "n_per_arm".into(),
        "tau".into(),
        "rejection_rate".into(),
        "failed".into(),
    ]];
    for r in rows {
        table.push(vec![
            r.test.to_string(),
            r.n_per_arm.to_string(),
            r.tau.to_string(),
            format!("{:.precision$}", r.rejection_rate),
            r.failed_replicates.to_string(),
        ]);
    }
    render_table(&table)
}

pub fn oracle_csv(arms: &[(Arm, Vec<TrueRmst>)]) -> String {
    let mut out = String::from("arm,tau,tier,true_rmst,mc_se,mc_reps\n");
    for (arm, truths) in arms {
        for t in truths {
            for (j, (v, se)) in t.values.iter().zip(&t.mc_standard_error).enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{v},{se},{}",
                    arm.name(),
                    t.tau,
                    j + 1,
                    t.mc_reps
                );
            }
        }
    }
    out
}

pub fn oracle_text(arms: &[(Arm, Vec<TrueRmst>)], precision: usize) -> String {
    let p = precision;
    let mut table = vec![vec!["arm".to_string(), "tau".into()]];
    let tiers = arms
        .first()
        .and_then(|(_, t)| t.first())
        .map_or(0, |t| t.values.len());
    table[0].extend((1..=tiers).map(|j| format!("RMST_{j}")));
    for (arm, truths) in arms {
        for t in truths {
            let mut row = vec![arm.name().to_string(), t.tau.to_string()];
            row.extend(t.values.iter().map(|v| format!("{v:.p$}")));
            table.push(row);
        }
    }
    render_table(&table)
}
