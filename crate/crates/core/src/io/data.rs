//! Dataset ingestion and export.
//!
//! Two CSV layouts are accepted, told apart by the header:
//!
//! ```text
//! subject_id,arm,t1,...,tK,d1,...,dK        one row per subject
//! subject_id,arm,visit_day,door_level       one row per visit
//! ```
//!
//! `arm` is `0` (control) or `1` (treatment). Any other column set is
//! rejected.

use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::door::{
    monotonize_trajectory, validate_cohort, Arm, Cohort, DoorConfig, LongitudinalRecord,
    SubjectRecord, Visit,
};
use crate::error::{Error, Result};

const LONGITUDINAL_HEADER: [&str; 4] = ["subject_id", "arm", "visit_day", "door_level"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Wide { num_event_types: usize },
    Longitudinal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Wide {
        num_event_types: usize,
        records: Vec<SubjectRecord>,
    },
    Longitudinal(Vec<LongitudinalRecord>),
}

/// Classifies a header row.
pub fn detect_schema(header: &[&str]) -> Result<Schema> {
    if header == LONGITUDINAL_HEADER {
        return Ok(Schema::Longitudinal);
    }
    let wide_k =
        (header.len() >= 4 && header.len().is_multiple_of(2)).then(|| (header.len() - 2) / 2);
    if let Some(k) = wide_k {
        let expected = wide_header(k);
        if header.iter().zip(&expected).all(|(a, b)| a == b) {
            return Ok(Schema::Wide { num_event_types: k });
        }
    }
    let known =
        |c: &str| LONGITUDINAL_HEADER.contains(&c) || is_indexed(c, 't') || is_indexed(c, 'd');
    let unknown: Vec<&str> = header.iter().copied().filter(|c| !known(c)).collect();
    if unknown.is_empty() {
        Err(Error::Schema(format!(
            "header `{}` matches neither subject_id,arm,t1..tK,d1..dK nor {}",
            header.join(","),
            LONGITUDINAL_HEADER.join(",")
        )))
    } else {
        Err(Error::Schema(format!(
            "unknown column(s): {}",
            unknown.join(", ")
        )))
    }
}

fn is_indexed(col: &str, prefix: char) -> bool {
    col.strip_prefix(prefix)
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

fn wide_header(k: usize) -> Vec<String> {
    let mut h = vec!["subject_id".to_string(), "arm".to_string()];
    h.extend((1..=k).map(|j| format!("t{j}")));
    h.extend((1..=k).map(|j| format!("d{j}")));
    h
}

fn round_to(x: f64, decimals: Option<u32>) -> f64 {
    match decimals {
        Some(d) => {
            let scale = 10f64.powi(d as i32);
            (x * scale).round() / scale
        }
        None => x,
    }
}

fn parse_err(line: u64, msg: impl std::fmt::Display) -> Error {
    Error::Schema(format!("line {line}: {msg}"))
}

fn parse_arm(s: &str, line: u64) -> Result<Arm> {
    s.parse()
        .map_err(|_| parse_err(line, format!("arm must be 0 or 1, got `{s}`")))
}

fn parse_time(s: &str, col: &str, line: u64) -> Result<f64> {
    s.parse()
        .map_err(|_| parse_err(line, format!("{col}: `{s}` is not a number")))
}

/// Parses a dataset. With `decimals` set, times are rounded to that many
/// decimal places on ingestion.
pub fn read_dataset<R: Read>(reader: R, decimals: Option<u32>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    let schema = detect_schema(&cols)?;

    match schema {
        Schema::Wide { num_event_types: k } => {
            let mut records = Vec::new();
            for row in rdr.records() {
                let row = row.map_err(|e| Error::Schema(e.to_string()))?;
                let line = row.position().map_or(0, |p| p.line());
                let arm = parse_arm(&row[1], line)?;
                let times = (0..k)
                    .map(|j| {
                        Ok(round_to(
                            parse_time(&row[2 + j], cols[2 + j], line)?,
                            decimals,
                        ))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let events = (0..k)
                    .map(|j| match &row[2 + k + j] {
                        "0" => Ok(false),
                        "1" => Ok(true),
                        other => Err(parse_err(
                            line,
                            format!("{} must be 0 or 1, got `{other}`", cols[2 + k + j]),
                        )),
                    })
                    .collect::<Result<Vec<bool>>>()?;
                records.push(SubjectRecord::new(&row[0], arm, times, events));
            }
            Ok(Dataset::Wide {
                num_event_types: k,
                records,
            })
        }
        Schema::Longitudinal => {
            let mut subjects: Vec<LongitudinalRecord> = Vec::new();
            let mut index = std::collections::HashMap::new();
            for row in rdr.records() {
                let row = row.map_err(|e| Error::Schema(e.to_string()))?;
                let line = row.position().map_or(0, |p| p.line());
                let arm = parse_arm(&row[1], line)?;
                let day = round_to(parse_time(&row[2], "visit_day", line)?, decimals);
                let level: u32 = row[3].parse().map_err(|_| {
                    parse_err(
                        line,
                        format!("door_level must be a positive integer, got `{}`", &row[3]),
                    )
                })?;
                let id = row[0].to_string();
                let slot = *index.entry(id.clone()).or_insert_with(|| {
                    subjects.push(LongitudinalRecord {
                        subject_id: id.clone(),
                        arm,
                        visits: Vec::new(),
                    });
                    subjects.len() - 1
                });
                if subjects[slot].arm != arm {
                    return Err(parse_err(line, format!("subject {id} changes arm")));
                }
                subjects[slot].visits.push(Visit { day, level });
            }
            Ok(Dataset::Longitudinal(subjects))
        }
    }
}

/// Reads a dataset file and returns it with the SHA-256 of its bytes.
pub fn load_dataset(path: &Path, decimals: Option<u32>) -> Result<(Dataset, String)> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let hash = sha256_hex(&bytes);
    Ok((read_dataset(bytes.as_slice(), decimals)?, hash))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Validates (wide) or monotonizes then validates (longitudinal).
///
/// Wide data without `door` gets one event type per `t` column.
/// Longitudinal data requires `door` to know the number of levels.
pub fn to_cohort(dataset: Dataset, door: Option<&DoorConfig>) -> Result<Cohort> {
    match dataset {
        Dataset::Wide {
            num_event_types,
            records,
        } => {
            let config = match door {
                Some(c) if c.num_event_types() != num_event_types => {
                    return Err(Error::TierCountMismatch(
                        c.num_event_types(),
                        num_event_types,
                    ))
                }
                Some(c) => c.clone(),
                None => DoorConfig::with_event_types(num_event_types)?,
            };
            validate_cohort(records, &config)
        }
        Dataset::Longitudinal(subjects) => {
            let config = door.ok_or_else(|| {
                Error::Config("longitudinal data needs door level labels in the config".into())
            })?;
            let records = subjects
                .iter()
                .map(|s| monotonize_trajectory(s, config))
                .collect::<Result<Vec<_>>>()?;
            validate_cohort(records, config)
        }
    }
}

/// Writes a cohort in the wide layout. Times use the shortest decimal form
/// that parses back to the same value.
pub fn write_wide<W: Write>(cohort: &Cohort, writer: W) -> Result<()> {
    let to_err = |e: csv::Error| Error::Io {
        path: "<output>".into(),
        source: std::io::Error::other(e),
    };
    let k = cohort.num_event_types();
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(wide_header(k)).map_err(to_err)?;
    for r in cohort.records() {
        let mut row = vec![r.subject_id.clone(), r.arm.code().to_string()];
        row.extend(r.times.iter().map(|t| t.to_string()));
        row.extend(
            r.events
                .iter()
                .map(|&e| if e { "1" } else { "0" }.to_string()),
        );
        wtr.write_record(&row).map_err(to_err)?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<output>".into(),
        source,
    })
}
