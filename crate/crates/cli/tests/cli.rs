use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use door_rmst::door::{Arm, DoorConfig, SubjectRecord};
use door_rmst::io::write_wide;
use door_rmst::sim::{simulate_trial, SimConfig, TransitionRates};
use door_rmst::validate_cohort;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_door-rmst"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn simulate_is_deterministic_and_matches_frozen_input() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let cfg = fixture("small.toml");
    for out in [&a, &b] {
        let o = run(&["simulate", "--config", s(&cfg), "--output", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read(a).unwrap();
    assert_eq!(a, fs::read(b).unwrap());
    assert_eq!(a, fs::read(fixture("golden_input.csv")).unwrap());
}

#[test]
fn seed_flag_changes_the_trial() {
    let cfg = fixture("small.toml");
    let a = run(&["simulate", "--config", s(&cfg), "--seed", "42"]);
    let b = run(&["simulate", "--config", s(&cfg), "--seed", "43"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, fs::read(fixture("golden_input.csv")).unwrap());
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn analyze_matches_golden_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture("golden_input.csv");
    let cfg = fixture("small.toml");
    for (format, file, golden) in [
        ("csv", "report.csv", "golden_report.csv"),
        ("text", "report.txt", "golden_report.txt"),
    ] {
        let out = dir.path().join(format);
        let o = run(&[
            "analyze",
            "--config",
            s(&cfg),
            "--data",
            s(&data),
            "--out-dir",
            s(&out),
            "--format",
            format,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let got = fs::read(out.join(file)).unwrap();
        assert_eq!(
            got,
            fs::read(fixture(golden)).unwrap(),
            "{file} drifted from golden"
        );
        assert_eq!(o.stdout, got);
    }
}

#[test]
fn analyze_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture("golden_input.csv");
    let cfg = fixture("small.toml");
    let outs: Vec<PathBuf> = ["x", "y"].iter().map(|n| dir.path().join(n)).collect();
    for out in &outs {
        let o = run(&[
            "analyze",
            "--config",
            s(&cfg),
            "--data",
            s(&data),
            "--out-dir",
            s(out),
            "--format",
            "csv",
        ]);
        assert!(o.status.success());
    }
    let mut names: Vec<_> = fs::read_dir(&outs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.iter().any(|n| n == "km_treatment_tier4.csv"));
    assert!(names.iter().any(|n| n == "km_control.svg"));
    for n in names {
        assert_eq!(
            fs::read(outs[0].join(&n)).unwrap(),
            fs::read(outs[1].join(&n)).unwrap(),
            "{n:?}"
        );
    }
}

#[test]
fn simulate_then_analyze_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("small.toml");
    let data = dir.path().join("trial.csv");
    for seed in ["1", "2", "3"] {
        let o = run(&[
            "simulate",
            "--config",
            s(&cfg),
            "--output",
            s(&data),
            "--seed",
            seed,
            "--n",
            "150",
        ]);
        assert!(o.status.success());
        let o = run(&[
            "analyze",
            "--config",
            s(&cfg),
            "--data",
            s(&data),
            "--out-dir",
            s(&dir.path().join("o")),
        ]);
        assert!(
            o.status.success(),
            "seed {seed}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn death_only_rates_give_equal_tier_times() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "seed = 5\ntau = [1.0]\n[rates]\n\
         control = [0, 0, 0.7, 0, 0, 0, 0, 0, 0]\n\
         treatment = [0, 0, 0.4, 0, 0, 0, 0, 0, 0]\n\
         [simulation]\nn_per_arm = [80]\ncensor_max = 3.0\n",
    );
    let o = run(&["simulate", "--config", s(&cfg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert!(f[2..6].iter().all(|t| *t == f[2]), "{line}");
        assert!(f[6..10].iter().all(|d| *d == f[6]), "{line}");
        rows += 1;
    }
    assert_eq!(rows, 160);
}

#[test]
fn non_monotone_record_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(
        &data,
        "subject_id,arm,t1,t2,d1,d2\nok1,0,1,2,1,1\nbroken-7,0,3,2,1,1\nok2,1,1,1,1,0\n",
    )
    .unwrap();
    let cfg = write_config(dir.path(), "tau = [1.0]\n");
    let o = run(&[
        "analyze",
        "--config",
        s(&cfg),
        "--data",
        s(&data),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("broken-7"), "{err}");
    assert!(!err.contains("ok1"));
}

#[test]
fn unknown_column_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("extra.csv");
    fs::write(&data, "subject_id,arm,t1,d1,age\na,0,1,1,40\n").unwrap();
    let cfg = write_config(dir.path(), "tau = [1.0]\n");
    let o = run(&[
        "analyze",
        "--config",
        s(&cfg),
        "--data",
        s(&data),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("age"));
}

#[test]
fn zero_replicates_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("small.toml"))
        .unwrap()
        .replace("replicates = 100", "replicates = 0");
    let cfg = write_config(dir.path(), &text);
    let o = run(&[
        "study",
        "--config",
        s(&cfg),
        "--out-dir",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("replicates"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("small.toml");
    let data = fixture("golden_input.csv");
    // usage
    assert_eq!(run(&["analyze"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    // I/O
    let missing = dir.path().join("missing.csv");
    let o = run(&[
        "analyze",
        "--config",
        s(&cfg),
        "--data",
        s(&missing),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(5));
    // nobody at risk
    let o = run(&[
        "analyze",
        "--config",
        s(&cfg),
        "--data",
        s(&data),
        "--out-dir",
        s(dir.path()),
        "--tau",
        "50",
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at risk"));
}

#[test]
fn singular_covariance_exits_4() {
    // tier 2 has no events in either arm, so its variance is zero
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("flat.csv");
    let mut csv = String::from("subject_id,arm,t1,t2,d1,d2\n");
    for i in 0..20 {
        let t = 1.0 + i as f64 * 0.1;
        csv.push_str(&format!("s{i},{},{t},{t},{},0\n", i % 2, i % 3 == 0));
    }
    let csv = csv.replace("true", "1").replace("false", "0");
    fs::write(&data, csv).unwrap();
    let cfg = write_config(dir.path(), "tau = [1.5]\n");
    let o = run(&[
        "analyze",
        "--config",
        s(&cfg),
        "--data",
        s(&data),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(
        o.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(String::from_utf8_lossy(&o.stderr).contains("singular"));
}

#[test]
fn longitudinal_input_is_monotonized() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("visits.csv");
    let mut csv = String::from("subject_id,arm,visit_day,door_level\n");
    for i in 0..30u32 {
        let arm = i % 2;
        for day in 1..=6u32 {
            // worsen at a subject-specific day, then partially recover
            let level = if day >= 2 + i % 5 { 1 + (i % 3) } else { 1 };
            let level = if day == 6 && level > 1 {
                level - 1
            } else {
                level
            };
            csv.push_str(&format!("p{i},{arm},{day},{level}\n"));
        }
    }
    fs::write(&data, csv).unwrap();
    let cfg = write_config(
        dir.path(),
        "tau = [5.0]\n[analysis]\ntests = [\"between\"]\ndoor_labels = [\"home\", \"hospital\", \"icu\"]\n",
    );
    let o = run(&[
        "analyze",
        "--config",
        s(&cfg),
        "--data",
        s(&data),
        "--out-dir",
        s(&dir.path().join("o")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("event_types    2"));
    assert!(text.contains("RMST_2"));
}

/// A three-tier dataset on a day scale analysed at τ = 20 prints each tier
/// row as `RMST_j  est(lo, hi)  est(lo, hi)  diff(lo, hi)  p`.
#[test]
fn day_scale_report_rows_have_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let rates = TransitionRates::new([0.5, 0.2, 0.1, 1.0, 0.4, 0.2, 0.6, 0.3, 0.3]).unwrap();
    let slower = TransitionRates::new([0.3, 0.15, 0.06, 0.6, 0.3, 0.12, 0.36, 0.24, 0.24]).unwrap();
    let sim = SimConfig {
        rates_control: rates,
        rates_treatment: slower,
        n_per_arm: vec![300],
        censor_max: 4.0,
        tau_list: vec![2.0],
        seed: 11,
        replicates: 1,
    };
    let records: Vec<SubjectRecord> = simulate_trial(&sim, 300, 11)
        .into_records()
        .into_iter()
        .map(|r| {
            let times = r.times[..3].iter().map(|t| t * 14.0).collect();
            SubjectRecord::new(r.subject_id, r.arm, times, r.events[..3].to_vec())
        })
        .collect();
    let cohort = validate_cohort(records, &DoorConfig::with_event_types(3).unwrap()).unwrap();
    assert!(cohort.arm(Arm::Control).len() == 300);
    let data = dir.path().join("days.csv");
    let mut buf = Vec::new();
    write_wide(&cohort, &mut buf).unwrap();
    fs::write(&data, buf).unwrap();

    let cfg = write_config(dir.path(), "tau = [20.0]\nprecision = 2\n");
    let o = run(&[
        "analyze",
        "--config",
        s(&cfg),
        "--data",
        s(&data),
        "--out-dir",
        s(&dir.path().join("o")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();

    let is_ci = |cell: &str| {
        let Some((est, rest)) = cell.split_once('(') else {
            return false;
        };
        let Some(inner) = rest.strip_suffix(')') else {
            return false;
        };
        let Some((lo, hi)) = inner.split_once(", ") else {
            return false;
        };
        [est, lo, hi].iter().all(|x| {
            x.parse::<f64>().is_ok() && x.rsplit_once('.').is_some_and(|(_, d)| d.len() == 2)
        })
    };
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("RMST_")).collect();
    assert_eq!(rows.len(), 3);
    for (j, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row
            .split("  ")
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .collect();
        assert_eq!(cells[0], format!("RMST_{}", j + 1));
        assert!(cells[1..4].iter().all(|c| is_ci(c)), "{row}");
    }
    assert!(text.contains("Wald overall: statistic"));
    assert!(text.contains("df 3"));
}

#[test]
fn oracle_prints_true_rmsts() {
    let cfg = fixture("small.toml");
    let o = run(&[
        "oracle",
        "--config",
        s(&cfg),
        "--tau",
        "2",
        "--reps",
        "200000",
        "--format",
        "csv",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("arm,tau,tier,true_rmst,mc_se,mc_reps\n"));
    let control_t1: f64 = text
        .lines()
        .find(|l| l.starts_with("control,2,1,"))
        .unwrap()
        .split(',')
        .nth(3)
        .unwrap()
        .parse()
        .unwrap();
    // (1 - e^{-1.6}) / 0.8
    assert!((control_t1 - 0.997_629).abs() < 0.005);
    assert_eq!(text.lines().count(), 1 + 8);
}

#[test]
fn study_writes_tables_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("study");
    let o = run(&[
        "study",
        "--config",
        s(&fixture("small.toml")),
        "--out-dir",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t1 = fs::read_to_string(out.join("table1_n60.csv")).unwrap();
    assert!(t1.starts_with("tier,tau,bias,se,see,cp,events,failed_replicates\n"));
    assert_eq!(t1.lines().count(), 1 + 8);
    let power = fs::read_to_string(out.join("power.csv")).unwrap();
    assert!(power.starts_with("test,n_per_arm,tau,rejection_rate\n"));
    assert_eq!(power.lines().count(), 1 + 10);
    for f in [
        "power.svg",
        "km_control.svg",
        "km_treatment.svg",
        "oracle.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
}
