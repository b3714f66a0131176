use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use door_rmst::door::Arm;
use door_rmst::io::plot::{km_svg, power_svg};
use door_rmst::io::report::{
    curve_csv, curve_exports, oracle_csv, oracle_text, power_csv, power_text, table1_csv,
    table1_text, CurveExport,
};
use door_rmst::io::{analyze, load_dataset, to_cohort, write_wide, Config};
use door_rmst::oracle::{true_rmst_mc_many, DEFAULT_MC_REPS};
use door_rmst::sim::simulate_trial;
use door_rmst::study::{oracle_seed, run_power_study, run_table1_study};
use door_rmst::Error;

#[derive(Parser)]
#[command(
    name = "door-rmst",
    version,
    about = "Tiered RMST analysis of DOOR outcomes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(clap::Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Restriction time; repeat to override the config list.
    #[arg(long = "tau")]
    tau: Vec<f64>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate tiered RMSTs from a dataset and run the configured tests.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Wide or longitudinal CSV.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Simulate one two-arm trial and write it as wide CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Subjects per arm; defaults to the first n_per_arm entry.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Replicated estimator and power study.
    Study {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte Carlo true RMSTs of both arms' rate vectors.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Monte Carlo draws per arm.
        #[arg(long)]
        reps: Option<usize>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 5,
        Error::NoRiskAtTau { .. } | Error::SingularCovariance { .. } => 4,
        _ => 3,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<(), Error> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io_err(&path))
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn print(text: &str) -> Result<(), Error> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|source| Error::Io {
            path: "<stdout>".into(),
            source,
        })
}

fn taus(cli: &[f64], cfg: &Config) -> Result<Vec<f64>, Error> {
    if cli.is_empty() {
        return Ok(cfg.require_tau()?.to_vec());
    }
    if let Some(&t) = cli.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidTau(t));
    }
    Ok(cli.to_vec())
}

fn write_curves(dir: &Path, curves: &[CurveExport], x_max: f64, plots: bool) -> Result<(), Error> {
    for c in curves {
        let name = format!("km_{}_tier{}.csv", c.arm.name(), c.tier);
        write_file(dir, &name, curve_csv(c).as_bytes())?;
    }
    if plots {
        for arm in [Arm::Control, Arm::Treatment] {
            let mine: Vec<&CurveExport> = curves.iter().filter(|c| c.arm == arm).collect();
            let svg = km_svg(&format!("Kaplan-Meier by tier, {arm}"), &mine, x_max);
            write_file(dir, &format!("km_{}.svg", arm.name()), svg.as_bytes())?;
        }
    }
    Ok(())
}

fn run_analyze(
    common: &Common,
    data: &Path,
    out_dir: &Path,
    alpha: Option<f64>,
) -> Result<(), Error> {
    let (cfg, cfg_hash) = Config::load(&common.config)?;
    let taus = taus(&common.tau, &cfg)?;
    let alpha = alpha.unwrap_or(cfg.alpha);
    let (dataset, data_hash) = load_dataset(data, cfg.analysis.time_decimals)?;
    let cohort = to_cohort(dataset, cfg.door_config()?.as_ref())?;
    let plan = cfg.test_plan(cohort.num_event_types())?;
    let report = analyze(&cohort, &taus, alpha, &plan, &cfg_hash, &data_hash)?;

    create_dir(out_dir)?;
    let raw_cfg = fs::read(&common.config).map_err(io_err(&common.config))?;
    write_file(out_dir, "config.toml", &raw_cfg)?;
    let rendered = match common.format {
        Format::Text => {
            let text = report.to_text(cfg.precision);
            write_file(out_dir, "report.txt", text.as_bytes())?;
            text
        }
        Format::Csv => {
            let csv = report.to_csv();
            write_file(out_dir, "report.csv", csv.as_bytes())?;
            write_file(out_dir, "metadata.csv", report.metadata_csv().as_bytes())?;
            write_file(
                out_dir,
                "covariance.csv",
                report.covariance_csv().as_bytes(),
            )?;
            csv
        }
    };
    let x_max = taus.iter().copied().fold(0.0, f64::max);
    write_curves(out_dir, &report.curves, x_max, cfg.analysis.plots)?;
    print(&rendered)
}

fn run_simulate(
    config: &Path,
    output: Option<&Path>,
    seed: Option<u64>,
    n: Option<usize>,
) -> Result<(), Error> {
    let (cfg, _) = Config::load(config)?;
    let mut sim = cfg.trial_config()?;
    if let Some(s) = seed {
        sim.seed = s;
    }
    let n = n.unwrap_or(sim.n_per_arm[0]);
    if n == 0 {
        return Err(Error::Config("n must be positive".into()));
    }
    let cohort = simulate_trial(&sim, n, sim.seed);
    let mut buf = Vec::new();
    write_wide(&cohort, &mut buf)?;
    match output {
        Some(path) => fs::write(path, &buf).map_err(io_err(path)),
        None => print(std::str::from_utf8(&buf).expect("CSV output is UTF-8")),
    }
}

fn mc_reps(cfg: &Config) -> usize {
    cfg.simulation
        .as_ref()
        .map_or(DEFAULT_MC_REPS, |s| s.mc_reps)
}

fn run_study(
    common: &Common,
    out_dir: &Path,
    alpha: Option<f64>,
    seed: Option<u64>,
) -> Result<(), Error> {
    let (cfg, _) = Config::load(&common.config)?;
    let mut sim = cfg.sim_config()?;
    if !common.tau.is_empty() {
        sim.tau_list = taus(&common.tau, &cfg)?;
    }
    if let Some(s) = seed {
        sim.seed = s;
    }
    let alpha = alpha.unwrap_or(cfg.alpha);
    let plots = cfg.simulation.as_ref().is_some_and(|s| s.plots);

    let truths = true_rmst_mc_many(
        &sim.rates_control,
        &sim.tau_list,
        mc_reps(&cfg),
        oracle_seed(sim.seed, Arm::Control),
    )?;
    let mut tables = Vec::new();
    for &n in &sim.n_per_arm {
        tables.push((n, run_table1_study(&sim, n, &truths)?));
    }
    let power = run_power_study(&sim, alpha)?;

    create_dir(out_dir)?;
    write_file(
        out_dir,
        "oracle.csv",
        oracle_csv(&[(Arm::Control, truths)]).as_bytes(),
    )?;
    let mut text = String::new();
    for (n, rows) in &tables {
        write_file(
            out_dir,
            &format!("table1_n{n}.csv"),
            table1_csv(rows).as_bytes(),
        )?;
        match common.format {
            Format::Text => {
                text.push_str(&table1_text(rows, *n, cfg.precision));
                text.push('\n');
            }
            Format::Csv => text.push_str(&format!("# n = {n}\n{}", table1_csv(rows))),
        }
    }
    write_file(out_dir, "power.csv", power_csv(&power).as_bytes())?;
    match common.format {
        Format::Text => text.push_str(&power_text(&power, cfg.precision)),
        Format::Csv => text.push_str(&power_csv(&power)),
    }

    // one trial at the largest n for the step-curve figures
    let n_max = *sim.n_per_arm.iter().max().expect("validated");
    let trial = simulate_trial(&sim, n_max, sim.seed);
    let mut curves = curve_exports(&trial, Arm::Control)?;
    curves.extend(curve_exports(&trial, Arm::Treatment)?);
    let x_max = sim.tau_list.iter().copied().fold(0.0, f64::max);
    write_curves(out_dir, &curves, x_max, plots)?;
    if plots {
        let svg = power_svg(&format!("Rejection rate, alpha = {alpha}"), &power);
        write_file(out_dir, "power.svg", svg.as_bytes())?;
    }
    print(&text)
}

fn run_oracle(common: &Common, seed: Option<u64>, reps: Option<usize>) -> Result<(), Error> {
    let (cfg, _) = Config::load(&common.config)?;
    let rates = cfg.rates()?;
    let taus = taus(&common.tau, &cfg)?;
    let seed = seed.unwrap_or(cfg.seed);
    let reps = reps.unwrap_or_else(|| mc_reps(&cfg));
    let arms = vec![
        (
            Arm::Control,
            true_rmst_mc_many(&rates.control, &taus, reps, oracle_seed(seed, Arm::Control))?,
        ),
        (
            Arm::Treatment,
            true_rmst_mc_many(
                &rates.treatment,
                &taus,
                reps,
                oracle_seed(seed, Arm::Treatment),
            )?,
        ),
    ];
    match common.format {
        Format::Text => print(&oracle_text(&arms, cfg.precision)),
        Format::Csv => print(&oracle_csv(&arms)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze {
            common,
            data,
            out_dir,
            alpha,
        } => run_analyze(common, data, out_dir, *alpha),
        Command::Simulate {
            config,
            output,
            seed,
            n,
        } => run_simulate(config, output.as_deref(), *seed, *n),
        Command::Study {
            common,
            out_dir,
            alpha,
            seed,
        } => run_study(common, out_dir, *alpha, *seed),
        Command::Oracle { common, seed, reps } => run_oracle(common, *seed, *reps),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            match &err {
                Error::Validation(v) => {
                    eprintln!("error: validation failed for {} record(s)", v.len());
                    for x in v {
                        eprintln!("  {x}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
