//! `eventstudy` command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

mod config;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eventstudy::report::{emit_report, run_study, StudyConfig, StudyError};
use eventstudy::synthetic::{power_study, simulate_panel, LeakageProfile, SimConfig, SimError};
use eventstudy::{DecisionPolicy, WindowConfig};

use crate::config::FileConfig;

const USAGE_ERROR: u8 = 1;
const DATA_ERROR: u8 = 2;

/// Market-model event study of abnormal returns around announcements.
///
/// Set EVENTSTUDY_THREADS to cap the number of worker threads.
#[derive(Debug, Parser)]
#[command(name = "eventstudy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the event study on price files and write the report.
    Study(StudyArgs),
    /// Generate a synthetic market, stocks, events file and ground truth.
    Simulate(SimulateArgs),
    /// Estimate H0 rejection rates over a grid of leakage drifts and sample sizes.
    Power(PowerArgs),
}

#[derive(Debug, Args)]
struct WindowArgs {
    /// First estimation-window day [default: -89]
    #[arg(long, allow_negative_numbers = true)]
    est_start: Option<i32>,
    /// Last estimation-window day [default: -31]
    #[arg(long, allow_negative_numbers = true)]
    est_end: Option<i32>,
    /// First event-window day [default: -30]
    #[arg(long, allow_negative_numbers = true)]
    evt_start: Option<i32>,
    /// Last event-window day [default: 10]
    #[arg(long, allow_negative_numbers = true)]
    evt_end: Option<i32>,
    /// Minimum paired estimation-window returns per event [default: 30]
    #[arg(long)]
    min_est_obs: Option<usize>,
}

#[derive(Debug, Args)]
struct PolicyArgs {
    /// Two-sided significance level of the daily t-test [default: 0.05]
    #[arg(long)]
    alpha: Option<f64>,
    /// Consecutive significant run-up days needed to reject H0 [default: 3]
    #[arg(long)]
    min_run: Option<usize>,
    /// First day of the run-up window [default: -10]
    #[arg(long, allow_negative_numbers = true)]
    runup_start: Option<i32>,
    /// Last day of the run-up window [default: -1]
    #[arg(long, allow_negative_numbers = true)]
    runup_end: Option<i32>,
}

#[derive(Debug, Args)]
struct StudyArgs {
    /// Directory holding one `<security_id>.csv` price file per security
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Events file (security_id,market_id,announcement_date,label)
    #[arg(long)]
    events: Option<PathBuf>,
    /// Output directory for report.json, day_stats.csv, aar.csv, caar.csv
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional key = value config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fail when an announcement is not a trading day instead of rolling forward
    #[arg(long)]
    strict_day0: bool,
    /// Stamp the report with a fixed time so reruns are byte-identical
    #[arg(long)]
    fixed_clock: bool,
    #[command(flatten)]
    windows: WindowArgs,
    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Random seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Daily volatility of market returns
    #[arg(long, default_value_t = 0.01)]
    market_vol: f64,
    /// Daily volatility of idiosyncratic returns
    #[arg(long, default_value_t = 0.02)]
    idio_vol: f64,
    /// True per-day alpha of every stock
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    true_alpha: f64,
    /// Lower end of the uniform beta range
    #[arg(long, default_value_t = 0.5)]
    beta_min: f64,
    /// Upper end of the uniform beta range
    #[arg(long, default_value_t = 1.5)]
    beta_max: f64,
    /// Trading days between consecutive announcements
    #[arg(long, default_value_t = 5)]
    spacing: usize,
    /// First day on which leakage drift is added
    #[arg(long, allow_negative_numbers = true)]
    leak_onset: Option<i32>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Number of events
    #[arg(long, default_value_t = 40)]
    events: usize,
    /// Abnormal return added on each day from --leak-onset to -1
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    leak_drift: f64,
    /// Abnormal return added on day 0
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    leak_jump: f64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    windows: WindowArgs,
}

#[derive(Debug, Args)]
struct PowerArgs {
    /// Comma-separated daily leakage drifts
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.02")]
    drifts: Vec<f64>,
    /// Comma-separated event counts
    #[arg(long, value_delimiter = ',', default_value = "18,40")]
    events: Vec<usize>,
    /// Replications per grid cell
    #[arg(long, default_value_t = 200)]
    replications: u64,
    /// Optional CSV output file
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    windows: WindowArgs,
    #[command(flatten)]
    policy: PolicyArgs,
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<StudyError> for Failure {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::InvalidConfig(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(_) => Failure::Usage(e.to_string()),
            SimError::Pipeline { .. } => Failure::Data(e.to_string()),
        }
    }
}

fn windows_from(args: &WindowArgs, file: &FileConfig) -> WindowConfig {
    let d = WindowConfig::default();
    WindowConfig {
        est_start: args.est_start.or(file.est_start).unwrap_or(d.est_start),
        est_end: args.est_end.or(file.est_end).unwrap_or(d.est_end),
        evt_start: args.evt_start.or(file.evt_start).unwrap_or(d.evt_start),
        evt_end: args.evt_end.or(file.evt_end).unwrap_or(d.evt_end),
        min_estimation_obs: args.min_est_obs.or(file.min_est_obs).unwrap_or(d.min_estimation_obs),
    }
}

fn policy_from(args: &PolicyArgs, file: &FileConfig) -> (f64, DecisionPolicy) {
    let d = DecisionPolicy::default();
    (
        args.alpha.or(file.alpha).unwrap_or(0.05),
        DecisionPolicy {
            min_run: args.min_run.or(file.min_run).unwrap_or(d.min_run),
            runup_start: args.runup_start.or(file.runup_start).unwrap_or(d.runup_start),
            runup_end: args.runup_end.or(file.runup_end).unwrap_or(d.runup_end),
        },
    )
}

fn sim_config(sim: &SimArgs, windows: &WindowArgs, n_events: usize, drift: f64, jump: f64) -> SimConfig {
    let leakage = match (sim.leak_onset, drift != 0.0 || jump != 0.0) {
        (Some(onset_day), _) => Some(LeakageProfile {
            onset_day,
            daily_drift: drift,
            announcement_jump: jump,
        }),
        (None, true) => Some(LeakageProfile {
            onset_day: -16,
            daily_drift: drift,
            announcement_jump: jump,
        }),
        (None, false) => None,
    };
    SimConfig {
        n_events,
        seed: sim.seed,
        market_daily_vol: sim.market_vol,
        idio_vol: sim.idio_vol,
        true_alpha: sim.true_alpha,
        true_beta_range: (sim.beta_min, sim.beta_max),
        leakage,
        windows: windows_from(windows, &FileConfig::default()),
        announcement_spacing: sim.spacing,
        ..SimConfig::default()
    }
}

fn study(args: StudyArgs) -> Result<(), Failure> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p).map_err(Failure::Usage)?,
        None => FileConfig::default(),
    };
    let require = |flag: Option<PathBuf>, from_file: Option<PathBuf>, name: &str| {
        flag.or(from_file)
            .ok_or_else(|| Failure::Usage(format!("--{name} is required (flag or config file)")))
    };
    let data_dir = require(args.data_dir.clone(), file.data_dir.clone(), "data-dir")?;
    let events = require(args.events.clone(), file.events.clone(), "events")?;
    let out = require(args.out.clone(), file.out.clone(), "out")?;
    let (alpha_level, policy) = policy_from(&args.policy, &file);

    let cfg = StudyConfig {
        data_dir,
        events_file: events,
        windows: windows_from(&args.windows, &file),
        alpha_level,
        policy,
        strict_day0: args.strict_day0 || file.strict_day0.unwrap_or(false),
        fixed_clock: args.fixed_clock || file.fixed_clock.unwrap_or(false),
    };
    let report = run_study(&cfg)?;
    let written = emit_report(&report, &out)?;
    print!("{}", report.summary());
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let cfg = sim_config(&args.sim, &args.windows, args.events, args.leak_drift, args.leak_jump);
    let panel = simulate_panel(&cfg)?;
    panel
        .write_to(&args.out)
        .map_err(|e| Failure::Data(format!("{}: {e}", args.out.display())))?;
    println!(
        "wrote {} stocks, market {}, events.csv and truth.json to {}",
        panel.stocks.len(),
        eventstudy::synthetic::MARKET_ID,
        args.out.display()
    );
    Ok(())
}

fn power(args: PowerArgs) -> Result<(), Failure> {
    let n0 = args.events.first().copied().unwrap_or(40);
    let base = sim_config(&args.sim, &args.windows, n0, 0.0, 0.0);
    let (alpha_level, policy) = policy_from(&args.policy, &FileConfig::default());
    let cells = power_study(&base, &args.drifts, &args.events, args.replications, alpha_level, &policy)?;

    let mut csv = String::from("daily_drift,n_events,replications,rejections,rejection_rate\n");
    println!("{:>12} {:>8} {:>10} {:>8}", "drift", "events", "rejected", "rate");
    for c in &cells {
        println!(
            "{:>12} {:>8} {:>10} {:>8.3}",
            c.daily_drift,
            c.n_events,
            format!("{}/{}", c.rejections, c.replications),
            c.rejection_rate
        );
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            c.daily_drift, c.n_events, c.replications, c.rejections, c.rejection_rate
        );
    }
    if let Some(path) = &args.out {
        std::fs::write(path, csv).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("EVENTSTUDY_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Usage(format!("EVENTSTUDY_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = init_threads().and_then(|()| match cli.command {
        Command::Study(a) => study(a),
        Command::Simulate(a) => simulate(a),
        Command::Power(a) => power(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(USAGE_ERROR)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(DATA_ERROR)
        }
    }
}
