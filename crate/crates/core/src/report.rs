//! End-to-end study runner and report files.
//!
//! `emit_report` writes four files into the output directory:
//!
//! | file            | content                                                       |
//! |-----------------|---------------------------------------------------------------|
//! | `report.json`   | the full [`Report`]                                           |
//! | `day_stats.csv` | `event_day,aar,sigma,n,t_stat,p_value,significant,caar`       |
//! | `aar.csv`       | `event_day,value` AAR plot data                               |
//! | `caar.csv`      | `event_day,value` CAAR plot data                              |
//!
//! Undefined statistics are empty CSV cells and `null` in JSON.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_ingest::{
    align_event, read_event_file, read_price_file, AlignOptions, IngestError, PriceSeries,
    WindowConfig,
};
use crate::event_study::{analyze, format_percent, DayStat, Decision, DecisionPolicy, StatsError};
use crate::market_model::{build_panel, EventFit, ExcludedEvent, PanelError};
use crate::numfmt::sig17;

pub const TOOL_NAME: &str = "eventstudy";
pub const FIXED_CLOCK: &str = "1970-01-01T00:00:00Z";

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("events file: {0}")]
    Events(#[from] IngestError),
    #[error("{usable} usable events after {excluded} exclusions; at least 2 are needed")]
    NoUsableEvents { usable: usize, excluded: usize },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub data_dir: PathBuf,
    pub events_file: PathBuf,
    pub windows: WindowConfig,
    pub alpha_level: f64,
    pub policy: DecisionPolicy,
    pub strict_day0: bool,
    /// Stamp the report with a fixed time instead of the wall clock.
    pub fixed_clock: bool,
}

impl StudyConfig {
    pub fn new(data_dir: impl Into<PathBuf>, events_file: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            events_file: events_file.into(),
            windows: WindowConfig::default(),
            alpha_level: 0.05,
            policy: DecisionPolicy::default(),
            strict_day0: false,
            fixed_clock: false,
        }
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        self.windows
            .validate()
            .map_err(|e| StudyError::InvalidConfig(e.to_string()))?;
        self.policy
            .validate()
            .map_err(|e| StudyError::InvalidConfig(e.to_string()))?;
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return Err(StudyError::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha_level
            )));
        }
        if !self.data_dir.is_dir() {
            return Err(StudyError::InvalidConfig(format!(
                "data directory {} does not exist",
                self.data_dir.display()
            )));
        }
        if !self.events_file.is_file() {
            return Err(StudyError::InvalidConfig(format!(
                "events file {} does not exist",
                self.events_file.display()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub data_dir: String,
    pub events_file: String,
    pub windows: WindowConfig,
    pub alpha_level: f64,
    pub policy: DecisionPolicy,
    pub strict_day0: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub generated_at: String,
    pub config: ConfigEcho,
    pub n_events_input: usize,
    pub n_events_used: usize,
    pub day_stats: Vec<DayStat>,
    pub significant_days: Vec<i32>,
    pub reaction_fraction: Option<f64>,
    pub reaction_fraction_pct: Option<String>,
    pub hypothesis_decision: Decision,
    pub events: Vec<EventFit>,
    pub excluded: Vec<ExcludedEvent>,
}

impl Report {
    /// Short plain-text summary for terminals.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let w = &self.config.windows;
        let _ = writeln!(
            s,
            "events: {} used, {} excluded (of {})",
            self.n_events_used,
            self.excluded.len(),
            self.n_events_input
        );
        let _ = writeln!(
            s,
            "event window: {}..{}, alpha = {}",
            w.evt_start, w.evt_end, self.config.alpha_level
        );
        let days: Vec<String> = self.significant_days.iter().map(i32::to_string).collect();
        let _ = writeln!(
            s,
            "significant days: {}",
            if days.is_empty() { "none".to_string() } else { days.join(", ") }
        );
        if let Some(last) = self.day_stats.last() {
            let _ = writeln!(s, "CAAR({}): {:.4}", last.event_day, last.caar);
        }
        match &self.reaction_fraction_pct {
            Some(p) => {
                let _ = writeln!(s, "reaction already impounded by day -1: {p}");
            }
            None => {
                let _ = writeln!(s, "reaction fraction: undefined");
            }
        }
        let _ = writeln!(s, "decision: {}", self.hypothesis_decision.as_str());
        s
    }
}

fn load<'a>(
    cache: &'a mut HashMap<String, Result<PriceSeries, IngestError>>,
    data_dir: &Path,
    id: &str,
) -> &'a Result<PriceSeries, IngestError> {
    cache
        .entry(id.to_string())
        .or_insert_with(|| read_price_file(data_dir, id))
}

/// Reads the events file and price files, fits the market model per event
/// and runs the event-window tests.
///
/// Events whose files are missing or malformed, that fail alignment, or whose
/// fit fails are listed in `excluded` with the error kind.
pub fn run_study(cfg: &StudyConfig) -> Result<Report, StudyError> {
    cfg.validate()?;
    let events = read_event_file(&cfg.events_file)?;
    let opts = AlignOptions {
        strict_day0: cfg.strict_day0,
    };

    let mut cache = HashMap::new();
    let mut aligned = Vec::new();
    let mut excluded = Vec::new();
    for ev in &events {
        let result = (|| {
            let market = load(&mut cache, &cfg.data_dir, &ev.market_id).clone()?;
            let stock = load(&mut cache, &cfg.data_dir, &ev.security_id).clone()?;
            align_event(ev, &stock, &market, &cfg.windows, opts)
        })();
        match result {
            Ok(a) => aligned.push(a),
            Err(e) => excluded.push(ExcludedEvent {
                key: ev.key(),
                security_id: ev.security_id.clone(),
                reason: e.kind().to_string(),
                detail: e.to_string(),
            }),
        }
    }

    let built = match build_panel(&aligned, &cfg.windows) {
        Ok(b) => b,
        Err(PanelError::NoUsableEvents { excluded: n }) => {
            return Err(StudyError::NoUsableEvents {
                usable: 0,
                excluded: excluded.len() + n,
            })
        }
        Err(e) => return Err(StudyError::InvalidConfig(e.to_string())),
    };
    // Restore input order across the two exclusion stages.
    excluded.extend(built.excluded);
    let order: HashMap<String, usize> = events
        .iter()
        .enumerate()
        .rev()
        .map(|(i, e)| (e.key(), i))
        .collect();
    excluded.sort_by_key(|e| order.get(&e.key).copied().unwrap_or(usize::MAX));

    if built.fits.len() < 2 {
        return Err(StudyError::NoUsableEvents {
            usable: built.fits.len(),
            excluded: excluded.len(),
        });
    }

    let result = analyze(&built.panel, cfg.alpha_level, &cfg.policy)?;
    let generated_at = if cfg.fixed_clock {
        FIXED_CLOCK.to_string()
    } else {
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    };
    Ok(Report {
        tool: TOOL_NAME.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        generated_at,
        config: ConfigEcho {
            data_dir: cfg.data_dir.display().to_string(),
            events_file: cfg.events_file.display().to_string(),
            windows: cfg.windows,
            alpha_level: cfg.alpha_level,
            policy: cfg.policy,
            strict_day0: cfg.strict_day0,
        },
        n_events_input: events.len(),
        n_events_used: built.fits.len(),
        reaction_fraction_pct: result.reaction_fraction.map(format_percent),
        reaction_fraction: result.reaction_fraction,
        significant_days: result.significant_days,
        hypothesis_decision: result.hypothesis_decision,
        day_stats: result.stats,
        events: built.fits,
        excluded,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(sig17).unwrap_or_default()
}

pub fn report_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn day_stats_csv(report: &Report) -> String {
    let mut s = String::from("event_day,aar,sigma,n,t_stat,p_value,significant,caar\n");
    for d in &report.day_stats {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            d.event_day,
            sig17(d.aar),
            opt(d.sigma),
            d.n,
            opt(d.t_stat),
            opt(d.p_value),
            d.significant,
            sig17(d.caar)
        );
    }
    s
}

fn series_csv(report: &Report, value: impl Fn(&DayStat) -> f64) -> String {
    let mut s = String::from("event_day,value\n");
    for d in &report.day_stats {
        let _ = writeln!(s, "{},{}", d.event_day, sig17(value(d)));
    }
    s
}

/// Writes the report files into `out_dir`, creating it if needed.
pub fn emit_report(report: &Report, out_dir: &Path) -> Result<Vec<PathBuf>, StudyError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| StudyError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let files = [
        ("report.json", report_json(report)),
        ("day_stats.csv", day_stats_csv(report)),
        ("aar.csv", series_csv(report, |d| d.aar)),
        ("caar.csv", series_csv(report, |d| d.caar)),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Reads a `report.json` written by [`emit_report`].
pub fn read_report(path: &Path) -> Result<Report, StudyError> {
    let text = fs::read_to_string(path).map_err(|source| StudyError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| StudyError::InvalidConfig(format!("{}: {e}", path.display())))
}
