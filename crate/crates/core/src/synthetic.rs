//! Synthetic markets with known market-model parameters and optional
//! pre-announcement leakage.
//!
//! Returns are simulated first and integrated into prices starting at 100, so
//! every injected abnormal return is exact. Randomness comes from ChaCha8
//! (`rand_chacha::ChaCha8Rng::seed_from_u64`); Gaussian draws use the cosine
//! branch of Box-Muller on two 53-bit uniforms, which any implementation of
//! the same generator can reproduce. Draw order for one panel:
//!
//! 1. one market return per calendar day after the first;
//! 2. per event, in order: its beta (uniform on the beta range), then one
//!    idiosyncratic draw per return day of its price file.

use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_ingest::{
    align_event, events_to_csv, AlignOptions, EventSpec, PricePoint, PriceSeries, WindowConfig,
};
use crate::event_study::{analyze, Decision, DecisionPolicy, EventStudyResult};
use crate::market_model::build_panel;

pub const MARKET_ID: &str = "MKT";
/// Trading days of price history kept after the end of the event window.
const POST_EVENT_MARGIN: i32 = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("replication {replication}: {message}")]
    Pipeline { replication: u64, message: String },
}

/// Abnormal drift added on `[onset_day, -1]` plus a jump on day 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageProfile {
    pub onset_day: i32,
    pub daily_drift: f64,
    pub announcement_jump: f64,
}

impl LeakageProfile {
    pub fn injected(&self, day: i32) -> f64 {
        if day == 0 {
            self.announcement_jump
        } else if (self.onset_day..=-1).contains(&day) {
            self.daily_drift
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_events: usize,
    pub seed: u64,
    pub market_daily_vol: f64,
    pub idio_vol: f64,
    pub true_alpha: f64,
    pub true_beta_range: (f64, f64),
    pub leakage: Option<LeakageProfile>,
    pub windows: WindowConfig,
    /// Trading days between consecutive announcements.
    pub announcement_spacing: usize,
    /// First calendar day (weekends are skipped).
    pub start_date: NaiveDate,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_events: 40,
            seed: 0,
            market_daily_vol: 0.01,
            idio_vol: 0.02,
            true_alpha: 0.0,
            true_beta_range: (0.5, 1.5),
            leakage: None,
            windows: WindowConfig::default(),
            announcement_spacing: 5,
            start_date: NaiveDate::from_ymd_opt(2015, 1, 5).expect("valid date"),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        self.windows
            .validate()
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        if self.n_events < 2 {
            return bad(format!("n_events must be at least 2, got {}", self.n_events));
        }
        for (name, v) in [("market_daily_vol", self.market_daily_vol), ("idio_vol", self.idio_vol)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !self.true_alpha.is_finite() {
            return bad("true_alpha must be finite".into());
        }
        let (lo, hi) = self.true_beta_range;
        if !(lo > 0.0 && lo <= hi && hi <= 4.0) {
            return bad(format!("beta range must lie within (0, 4], got [{lo}, {hi}]"));
        }
        if self.announcement_spacing == 0 {
            return bad("announcement_spacing must be positive".into());
        }
        if let Some(l) = self.leakage {
            if !(self.windows.evt_start..=-1).contains(&l.onset_day) {
                return bad(format!(
                    "leakage onset {} outside [{}, -1]",
                    l.onset_day, self.windows.evt_start
                ));
            }
            if !(l.daily_drift.is_finite() && l.announcement_jump.is_finite()) {
                return bad("leakage drift and jump must be finite".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectedReturn {
    pub event_day: i32,
    pub abnormal_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEvent {
    pub security_id: String,
    pub label: String,
    pub announcement_date: NaiveDate,
    pub alpha: f64,
    pub beta: f64,
    pub injected: Vec<InjectedReturn>,
}

/// Everything needed to check an estimate against the generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub generator: String,
    pub config: SimConfig,
    pub events: Vec<TruthEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPanel {
    pub market: PriceSeries,
    pub stocks: Vec<PriceSeries>,
    pub events: Vec<EventSpec>,
    pub truth: GroundTruth,
}

impl SimulatedPanel {
    /// Writes `MKT.csv`, one `<security_id>.csv` per stock, `events.csv` and
    /// `truth.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{MARKET_ID}.csv")), self.market.to_csv())?;
        for s in &self.stocks {
            fs::write(dir.join(format!("{}.csv", s.security_id())), s.to_csv())?;
        }
        fs::write(dir.join("events.csv"), events_to_csv(&self.events))?;
        let mut truth = serde_json::to_string_pretty(&self.truth).map_err(io::Error::other)?;
        truth.push('\n');
        fs::write(dir.join("truth.json"), truth)
    }

    /// Aligns every event against the in-memory series.
    pub fn study(
        &self,
        alpha_level: f64,
        policy: &DecisionPolicy,
    ) -> Result<EventStudyResult, String> {
        let cfg = &self.truth.config.windows;
        let aligned = self
            .events
            .iter()
            .zip(&self.stocks)
            .map(|(ev, stock)| align_event(ev, stock, &self.market, cfg, AlignOptions::default()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let built = build_panel(&aligned, cfg).map_err(|e| e.to_string())?;
        analyze(&built.panel, alpha_level, policy).map_err(|e| e.to_string())
    }
}

struct Gaussian(ChaCha8Rng);

impl Gaussian {
    fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform on [0, 1) with 53 random bits.
    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}

/// SplitMix64 finalizer over `(seed, index)`; gives each replication an
/// independent stream regardless of scheduling.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn weekday_calendar(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut cur = start;
    while out.len() < n {
        if !matches!(cur.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(cur);
        }
        cur += Duration::days(1);
    }
    out
}

fn integrate(id: String, dates: &[NaiveDate], returns: &[f64]) -> PriceSeries {
    let mut price = 100.0;
    let mut points = Vec::with_capacity(dates.len());
    points.push(PricePoint {
        date: dates[0],
        adj_close: price,
    });
    for (date, r) in dates[1..].iter().zip(returns) {
        price *= 1.0 + r;
        points.push(PricePoint {
            date: *date,
            adj_close: price,
        });
    }
    PriceSeries::new(id, points).expect("simulated prices are positive and dated uniquely")
}

/// Generates one market index, `n_events` stocks and the matching events.
///
/// Each stock's price file spans event-days `est_start - 1` through
/// `evt_end + 20`; the market covers the union of all those spans.
pub fn simulate_panel(cfg: &SimConfig) -> Result<SimulatedPanel, SimError> {
    cfg.validate()?;
    let w = &cfg.windows;
    let first_day = w.est_start - 1;
    let last_day = w.evt_end + POST_EVENT_MARGIN;
    let span = (last_day - first_day + 1) as usize;
    let len = (cfg.n_events - 1) * cfg.announcement_spacing + span;

    let calendar = weekday_calendar(cfg.start_date, len);
    let mut rng = Gaussian::new(cfg.seed);
    let market_returns: Vec<f64> = (1..len)
        .map(|_| cfg.market_daily_vol * rng.standard_normal())
        .collect();
    let market = integrate(MARKET_ID.to_string(), &calendar, &market_returns);

    let (beta_lo, beta_hi) = cfg.true_beta_range;
    let mut stocks = Vec::with_capacity(cfg.n_events);
    let mut events = Vec::with_capacity(cfg.n_events);
    let mut truth = Vec::with_capacity(cfg.n_events);
    for j in 0..cfg.n_events {
        let beta = beta_lo + (beta_hi - beta_lo) * rng.uniform();
        let base = j * cfg.announcement_spacing;
        let day0 = base + (-first_day) as usize;
        let mut rets = Vec::with_capacity(span - 1);
        for idx in base + 1..base + span {
            let day = idx as i32 - day0 as i32;
            let eps = cfg.idio_vol * rng.standard_normal();
            let inj = cfg.leakage.map_or(0.0, |l| l.injected(day));
            // market_returns[i] is the return into calendar[i + 1]
            rets.push(cfg.true_alpha + beta * market_returns[idx - 1] + eps + inj);
        }
        let security_id = format!("S{:03}", j + 1);
        let label = format!("SIM-{:03}", j + 1);
        stocks.push(integrate(security_id.clone(), &calendar[base..base + span], &rets));
        let injected = cfg
            .leakage
            .map(|l| {
                (w.evt_start..=w.evt_end)
                    .filter(|&d| l.injected(d) != 0.0)
                    .map(|d| InjectedReturn {
                        event_day: d,
                        abnormal_return: l.injected(d),
                    })
                    .collect()
            })
            .unwrap_or_default();
        truth.push(TruthEvent {
            security_id: security_id.clone(),
            label: label.clone(),
            announcement_date: calendar[day0],
            alpha: cfg.true_alpha,
            beta,
            injected,
        });
        events.push(EventSpec {
            security_id,
            market_id: MARKET_ID.to_string(),
            announcement_date: calendar[day0],
            label,
        });
    }

    Ok(SimulatedPanel {
        market,
        stocks,
        events,
        truth: GroundTruth {
            generator: "ChaCha8Rng::seed_from_u64 + Box-Muller (cosine branch)".into(),
            config: cfg.clone(),
            events: truth,
        },
    })
}

/// Runs the full study on `replications` independent panels. Replication `r`
/// uses seed `derive_seed(cfg.seed, r)`; output is in replication order.
pub fn replicate(
    cfg: &SimConfig,
    replications: u64,
    alpha_level: f64,
    policy: &DecisionPolicy,
) -> Result<Vec<EventStudyResult>, SimError> {
    cfg.validate()?;
    if replications == 0 {
        return Err(SimError::InvalidConfig("replications must be at least 1".into()));
    }
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let sub = SimConfig {
                seed: derive_seed(cfg.seed, r),
                ..cfg.clone()
            };
            simulate_panel(&sub)?
                .study(alpha_level, policy)
                .map_err(|message| SimError::Pipeline {
                    replication: r,
                    message,
                })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCell {
    pub daily_drift: f64,
    pub n_events: usize,
    pub replications: u64,
    pub rejections: u64,
    pub rejection_rate: f64,
}

/// Rejection rate of H0 for every `(drift, n_events)` pair.
///
/// Each cell copies `base`, sets its event count, and sets the leakage drift
/// (keeping `base`'s onset and jump, or onset -16 and no jump when `base` has
/// no leakage). Cells share replication seeds.
pub fn power_study(
    base: &SimConfig,
    drifts: &[f64],
    n_events: &[usize],
    replications: u64,
    alpha_level: f64,
    policy: &DecisionPolicy,
) -> Result<Vec<PowerCell>, SimError> {
    if replications == 0 {
        return Err(SimError::InvalidConfig("replications must be at least 1".into()));
    }
    if drifts.is_empty() || n_events.is_empty() {
        return Err(SimError::InvalidConfig("empty power grid".into()));
    }
    let template = base.leakage.unwrap_or(LeakageProfile {
        onset_day: -16,
        daily_drift: 0.0,
        announcement_jump: 0.0,
    });
    let mut cells = Vec::with_capacity(drifts.len() * n_events.len());
    for &drift in drifts {
        for &n in n_events {
            let cfg = SimConfig {
                n_events: n,
                leakage: Some(LeakageProfile {
                    daily_drift: drift,
                    ..template
                }),
                ..base.clone()
            };
            let results = replicate(&cfg, replications, alpha_level, policy)?;
            let rejections = results
                .iter()
                .filter(|r| r.hypothesis_decision == Decision::RejectH0)
                .count() as u64;
            cells.push(PowerCell {
                daily_drift: drift,
                n_events: n,
                replications,
                rejections,
                rejection_rate: rejections as f64 / replications as f64,
            });
        }
    }
    Ok(cells)
}
