//! Price/event CSV ingestion and trading-day alignment.
//!
//! Event time is trading-day time. The market index series acts as the
//! trading calendar: event-day 0 is the announcement's row in that calendar
//! and event-day `k` is the `k`-th calendar row after (or before) it. A stock
//! that skips a calendar day loses the returns that would touch that day;
//! those event-days are dropped from the event's coverage.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numfmt::sig17;
use crate::returns::simple_return;

pub const PRICE_HEADER: &str = "date,adj_close";
pub const EVENT_HEADER: &str = "security_id,market_id,announcement_date,label";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("bad header: expected `{expected}`, found `{found}`")]
    BadHeader {
        expected: &'static str,
        found: String,
    },
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: non-positive price {price} on {date}")]
    NonPositivePrice {
        line: u64,
        date: NaiveDate,
        price: f64,
    },
    #[error("duplicate date {date}")]
    DuplicateDate { date: NaiveDate },
    #[error("file has no data rows")]
    EmptyFile,
    #[error("announcement date {date} is not a trading day for `{security_id}`")]
    AnnouncementNotTradingDay {
        security_id: String,
        date: NaiveDate,
    },
    #[error("no trading day on or after announcement date {date}")]
    AnnouncementOutOfRange { date: NaiveDate },
    #[error("`{security_id}`: {have} paired estimation-window returns, need at least {need}")]
    InsufficientHistory {
        security_id: String,
        have: usize,
        need: usize,
    },
    #[error("market `{market_id}` has no row for {date}, which `{security_id}` trades")]
    IndexMismatch {
        security_id: String,
        market_id: String,
        date: NaiveDate,
    },
    #[error("invalid window configuration: {0}")]
    InvalidWindow(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl IngestError {
    pub fn kind(&self) -> &'static str {
        match self {
            IngestError::BadHeader { .. } => "BadHeader",
            IngestError::MalformedRow { .. } => "MalformedRow",
            IngestError::NonPositivePrice { .. } => "NonPositivePrice",
            IngestError::DuplicateDate { .. } => "DuplicateDate",
            IngestError::EmptyFile => "EmptyFile",
            IngestError::AnnouncementNotTradingDay { .. } => "AnnouncementNotTradingDay",
            IngestError::AnnouncementOutOfRange { .. } => "AnnouncementOutOfRange",
            IngestError::InsufficientHistory { .. } => "InsufficientHistory",
            IngestError::IndexMismatch { .. } => "IndexMismatch",
            IngestError::InvalidWindow(_) => "InvalidWindow",
            IngestError::Io { .. } => "Io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub date: NaiveDate,
    pub adj_close: f64,
}

/// Adjusted closing prices of one security (or index), sorted by date.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    security_id: String,
    observations: Vec<PricePoint>,
}

impl PriceSeries {
    /// Builds a series from unordered points, enforcing the date and price
    /// invariants. Points are sorted by date.
    pub fn new(
        security_id: impl Into<String>,
        mut observations: Vec<PricePoint>,
    ) -> Result<Self, IngestError> {
        for (i, p) in observations.iter().enumerate() {
            if !p.adj_close.is_finite() {
                return Err(IngestError::MalformedRow {
                    line: i as u64 + 2,
                    reason: format!("non-finite price on {}", p.date),
                });
            }
            if p.adj_close <= 0.0 {
                return Err(IngestError::NonPositivePrice {
                    line: i as u64 + 2,
                    date: p.date,
                    price: p.adj_close,
                });
            }
        }
        observations.sort_by_key(|p| p.date);
        if let Some(w) = observations.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(IngestError::DuplicateDate { date: w[0].date });
        }
        Ok(Self {
            security_id: security_id.into(),
            observations,
        })
    }

    pub fn security_id(&self) -> &str {
        &self.security_id
    }

    pub fn observations(&self) -> &[PricePoint] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.observations.iter().map(|p| p.date)
    }

    pub fn price_on(&self, date: NaiveDate) -> Option<f64> {
        self.observations
            .binary_search_by_key(&date, |p| p.date)
            .ok()
            .map(|i| self.observations[i].adj_close)
    }

    /// Serializes in the ingestion format. Prices carry 17 significant
    /// digits, so [`parse_price_csv`] restores them exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.observations.len() + 1));
        out.push_str(PRICE_HEADER);
        out.push('\n');
        for p in &self.observations {
            out.push_str(&p.date.format("%Y-%m-%d").to_string());
            out.push(',');
            out.push_str(&sig17(p.adj_close));
            out.push('\n');
        }
        out
    }
}

/// One announcement. `announcement_date` is event-day 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSpec {
    pub security_id: String,
    pub market_id: String,
    pub announcement_date: NaiveDate,
    pub label: String,
}

impl EventSpec {
    /// Label used to key the event in panels and reports; falls back to
    /// `security_id@date` when the label column is blank.
    pub fn key(&self) -> String {
        if self.label.trim().is_empty() {
            format!("{}@{}", self.security_id, self.announcement_date)
        } else {
            self.label.clone()
        }
    }
}

/// Estimation and event windows as inclusive trading-day offsets from day 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub est_start: i32,
    pub est_end: i32,
    pub evt_start: i32,
    pub evt_end: i32,
    /// Minimum number of paired estimation-window returns.
    pub min_estimation_obs: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            est_start: -89,
            est_end: -31,
            evt_start: -30,
            evt_end: 10,
            min_estimation_obs: 30,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        let Self {
            est_start,
            est_end,
            evt_start,
            evt_end,
            min_estimation_obs,
        } = *self;
        if !(est_start < est_end && est_end < evt_start && evt_start <= 0 && 0 <= evt_end) {
            return Err(IngestError::InvalidWindow(format!(
                "need est_start < est_end < evt_start <= 0 <= evt_end, got {est_start}, {est_end}, {evt_start}, {evt_end}"
            )));
        }
        if min_estimation_obs < 2 {
            return Err(IngestError::InvalidWindow(
                "estimation floor must be at least 2 observations".into(),
            ));
        }
        if self.estimation_len() < min_estimation_obs {
            return Err(IngestError::InvalidWindow(format!(
                "estimation window has {} days, below the floor of {min_estimation_obs}",
                self.estimation_len()
            )));
        }
        Ok(())
    }

    pub fn estimation_len(&self) -> usize {
        (self.est_end - self.est_start + 1).max(0) as usize
    }

    pub fn event_len(&self) -> usize {
        (self.evt_end - self.evt_start + 1).max(0) as usize
    }

    pub fn event_days(&self) -> std::ops::RangeInclusive<i32> {
        self.evt_start..=self.evt_end
    }

    pub fn in_estimation(&self, day: i32) -> bool {
        (self.est_start..=self.est_end).contains(&day)
    }

    pub fn in_event(&self, day: i32) -> bool {
        self.event_days().contains(&day)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignOptions {
    /// Reject announcements that do not fall on a trading day instead of
    /// rolling them forward to the next one.
    pub strict_day0: bool,
}

/// Stock and market returns of one event keyed by event-day.
///
/// `stock_returns` and `market_returns` always share the key set `coverage`,
/// and every key lies in `[est_start, evt_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedEvent {
    pub event: EventSpec,
    /// Calendar date that event-day 0 was mapped to.
    pub day0_date: NaiveDate,
    pub stock_returns: BTreeMap<i32, f64>,
    pub market_returns: BTreeMap<i32, f64>,
    pub coverage: BTreeSet<i32>,
}

impl AlignedEvent {
    /// Assembles an event from `(event_day, stock_return, market_return)`
    /// triples.
    pub fn from_pairs(
        event: EventSpec,
        day0_date: NaiveDate,
        pairs: impl IntoIterator<Item = (i32, f64, f64)>,
    ) -> Self {
        let mut stock_returns = BTreeMap::new();
        let mut market_returns = BTreeMap::new();
        for (day, rs, rm) in pairs {
            stock_returns.insert(day, rs);
            market_returns.insert(day, rm);
        }
        let coverage = stock_returns.keys().copied().collect();
        Self {
            event,
            day0_date,
            stock_returns,
            market_returns,
            coverage,
        }
    }

    /// Paired `(stock, market)` returns at `day`, if covered.
    pub fn pair(&self, day: i32) -> Option<(f64, f64)> {
        Some((*self.stock_returns.get(&day)?, *self.market_returns.get(&day)?))
    }
}

fn check_header(found: &csv::StringRecord, expected: &'static str) -> Result<(), IngestError> {
    let joined = found
        .iter()
        .map(|f| f.trim().trim_start_matches('\u{feff}'))
        .collect::<Vec<_>>()
        .join(",");
    if joined == expected {
        Ok(())
    } else {
        Err(IngestError::BadHeader {
            expected,
            found: joined,
        })
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    IngestError::MalformedRow {
        line,
        reason: e.to_string(),
    }
}

fn parse_date(raw: &str, line: u64) -> Result<NaiveDate, IngestError> {
    NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|_| IngestError::MalformedRow {
        line,
        reason: format!("invalid date `{raw}`, expected YYYY-MM-DD"),
    })
}

/// Parses a `date,adj_close` price file. Rows may appear in any order.
pub fn parse_price_csv(security_id: &str, text: &str) -> Result<PriceSeries, IngestError> {
    let mut rdr = reader(text);
    let header = rdr.headers().map_err(csv_error)?.clone();
    check_header(&header, PRICE_HEADER)?;

    let mut points = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 2 {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let date = parse_date(&record[0], line)?;
        let price: f64 = record[1].parse().map_err(|_| IngestError::MalformedRow {
            line,
            reason: format!("non-numeric price `{}`", &record[1]),
        })?;
        if !price.is_finite() {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("non-finite price `{}`", &record[1]),
            });
        }
        if price <= 0.0 {
            return Err(IngestError::NonPositivePrice { line, date, price });
        }
        points.push(PricePoint {
            date,
            adj_close: price,
        });
    }
    PriceSeries::new(security_id, points)
}

/// Parses the events file, preserving row order.
pub fn parse_event_csv(text: &str) -> Result<Vec<EventSpec>, IngestError> {
    let mut rdr = reader(text);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(IngestError::EmptyFile);
    }
    check_header(&header, EVENT_HEADER)?;

    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 4 {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected 4 fields, found {}", record.len()),
            });
        }
        if record[0].is_empty() || record[1].is_empty() {
            return Err(IngestError::MalformedRow {
                line,
                reason: "empty security or market id".into(),
            });
        }
        events.push(EventSpec {
            security_id: record[0].to_string(),
            market_id: record[1].to_string(),
            announcement_date: parse_date(&record[2], line)?,
            label: record[3].to_string(),
        });
    }
    if events.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    Ok(events)
}

/// Serializes events in the ingestion format.
pub fn events_to_csv(events: &[EventSpec]) -> String {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    wtr.write_record(EVENT_HEADER.split(','))
        .expect("in-memory write");
    for e in events {
        wtr.write_record([
            e.security_id.as_str(),
            e.market_id.as_str(),
            &e.announcement_date.format("%Y-%m-%d").to_string(),
            e.label.as_str(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn read_text(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Reads `<data_dir>/<security_id>.csv`.
pub fn read_price_file(data_dir: &Path, security_id: &str) -> Result<PriceSeries, IngestError> {
    let path = data_dir.join(format!("{security_id}.csv"));
    parse_price_csv(security_id, &read_text(&path)?)
}

pub fn read_event_file(path: &Path) -> Result<Vec<EventSpec>, IngestError> {
    parse_event_csv(&read_text(path)?)
}

/// Maps an announcement onto trading-day event time and computes the paired
/// returns for every event-day in `[est_start, evt_end]`.
///
/// The market series is the trading calendar. Day 0 is the announcement
/// date, or the next trading day when the announcement falls on a day the
/// market did not trade (an error under `strict_day0`).
pub fn align_event(
    event: &EventSpec,
    stock: &PriceSeries,
    market: &PriceSeries,
    cfg: &WindowConfig,
    opts: AlignOptions,
) -> Result<AlignedEvent, IngestError> {
    cfg.validate()?;
    let calendar = market.observations();
    let ann = event.announcement_date;

    let day0 = match calendar.binary_search_by_key(&ann, |p| p.date) {
        Ok(i) => i,
        Err(_) if opts.strict_day0 => {
            return Err(IngestError::AnnouncementNotTradingDay {
                security_id: event.security_id.clone(),
                date: ann,
            })
        }
        Err(i) if i == calendar.len() => {
            return Err(IngestError::AnnouncementOutOfRange { date: ann })
        }
        Err(i) => i,
    };
    if opts.strict_day0 && stock.price_on(ann).is_none() {
        return Err(IngestError::AnnouncementNotTradingDay {
            security_id: event.security_id.clone(),
            date: ann,
        });
    }

    let last = calendar.len() as i64 - 1;
    let first_idx = (day0 as i64 + cfg.est_start as i64 - 1).clamp(0, last) as usize;
    let last_idx = (day0 as i64 + cfg.evt_end as i64).clamp(0, last) as usize;
    let (span_lo, span_hi) = (calendar[first_idx].date, calendar[last_idx].date);
    if let Some(date) = stock
        .dates()
        .filter(|d| (span_lo..=span_hi).contains(d))
        .find(|d| market.price_on(*d).is_none())
    {
        return Err(IngestError::IndexMismatch {
            security_id: event.security_id.clone(),
            market_id: event.market_id.clone(),
            date,
        });
    }

    let mut pairs = Vec::with_capacity(cfg.evt_end.abs_diff(cfg.est_start) as usize + 1);
    for day in cfg.est_start..=cfg.evt_end {
        let idx = day0 as i64 + day as i64;
        if idx < 1 || idx > last {
            continue;
        }
        let (prev, cur) = (calendar[idx as usize - 1], calendar[idx as usize]);
        let (Some(s_prev), Some(s_cur)) = (stock.price_on(prev.date), stock.price_on(cur.date))
        else {
            continue;
        };
        pairs.push((
            day,
            simple_return(s_prev, s_cur),
            simple_return(prev.adj_close, cur.adj_close),
        ));
    }

    let aligned = AlignedEvent::from_pairs(event.clone(), calendar[day0].date, pairs);
    let have = aligned
        .coverage
        .iter()
        .filter(|d| cfg.in_estimation(**d))
        .count();
    if have < cfg.min_estimation_obs {
        return Err(IngestError::InsufficientHistory {
            security_id: event.security_id.clone(),
            have,
            need: cfg.min_estimation_obs,
        });
    }
    Ok(aligned)
}
