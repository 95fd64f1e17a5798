//! Market-model estimation and abnormal returns.
//!
//! Each event gets one `(alpha, beta)` pair, fitted by ordinary least squares
//! on the event-days of its estimation window. Abnormal returns are the
//! residuals of that fit evaluated over the event window.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_ingest::{AlignedEvent, WindowConfig};

/// Default minimum number of paired estimation observations.
pub const MIN_ESTIMATION_OBS: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FitError {
    #[error("{n} paired observations, need at least {min}")]
    TooFewObservations { n: usize, min: usize },
    #[error("market returns have zero variance")]
    DegenerateRegressor,
    #[error("stock and market return slices differ in length ({stock} vs {market})")]
    LengthMismatch { stock: usize, market: usize },
    #[error("non-finite return in estimation sample")]
    NonFinite,
}

impl FitError {
    pub fn kind(&self) -> &'static str {
        match self {
            FitError::TooFewObservations { .. } => "TooFewObservations",
            FitError::DegenerateRegressor => "DegenerateRegressor",
            FitError::LengthMismatch { .. } => "LengthMismatch",
            FitError::NonFinite => "NonFinite",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PanelError {
    #[error("no usable events: all {excluded} events were excluded")]
    NoUsableEvents { excluded: usize },
    #[error("abnormal return for `{key}` on day {day} is not finite")]
    NonFinite { key: String, day: i32 },
    #[error("`{key}` has an abnormal return on day {day}, outside the event window")]
    DayOutsideWindow { key: String, day: i32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketModelFit {
    pub alpha: f64,
    pub beta: f64,
    pub n_obs: usize,
    /// SSR / (n - 2).
    pub residual_variance: f64,
    pub r_squared: f64,
}

/// [`ols_fit_with_floor`] at the default floor of 30 observations.
pub fn ols_fit(stock: &[f64], market: &[f64]) -> Result<MarketModelFit, FitError> {
    ols_fit_with_floor(stock, market, MIN_ESTIMATION_OBS)
}

/// Least-squares fit of `stock = alpha + beta * market` using centered
/// two-pass sums.
///
/// `r_squared` is reported as 0 when the stock returns are constant.
pub fn ols_fit_with_floor(
    stock: &[f64],
    market: &[f64],
    min_obs: usize,
) -> Result<MarketModelFit, FitError> {
    if stock.len() != market.len() {
        return Err(FitError::LengthMismatch {
            stock: stock.len(),
            market: market.len(),
        });
    }
    let n = stock.len();
    let min = min_obs.max(3);
    if n < min {
        return Err(FitError::TooFewObservations { n, min });
    }
    if stock.iter().chain(market).any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    if market.iter().all(|&m| m == market[0]) {
        return Err(FitError::DegenerateRegressor);
    }

    let nf = n as f64;
    let mean_m = market.iter().sum::<f64>() / nf;
    let mean_s = stock.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&s, &m) in stock.iter().zip(market) {
        let dm = m - mean_m;
        let ds = s - mean_s;
        sxx += dm * dm;
        sxy += dm * ds;
        syy += ds * ds;
    }
    if sxx <= 0.0 {
        return Err(FitError::DegenerateRegressor);
    }

    let beta = sxy / sxx;
    let alpha = mean_s - beta * mean_m;
    let ssr: f64 = stock
        .iter()
        .zip(market)
        .map(|(&s, &m)| {
            let e = s - alpha - beta * m;
            e * e
        })
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ssr / syy).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(MarketModelFit {
        alpha,
        beta,
        n_obs: n,
        residual_variance: ssr / (nf - 2.0),
        r_squared,
    })
}

/// Realized stock return minus the market-model prediction.
#[inline]
pub fn abnormal_return(fit: &MarketModelFit, r_stock: f64, r_market: f64) -> f64 {
    r_stock - (fit.beta * r_market + fit.alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub key: String,
    pub abnormal: BTreeMap<i32, f64>,
}

/// Abnormal returns of every usable event over the event window.
#[derive(Debug, Clone, PartialEq)]
pub struct AbnormalReturnPanel {
    event_days: Vec<i32>,
    rows: Vec<PanelRow>,
    counts: BTreeMap<i32, usize>,
}

impl AbnormalReturnPanel {
    pub fn new(
        event_days: impl IntoIterator<Item = i32>,
        rows: Vec<PanelRow>,
    ) -> Result<Self, PanelError> {
        let mut event_days: Vec<i32> = event_days.into_iter().collect();
        event_days.sort_unstable();
        event_days.dedup();
        let mut counts: BTreeMap<i32, usize> = event_days.iter().map(|&d| (d, 0)).collect();
        for row in &rows {
            for (&day, &ar) in &row.abnormal {
                if !ar.is_finite() {
                    return Err(PanelError::NonFinite {
                        key: row.key.clone(),
                        day,
                    });
                }
                match counts.get_mut(&day) {
                    Some(c) => *c += 1,
                    None => {
                        return Err(PanelError::DayOutsideWindow {
                            key: row.key.clone(),
                            day,
                        })
                    }
                }
            }
        }
        Ok(Self {
            event_days,
            rows,
            counts,
        })
    }

    pub fn event_days(&self) -> &[i32] {
        &self.event_days
    }

    pub fn rows(&self) -> &[PanelRow] {
        &self.rows
    }

    pub fn n_events(&self) -> usize {
        self.rows.len()
    }

    /// Number of events with an abnormal return on `day`.
    pub fn n_at(&self, day: i32) -> usize {
        self.counts.get(&day).copied().unwrap_or(0)
    }

    /// Abnormal returns on `day`, in event order, skipping events without data.
    pub fn values_at(&self, day: i32) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().filter_map(move |r| r.abnormal.get(&day).copied())
    }

    pub fn row(&self, key: &str) -> Option<&PanelRow> {
        self.rows.iter().find(|r| r.key == key)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventFit {
    pub key: String,
    pub security_id: String,
    pub fit: MarketModelFit,
    /// Event-window days without an abnormal return.
    pub gaps: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedEvent {
    pub key: String,
    pub security_id: String,
    /// Error variant name, e.g. `DegenerateRegressor`.
    pub reason: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelBuild {
    pub fits: Vec<EventFit>,
    pub panel: AbnormalReturnPanel,
    pub excluded: Vec<ExcludedEvent>,
}

fn fit_event(ev: &AlignedEvent, cfg: &WindowConfig) -> Result<(EventFit, PanelRow), FitError> {
    let (stock, market): (Vec<f64>, Vec<f64>) = ev
        .coverage
        .range(cfg.est_start..=cfg.est_end)
        .filter_map(|&d| ev.pair(d))
        .unzip();
    let fit = ols_fit_with_floor(&stock, &market, cfg.min_estimation_obs)?;

    let mut abnormal = BTreeMap::new();
    let mut gaps = Vec::new();
    for day in cfg.event_days() {
        match ev.pair(day) {
            Some((rs, rm)) => {
                abnormal.insert(day, abnormal_return(&fit, rs, rm));
            }
            None => gaps.push(day),
        }
    }
    let key = ev.event.key();
    Ok((
        EventFit {
            key: key.clone(),
            security_id: ev.event.security_id.clone(),
            fit,
            gaps,
        },
        PanelRow { key, abnormal },
    ))
}

/// Fits every event on its estimation window and collects event-window
/// abnormal returns. Events whose fit fails are listed in `excluded`; output
/// order follows input order.
pub fn build_panel(events: &[AlignedEvent], cfg: &WindowConfig) -> Result<PanelBuild, PanelError> {
    let results: Vec<_> = events.par_iter().map(|ev| fit_event(ev, cfg)).collect();

    let mut fits = Vec::new();
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for (ev, res) in events.iter().zip(results) {
        match res {
            Ok((fit, row)) => {
                fits.push(fit);
                rows.push(row);
            }
            Err(e) => excluded.push(ExcludedEvent {
                key: ev.event.key(),
                security_id: ev.event.security_id.clone(),
                reason: e.kind().to_string(),
                detail: e.to_string(),
            }),
        }
    }
    if rows.is_empty() {
        return Err(PanelError::NoUsableEvents {
            excluded: excluded.len(),
        });
    }
    let panel = AbnormalReturnPanel::new(cfg.event_days(), rows)?;
    Ok(PanelBuild {
        fits,
        panel,
        excluded,
    })
}
