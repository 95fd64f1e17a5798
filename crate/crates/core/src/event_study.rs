//! AAR/CAAR aggregation, cross-sectional t-tests and the run-up decision.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_model::AbnormalReturnPanel;
use crate::student_t;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("no events have data on day {day}")]
    NoData { day: i32 },
    #[error("{n} events on day {day}; the cross-sectional deviation needs at least 2")]
    InsufficientCrossSection { day: i32, n: usize },
    #[error("zero cross-sectional dispersion with non-zero mean {aar}")]
    ZeroDispersion { aar: f64 },
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("CAAR on day 0 is zero; reaction fraction undefined")]
    UndefinedFraction,
    #[error("day {0} is outside the event window")]
    MissingDay(i32),
    #[error("invalid decision policy: {0}")]
    InvalidPolicy(String),
    #[error("significance level must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayStat {
    pub event_day: i32,
    pub aar: f64,
    /// Cross-sectional standard deviation; absent when fewer than 2 events.
    pub sigma: Option<f64>,
    pub n: usize,
    /// Absent when `n < 2` or when the dispersion is zero with non-zero AAR.
    pub t_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub significant: bool,
    pub caar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    #[serde(rename = "accept_H0")]
    AcceptH0,
    #[serde(rename = "reject_H0")]
    RejectH0,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::AcceptH0 => "accept_H0",
            Decision::RejectH0 => "reject_H0",
        }
    }
}

/// H0 is rejected only if at least `min_run` consecutive significant days
/// fall inside `[runup_start, runup_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionPolicy {
    pub min_run: usize,
    pub runup_start: i32,
    pub runup_end: i32,
}

impl Default for DecisionPolicy {
    fn default() -> Self {
        Self {
            min_run: 3,
            runup_start: -10,
            runup_end: -1,
        }
    }
}

impl DecisionPolicy {
    pub fn validate(&self) -> Result<(), StatsError> {
        if self.min_run == 0 {
            return Err(StatsError::InvalidPolicy("min_run must be at least 1".into()));
        }
        if self.runup_start > self.runup_end {
            return Err(StatsError::InvalidPolicy(format!(
                "run-up window [{}, {}] is empty",
                self.runup_start, self.runup_end
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStudyResult {
    pub stats: Vec<DayStat>,
    pub significant_days: Vec<i32>,
    /// CAAR(-1) / CAAR(0); absent when CAAR(0) is zero or the window lacks
    /// either day.
    pub reaction_fraction: Option<f64>,
    pub hypothesis_decision: Decision,
    pub alpha_level: f64,
    pub policy: DecisionPolicy,
}

/// Average abnormal return on `day` and the number of events behind it.
pub fn aar(panel: &AbnormalReturnPanel, day: i32) -> Result<(f64, usize), StatsError> {
    let n = panel.n_at(day);
    if n == 0 {
        return Err(StatsError::NoData { day });
    }
    Ok((panel.values_at(day).sum::<f64>() / n as f64, n))
}

/// Sample standard deviation (divisor `N - 1`) of the abnormal returns on `day`.
pub fn cross_sectional_sigma(panel: &AbnormalReturnPanel, day: i32) -> Result<f64, StatsError> {
    let n = panel.n_at(day);
    if n < 2 {
        return Err(StatsError::InsufficientCrossSection { day, n });
    }
    let (mean, _) = aar(panel, day)?;
    let ss: f64 = panel.values_at(day).map(|e| (e - mean) * (e - mean)).sum();
    Ok((ss / (n - 1) as f64).sqrt())
}

/// `sqrt(n) * aar / sigma`. Zero dispersion with zero mean gives `t = 0`.
pub fn t_stat(aar: f64, sigma: f64, n: usize) -> Result<f64, StatsError> {
    if n < 2 {
        return Err(StatsError::InsufficientCrossSection { day: 0, n });
    }
    if sigma == 0.0 {
        return if aar == 0.0 {
            Ok(0.0)
        } else {
            Err(StatsError::ZeroDispersion { aar })
        };
    }
    Ok((n as f64).sqrt() * aar / sigma)
}

/// Cumulative abnormal return of one event from the start of the event
/// window through `day`. Missing days contribute zero.
pub fn car(panel: &AbnormalReturnPanel, key: &str, day: i32) -> Result<f64, StatsError> {
    let row = panel
        .row(key)
        .ok_or_else(|| StatsError::UnknownEvent(key.to_string()))?;
    let start = panel.event_days().first().copied().unwrap_or(day);
    Ok(row.abnormal.range(start..=day).map(|(_, ar)| ar).sum())
}

/// Mean CAR through `day` over the events that have data on `day`.
///
/// On a panel without gaps this is the running sum of the daily AARs.
pub fn caar(panel: &AbnormalReturnPanel, day: i32) -> Result<f64, StatsError> {
    let n = panel.n_at(day);
    if n == 0 {
        return Err(StatsError::NoData { day });
    }
    let start = panel.event_days().first().copied().unwrap_or(day);
    let total: f64 = panel
        .rows()
        .iter()
        .filter(|r| r.abnormal.contains_key(&day))
        .map(|r| r.abnormal.range(start..=day).map(|(_, ar)| ar).sum::<f64>())
        .sum();
    Ok(total / n as f64)
}

/// Share of the day-0 cumulative reaction already present on day -1.
pub fn reaction_fraction_of(caar_prev: f64, caar_day0: f64) -> Result<f64, StatsError> {
    if caar_day0 == 0.0 {
        return Err(StatsError::UndefinedFraction);
    }
    Ok(caar_prev / caar_day0)
}

/// [`reaction_fraction_of`] taken from the day -1 and day 0 rows of `stats`.
pub fn reaction_fraction(stats: &[DayStat]) -> Result<f64, StatsError> {
    let find = |d: i32| {
        stats
            .iter()
            .find(|s| s.event_day == d)
            .map(|s| s.caar)
            .ok_or(StatsError::MissingDay(d))
    };
    reaction_fraction_of(find(-1)?, find(0)?)
}

/// Renders a fraction as a percentage with one decimal, e.g. `60.7%`.
pub fn format_percent(fraction: f64) -> String {
    format!("{:.1}%", fraction * 100.0)
}

/// Days whose two-sided p-value (Student t, `df` degrees of freedom) is at
/// most `alpha_level`, in ascending order. Days without a t statistic are
/// never significant.
pub fn significance_scan(stats: &[DayStat], alpha_level: f64, df: usize) -> Vec<i32> {
    if df == 0 {
        return Vec::new();
    }
    let mut days: Vec<i32> = stats
        .iter()
        .filter(|s| {
            s.t_stat
                .is_some_and(|t| student_t::two_sided_p(t, df as f64) <= alpha_level)
        })
        .map(|s| s.event_day)
        .collect();
    days.sort_unstable();
    days
}

/// Applies the consistency policy to the significant days.
pub fn decide_hypothesis(significant_days: &[i32], policy: &DecisionPolicy) -> Decision {
    let mut days: Vec<i32> = significant_days
        .iter()
        .copied()
        .filter(|d| (policy.runup_start..=policy.runup_end).contains(d))
        .collect();
    days.sort_unstable();
    days.dedup();

    let mut run = 0usize;
    let mut prev: Option<i32> = None;
    for d in days {
        run = match prev {
            Some(p) if d == p + 1 => run + 1,
            _ => 1,
        };
        if run >= policy.min_run {
            return Decision::RejectH0;
        }
        prev = Some(d);
    }
    Decision::AcceptH0
}

fn day_stat(panel: &AbnormalReturnPanel, day: i32, alpha_level: f64) -> Result<DayStat, StatsError> {
    let (mean, n) = aar(panel, day)?;
    let sigma = cross_sectional_sigma(panel, day).ok();
    let t = sigma.and_then(|s| t_stat(mean, s, n).ok());
    let p_value = t.map(|t| student_t::two_sided_p(t, (n - 1) as f64));
    Ok(DayStat {
        event_day: day,
        aar: mean,
        sigma,
        n,
        t_stat: t,
        p_value,
        significant: p_value.is_some_and(|p| p <= alpha_level),
        caar: caar(panel, day)?,
    })
}

/// Runs the per-day tests over the panel's event window and decides H0.
///
/// Each day is tested with `N_t - 1` degrees of freedom, which equals the
/// single `N - 1` of a panel without gaps.
pub fn analyze(
    panel: &AbnormalReturnPanel,
    alpha_level: f64,
    policy: &DecisionPolicy,
) -> Result<EventStudyResult, StatsError> {
    if !(0.0..=1.0).contains(&alpha_level) {
        return Err(StatsError::InvalidAlpha(alpha_level));
    }
    policy.validate()?;
    let stats = panel
        .event_days()
        .iter()
        .map(|&d| day_stat(panel, d, alpha_level))
        .collect::<Result<Vec<_>, _>>()?;
    let significant_days: Vec<i32> = stats
        .iter()
        .filter(|s| s.significant)
        .map(|s| s.event_day)
        .collect();
    let hypothesis_decision = decide_hypothesis(&significant_days, policy);
    Ok(EventStudyResult {
        reaction_fraction: reaction_fraction(&stats).ok(),
        stats,
        significant_days,
        hypothesis_decision,
        alpha_level,
        policy: *policy,
    })
}
