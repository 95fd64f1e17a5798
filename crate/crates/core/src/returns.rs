//! Simple one-day returns.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_ingest::PriceSeries;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReturnsError {
    #[error("`{security_id}` has {n} prices; at least 2 are needed for a return")]
    TooShort { security_id: String, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnPoint {
    pub date: NaiveDate,
    pub ret: f64,
}

/// Returns of one security, each dated at the later of its two prices.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub security_id: String,
    pub observations: Vec<ReturnPoint>,
}

/// `(current - previous) / previous`.
#[inline]
pub fn simple_return(previous: f64, current: f64) -> f64 {
    (current - previous) / previous
}

/// Arithmetic returns between consecutive rows of `prices`. Inputs are
/// adjusted closes, so no dividend term is added.
pub fn simple_returns(prices: &PriceSeries) -> Result<ReturnSeries, ReturnsError> {
    let obs = prices.observations();
    if obs.len() < 2 {
        return Err(ReturnsError::TooShort {
            security_id: prices.security_id().to_string(),
            n: obs.len(),
        });
    }
    Ok(ReturnSeries {
        security_id: prices.security_id().to_string(),
        observations: obs
            .windows(2)
            .map(|w| ReturnPoint {
                date: w[1].date,
                ret: simple_return(w[0].adj_close, w[1].adj_close),
            })
            .collect(),
    })
}
