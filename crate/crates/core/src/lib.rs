//! Market-model event study engine.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`data_ingest`] parses price and event CSV files and aligns each
//!    announcement onto integer trading-day event time.
//! 2. [`returns`] turns adjusted closes into simple one-day returns.
//! 3. [`market_model`] fits `R_stock = alpha + beta * R_market` over the
//!    estimation window of every event and computes abnormal returns over
//!    the event window.
//! 4. [`event_study`] aggregates abnormal returns into AAR/CAAR, runs the
//!    cross-sectional t-test per day and decides whether the run-up shows
//!    consistent abnormal performance.
//! 5. [`report`] wires the stages together and writes JSON/CSV output.
//!
//! [`synthetic`] generates markets with known parameters and injectable
//! pre-announcement leakage, used to validate the estimator end to end.

pub mod data_ingest;
pub mod event_study;
pub mod market_model;
pub mod report;
pub mod returns;
pub mod student_t;
pub mod synthetic;

mod numfmt;

pub use data_ingest::{
    align_event, parse_event_csv, parse_price_csv, AlignOptions, AlignedEvent, EventSpec,
    IngestError, PricePoint, PriceSeries, WindowConfig,
};
pub use event_study::{
    analyze, DayStat, Decision, DecisionPolicy, EventStudyResult, StatsError,
};
pub use market_model::{
    abnormal_return, build_panel, ols_fit, AbnormalReturnPanel, ExcludedEvent, FitError,
    MarketModelFit, PanelBuild,
};
pub use report::{emit_report, run_study, Report, StudyConfig, StudyError};
pub use returns::{simple_returns, ReturnSeries, ReturnsError};
pub use synthetic::{power_study, simulate_panel, LeakageProfile, SimConfig, SimError};
