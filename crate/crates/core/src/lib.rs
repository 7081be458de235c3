//! Tail-exponent analysis of one-minute intraday stock returns.
//!
//! The crate turns raw trade ticks into standardized intraday returns and
//! per-stock trading attributes, groups stocks into equal-count cohorts,
//! estimates return-distribution exponents two ways (a Student-t /
//! q-Gaussian density fit and a maximum-likelihood power-law tail fit with
//! KS-minimizing cutoff) and regresses those exponents on the logarithms of
//! turnover rate, market capitalization and traded value.
//!
//! Everything can be driven end to end against a seeded synthetic market
//! whose per-stock exponents are planted, see [`synth`].

pub mod cohort;
pub mod empirical;
mod error;
pub mod ingest;
pub mod pipeline;
pub mod qgaussian;
pub mod regression;
pub mod simplex;
pub mod synth;
pub mod tail;

pub use error::{Error, Result};

pub use cohort::{partition_stocks, pool_returns, Attribute, CohortPartition, GroupStat};
pub use empirical::{ccdf, estimate_pdf, Binning, EmpiricalPdf};
pub use ingest::{
    build_minute_bars, compute_intraday_returns, compute_minute_traded_value, compute_profile,
    standardize, MinuteSeries, ReturnSeries, SessionCalendar, StockProfile, TradeTick,
};
pub use qgaussian::{fit_qgaussian, qgaussian_pdf, QGaussianFit};
pub use regression::{ols, RegressionFit};
pub use tail::{fit_tail, ks_statistic, mle_alpha, Sign, TailFit, TailOptions};
