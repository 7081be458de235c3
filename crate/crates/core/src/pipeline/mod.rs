//! End-to-end orchestration: ticks to per-stock and per-group exponents,
//! regressions, a comparison table and plot-ready data.

mod analysis;
mod config;
pub mod io;
mod output;
mod plot;

use std::collections::BTreeMap;
use std::fs::File;

use log::info;

pub use analysis::{
    analyze, analyze_cohort, analyze_stocks, entity_tail_options, fit_partition, regress_cohorts,
    regress_stocks, CcdfCurve, CohortResult, Estimator, Exclusion, FileSource, GroupFit,
    RegressionRecord, RegressionStage, Report, StockStage, StockTail, TickSource, CCDF_POINTS,
};
pub use config::{overlay_toml, FitMode, PipelineConfig, OUT_DIR_ENV};
pub use output::{read_stock_tails, write_exclusions, write_report, write_stock_tails};
pub use plot::{emit_plot_data, REFERENCE_ALPHA};

use crate::ingest::{read_shares, SessionCalendar};
use crate::{Error, Result};

/// Calendar named by the config, or the default session.
pub fn load_calendar(cfg: &PipelineConfig) -> Result<SessionCalendar> {
    match &cfg.calendar {
        Some(path) => SessionCalendar::load(path),
        None => Ok(SessionCalendar::default()),
    }
}

pub fn load_shares(cfg: &PipelineConfig) -> Result<BTreeMap<String, f64>> {
    let path = cfg
        .shares
        .as_ref()
        .ok_or_else(|| Error::Config("no shares file given".into()))?;
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_shares(file).map_err(|e| e.at_stage("read-shares", path.display().to_string()))
}

/// Validates `cfg`, reads its inputs, analyzes them and writes the report
/// bundle to `cfg.out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Report> {
    cfg.validate()?;
    cfg.validate_paths()?;
    let calendar = load_calendar(cfg)?;
    let shares = load_shares(cfg)?;
    let source = FileSource::new(&cfg.ticks)?;
    info!("reading {} tick files", source.files.len());
    let report = analyze(&source, &shares, &calendar, cfg)?;
    write_report(&report, &cfg.out_dir)?;
    info!("report written to {}", cfg.out_dir.display());
    Ok(report)
}
