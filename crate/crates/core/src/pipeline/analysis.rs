use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use crate::cohort::{partition_stocks, pool_returns, Attribute, CohortPartition};
use crate::empirical::{ccdf, estimate_pdf, thin_ccdf, Binning, EmpiricalPdf};
use crate::ingest::{
    build_minute_bars, compute_intraday_returns, compute_profile, read_ticks_file, standardize,
    ReturnSeries, SessionCalendar, StockProfile, TradeTick,
};
use crate::qgaussian::{fit_qgaussian, QGaussianFit, QGaussianOptions};
use crate::regression::{
    model_comparison, regress_alpha_bivariate, regress_alpha_cap, regress_alpha_traded_value,
    regress_alpha_turnover, reparametrize_check, ComparisonTable, RegressionFit, Reparametrization,
};
use crate::synth::{derive_seed, SyntheticMarket};
use crate::tail::{fit_tail, Sign, TailFit, TailOptions};
use crate::{Error, Result};

/// Points kept per thinned group CCDF.
pub const CCDF_POINTS: usize = 400;

/// A source of trade ticks split into independently loadable batches.
pub trait TickSource: Sync {
    fn batch_count(&self) -> usize;
    fn load(&self, batch: usize) -> Result<BTreeMap<String, Vec<TradeTick>>>;
}

/// Tick CSV files; directories contribute their `*.csv` entries in name order.
#[derive(Debug, Clone)]
pub struct FileSource {
    pub files: Vec<PathBuf>,
}

impl FileSource {
    pub fn new(paths: &[PathBuf]) -> Result<Self> {
        let mut files = Vec::new();
        for p in paths {
            if p.is_dir() {
                let mut entries: Vec<PathBuf> = std::fs::read_dir(p)
                    .map_err(|e| Error::file(p, e))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                    .collect();
                entries.sort();
                files.extend(entries);
            } else {
                files.push(p.clone());
            }
        }
        if files.is_empty() {
            return Err(Error::Config("no tick files found".into()));
        }
        Ok(Self { files })
    }
}

impl TickSource for FileSource {
    fn batch_count(&self) -> usize {
        self.files.len()
    }

    fn load(&self, batch: usize) -> Result<BTreeMap<String, Vec<TradeTick>>> {
        read_ticks_file(&self.files[batch])
    }
}

impl TickSource for SyntheticMarket {
    fn batch_count(&self) -> usize {
        self.stocks.len()
    }

    fn load(&self, batch: usize) -> Result<BTreeMap<String, Vec<TradeTick>>> {
        let ticks = self.ticks(batch)?;
        Ok(BTreeMap::from([(
            self.stocks[batch].stock_id.clone(),
            ticks,
        )]))
    }
}

/// An entity left out of later stages, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Exclusion {
    pub entity: String,
    pub stage: String,
    pub reason: String,
}

impl Exclusion {
    fn new(entity: impl Into<String>, stage: impl Into<String>, err: &Error) -> Self {
        Self {
            entity: entity.into(),
            stage: stage.into(),
            reason: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockTail {
    pub stock_id: String,
    #[serde(flatten)]
    pub fit: TailFit,
}

/// Per-stock results: profiles, standardized returns, tail fits.
#[derive(Debug, Default)]
pub struct StockStage {
    pub profiles: Vec<StockProfile>,
    pub returns: BTreeMap<String, ReturnSeries>,
    pub tails: Vec<StockTail>,
    pub exclusions: Vec<Exclusion>,
}

/// Errors that mean the input itself is malformed and must stop the run,
/// as opposed to a stock that simply cannot be analyzed.
fn is_fatal(err: &Error) -> bool {
    matches!(
        err,
        Error::UnsortedTicks { .. }
            | Error::InvalidTick { .. }
            | Error::File { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Consistency(_)
    )
}

fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Tail options for one entity, with a bootstrap seed tied to its name.
pub fn entity_tail_options(base: &TailOptions, seed: u64, entity: &str) -> TailOptions {
    TailOptions {
        seed: derive_seed(seed, fnv1a(entity)),
        ..base.clone()
    }
}

enum StockOutcome {
    Done {
        profile: StockProfile,
        returns: ReturnSeries,
        tails: Vec<StockTail>,
        exclusions: Vec<Exclusion>,
    },
    Excluded(Exclusion),
}

/// Bars, returns, standardization, profile and (optionally) both tail fits
/// for one stock.
fn process_stock(
    stock_id: &str,
    ticks: &[TradeTick],
    shares: Option<f64>,
    calendar: &SessionCalendar,
    cfg: &PipelineConfig,
) -> Result<StockOutcome> {
    macro_rules! stage {
        ($name:literal, $e:expr) => {
            match $e {
                Ok(v) => v,
                Err(e) if is_fatal(&e) => return Err(e.at_stage($name, stock_id)),
                Err(e) => return Ok(StockOutcome::Excluded(Exclusion::new(stock_id, $name, &e))),
            }
        };
    }
    let bars = stage!("bars", build_minute_bars(ticks, calendar));
    let raw = stage!(
        "returns",
        compute_intraday_returns(&bars, cfg.drop_session_gap)
    );
    let returns = stage!("standardize", standardize(stock_id, &raw));
    let profile = stage!("profile", compute_profile(&bars, shares));

    let mut tails = Vec::new();
    let mut exclusions = Vec::new();
    if cfg.fit_mode.tail() {
        let opts = entity_tail_options(&cfg.tail, cfg.seed, stock_id);
        for sign in Sign::BOTH {
            match fit_tail(&returns.values, sign, &opts) {
                Ok(fit) => tails.push(StockTail {
                    stock_id: stock_id.to_string(),
                    fit,
                }),
                Err(e) if is_fatal(&e) => return Err(e.at_stage("tail", stock_id)),
                Err(e) => exclusions.push(Exclusion::new(stock_id, format!("tail-{sign}"), &e)),
            }
        }
    }
    Ok(StockOutcome::Done {
        profile,
        returns,
        tails,
        exclusions,
    })
}

/// Runs the per-stock stages over every batch of `source`. Batches are
/// processed in parallel and merged in stock-id order.
pub fn analyze_stocks(
    source: &dyn TickSource,
    shares: &BTreeMap<String, f64>,
    calendar: &SessionCalendar,
    cfg: &PipelineConfig,
) -> Result<StockStage> {
    let batches: Vec<Vec<(String, StockOutcome)>> = (0..source.batch_count())
        .into_par_iter()
        .map(|b| {
            let batch = source.load(b)?;
            batch
                .into_iter()
                .map(|(id, ticks)| {
                    let outcome =
                        process_stock(&id, &ticks, shares.get(&id).copied(), calendar, cfg)?;
                    Ok((id, outcome))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut outcomes = BTreeMap::new();
    for (id, outcome) in batches.into_iter().flatten() {
        if outcomes.insert(id.clone(), outcome).is_some() {
            return Err(Error::MismatchedData(format!(
                "stock {id} appears in more than one tick batch"
            )));
        }
    }
    let mut stage = StockStage::default();
    for (id, outcome) in outcomes {
        match outcome {
            StockOutcome::Done {
                profile,
                returns,
                tails,
                exclusions,
            } => {
                stage.profiles.push(profile);
                stage.returns.insert(id, returns);
                stage.tails.extend(tails);
                stage.exclusions.extend(exclusions);
            }
            StockOutcome::Excluded(ex) => {
                warn!(
                    "excluding {}: {} failed: {}",
                    ex.entity, ex.stage, ex.reason
                );
                stage.exclusions.push(ex);
            }
        }
    }
    info!(
        "{} stocks analyzed, {} exclusions",
        stage.profiles.len(),
        stage.exclusions.len()
    );
    if stage.profiles.is_empty() {
        return Err(Error::EmptySeries(
            "no stock survived the per-stock stages".into(),
        ));
    }
    Ok(stage)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfCurve {
    pub sign: Sign,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFit {
    pub index: usize,
    pub size: usize,
    pub group_attribute: f64,
    pub n_returns: usize,
    pub qgaussian: Option<QGaussianFit>,
    pub tails: Vec<TailFit>,
    pub pdf: Option<EmpiricalPdf>,
    pub ccdf: Vec<CcdfCurve>,
}

impl GroupFit {
    pub fn tail(&self, sign: Sign) -> Option<&TailFit> {
        self.tails.iter().find(|t| t.sign == sign)
    }

    /// Exponent reported by `estimator` (`qgaussian`, `positive`, `negative`).
    pub fn alpha(&self, estimator: Estimator) -> Option<f64> {
        match estimator {
            Estimator::Qgaussian => self.qgaussian.as_ref().map(|q| q.alpha),
            Estimator::Tail(sign) => self.tail(sign).map(|t| t.alpha),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Estimator {
    Qgaussian,
    Tail(Sign),
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [
        Estimator::Qgaussian,
        Estimator::Tail(Sign::Positive),
        Estimator::Tail(Sign::Negative),
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Qgaussian => "qgaussian",
            Estimator::Tail(s) => s.as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortResult {
    pub partition: CohortPartition,
    pub fits: Vec<GroupFit>,
}

fn group_entity(attribute: Attribute, index: usize) -> String {
    format!("{attribute}/g{index:02}")
}

fn fit_group(
    attribute: Attribute,
    index: usize,
    pooled: &[f64],
    cfg: &PipelineConfig,
) -> Result<(GroupFit, Vec<Exclusion>)> {
    let entity = group_entity(attribute, index);
    let mut exclusions = Vec::new();
    let mut note = |stage: &str, e: Error| -> Result<()> {
        if is_fatal(&e) {
            return Err(e.at_stage("group-fit", entity.clone()));
        }
        exclusions.push(Exclusion::new(entity.clone(), stage, &e));
        Ok(())
    };

    let mut fit = GroupFit {
        index,
        size: 0,
        group_attribute: 0.0,
        n_returns: pooled.len(),
        qgaussian: None,
        tails: Vec::new(),
        pdf: None,
        ccdf: Vec::new(),
    };
    if cfg.fit_mode.qgaussian() {
        match estimate_pdf(pooled, &Binning::default()) {
            Ok(pdf) => {
                let opts = QGaussianOptions {
                    unit_variance: cfg.unit_variance,
                };
                match fit_qgaussian(&pdf, &opts) {
                    Ok(q) => fit.qgaussian = Some(q),
                    Err(e) => note("qgaussian", e)?,
                }
                fit.pdf = Some(pdf);
            }
            Err(e) => note("pdf", e)?,
        }
    }
    if cfg.fit_mode.tail() {
        let opts = entity_tail_options(&cfg.tail, cfg.seed, &entity);
        for sign in Sign::BOTH {
            match fit_tail(pooled, sign, &opts) {
                Ok(t) => fit.tails.push(t),
                Err(e) => note(&format!("tail-{sign}"), e)?,
            }
            match ccdf(pooled, sign) {
                Ok(points) => fit.ccdf.push(CcdfCurve {
                    sign,
                    points: thin_ccdf(&points, CCDF_POINTS),
                }),
                Err(e) => note(&format!("ccdf-{sign}"), e)?,
            }
        }
    }
    Ok((fit, exclusions))
}

/// Partitions stocks by `attribute`, pools each group's returns and fits
/// the pooled samples.
pub fn analyze_cohort(
    attribute: Attribute,
    profiles: &[StockProfile],
    returns: &BTreeMap<String, ReturnSeries>,
    cfg: &PipelineConfig,
) -> Result<(CohortResult, Vec<Exclusion>)> {
    let partition = partition_stocks(profiles, attribute, cfg.groups, cfg.group_stat)
        .map_err(|e| e.at_stage("group", attribute.to_string()))?;
    fit_partition(partition, returns, cfg)
}

/// Pools and fits the groups of an existing partition.
pub fn fit_partition(
    partition: CohortPartition,
    returns: &BTreeMap<String, ReturnSeries>,
    cfg: &PipelineConfig,
) -> Result<(CohortResult, Vec<Exclusion>)> {
    let attribute = partition.attribute;
    let pooled =
        pool_returns(&partition, returns).map_err(|e| e.at_stage("pool", attribute.to_string()))?;
    let results: Vec<(GroupFit, Vec<Exclusion>)> = pooled
        .par_iter()
        .enumerate()
        .map(|(k, sample)| fit_group(attribute, k, sample, cfg))
        .collect::<Result<_>>()?;
    let mut fits = Vec::with_capacity(results.len());
    let mut exclusions = Vec::new();
    for ((mut fit, ex), group) in results.into_iter().zip(&partition.groups) {
        fit.size = group.size;
        fit.group_attribute = group.group_attribute;
        fits.push(fit);
        exclusions.extend(ex);
    }
    Ok((CohortResult { partition, fits }, exclusions))
}

/// A fit plus the observation labels behind it, so every point can be
/// traced to a stock or group record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRecord {
    pub fit: RegressionFit,
    pub labels: Vec<String>,
    pub outlier_labels: Vec<String>,
}

#[derive(Debug, Default)]
pub struct RegressionStage {
    pub regressions: BTreeMap<String, RegressionRecord>,
    pub reparametrizations: BTreeMap<String, Reparametrization>,
    pub comparisons: BTreeMap<String, ComparisonTable>,
    pub exclusions: Vec<Exclusion>,
}

impl RegressionStage {
    /// Records `fit` under `tag`, plus a refit without flagged outliers
    /// when there are any. Non-fatal failures become exclusions.
    fn record<P: Clone>(
        &mut self,
        tag: String,
        labels: Vec<String>,
        points: &[P],
        model: impl Fn(&[P]) -> Result<RegressionFit>,
    ) -> Result<Option<RegressionFit>> {
        let fit = match model(points) {
            Ok(f) => f.with_model(tag.clone()),
            Err(e) if is_fatal(&e) => return Err(e.at_stage("regress", tag)),
            Err(e) => {
                self.exclusions.push(Exclusion::new(tag, "regress", &e));
                return Ok(None);
            }
        };
        let outlier_labels: Vec<String> = fit.outliers.iter().map(|&i| labels[i].clone()).collect();
        if !fit.outliers.is_empty() {
            let keep: Vec<usize> = (0..points.len())
                .filter(|i| !fit.outliers.contains(i))
                .collect();
            let kept: Vec<P> = keep.iter().map(|&i| points[i].clone()).collect();
            let kept_labels = keep.iter().map(|&i| labels[i].clone()).collect();
            self.record_plain(format!("{tag}-no-outliers"), kept_labels, &kept, &model)?;
        }
        self.regressions.insert(
            tag,
            RegressionRecord {
                fit: fit.clone(),
                labels,
                outlier_labels,
            },
        );
        Ok(Some(fit))
    }

    fn record_plain<P>(
        &mut self,
        tag: String,
        labels: Vec<String>,
        points: &[P],
        model: &impl Fn(&[P]) -> Result<RegressionFit>,
    ) -> Result<()> {
        match model(points) {
            Ok(f) => {
                let fit = f.with_model(tag.clone());
                let outlier_labels = fit.outliers.iter().map(|&i| labels[i].clone()).collect();
                self.regressions.insert(
                    tag,
                    RegressionRecord {
                        fit,
                        labels,
                        outlier_labels,
                    },
                );
            }
            Err(e) if is_fatal(&e) => return Err(e.at_stage("regress", tag)),
            Err(e) => self.exclusions.push(Exclusion::new(tag, "regress", &e)),
        }
        Ok(())
    }
}

fn univariate_model(attribute: Attribute) -> fn(&[(f64, f64)]) -> Result<RegressionFit> {
    match attribute {
        Attribute::Turnover => regress_alpha_turnover,
        Attribute::Cap => regress_alpha_cap,
        Attribute::TradedValue => regress_alpha_traded_value,
    }
}

/// Group exponents against group attributes, one fit per attribute and
/// estimator.
pub fn regress_cohorts(cohorts: &[CohortResult], stage: &mut RegressionStage) -> Result<()> {
    for cohort in cohorts {
        let attribute = cohort.partition.attribute;
        for est in Estimator::ALL {
            let (labels, points): (Vec<String>, Vec<(f64, f64)>) = cohort
                .fits
                .iter()
                .filter_map(|g| {
                    g.alpha(est)
                        .map(|a| (group_entity(attribute, g.index), (g.group_attribute, a)))
                })
                .unzip();
            if points.is_empty() {
                continue;
            }
            let tag = format!("{attribute}-grouped-{}", est.as_str());
            stage.record(tag, labels, &points, univariate_model(attribute))?;
        }
    }
    Ok(())
}

/// Per-stock tail exponents against the stock attributes: the three
/// univariate models, the bivariate model and its traded-value
/// reparametrization, plus a comparison table per sign.
pub fn regress_stocks(
    profiles: &[StockProfile],
    tails: &[StockTail],
    stage: &mut RegressionStage,
) -> Result<()> {
    let by_id: BTreeMap<&str, &StockProfile> =
        profiles.iter().map(|p| (p.stock_id.as_str(), p)).collect();
    for sign in Sign::BOTH {
        let mut labels = Vec::new();
        let mut points = Vec::new();
        for t in tails.iter().filter(|t| t.fit.sign == sign) {
            let p = by_id.get(t.stock_id.as_str()).ok_or_else(|| {
                Error::MismatchedData(format!("tail fit for {} has no profile", t.stock_id))
            })?;
            labels.push(t.stock_id.clone());
            points.push((*p, t.fit.alpha));
        }
        if points.is_empty() {
            continue;
        }
        let mut fits = Vec::new();
        for attribute in Attribute::ALL {
            let pairs: Vec<(f64, f64)> =
                points.iter().map(|&(p, a)| (attribute.of(p), a)).collect();
            let tag = format!("{attribute}-stock-{sign}");
            let fit = stage.record(tag, labels.clone(), &pairs, univariate_model(attribute))?;
            if attribute != Attribute::TradedValue {
                fits.push(fit);
            }
        }
        let triples: Vec<(f64, f64, f64)> = points
            .iter()
            .map(|&(p, a)| (p.turnover, p.cap, a))
            .collect();
        let bivariate = stage.record(
            format!("bivariate-stock-{sign}"),
            labels.clone(),
            &triples,
            regress_alpha_bivariate,
        )?;
        if let Some(fit) = &bivariate {
            let rep = reparametrize_check(fit, &triples)
                .map_err(|e| e.at_stage("reparametrize", sign.to_string()))?;
            let tag = format!("reparametrized-stock-{sign}");
            stage.regressions.insert(
                tag.clone(),
                RegressionRecord {
                    fit: rep.direct.clone().with_model(tag),
                    labels: labels.clone(),
                    outlier_labels: rep
                        .direct
                        .outliers
                        .iter()
                        .map(|&i| labels[i].clone())
                        .collect(),
                },
            );
            stage.reparametrizations.insert(sign.to_string(), rep);
        }
        fits.push(bivariate);
        let fits: Vec<&RegressionFit> = fits.iter().flatten().collect();
        if fits.len() == 3 {
            let table =
                model_comparison(&fits).map_err(|e| e.at_stage("compare", sign.to_string()))?;
            stage.comparisons.insert(sign.to_string(), table);
        }
    }
    Ok(())
}

/// Everything a pipeline run produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub config: PipelineConfig,
    pub profiles: Vec<StockProfile>,
    pub stock_tails: Vec<StockTail>,
    pub exclusions: Vec<Exclusion>,
    pub cohorts: Vec<CohortResult>,
    pub regressions: BTreeMap<String, RegressionRecord>,
    pub reparametrizations: BTreeMap<String, Reparametrization>,
    pub comparisons: BTreeMap<String, ComparisonTable>,
}

impl Report {
    pub fn regression(&self, tag: &str) -> Option<&RegressionFit> {
        self.regressions.get(tag).map(|r| &r.fit)
    }

    pub fn cohort(&self, attribute: Attribute) -> Option<&CohortResult> {
        self.cohorts
            .iter()
            .find(|c| c.partition.attribute == attribute)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        serde_json::from_slice(&text)
            .map_err(|e| Error::from(e).at_stage("read-report", path.display().to_string()))
    }
}

/// In-memory pipeline from a tick source to the full report.
pub fn analyze(
    source: &dyn TickSource,
    shares: &BTreeMap<String, f64>,
    calendar: &SessionCalendar,
    cfg: &PipelineConfig,
) -> Result<Report> {
    cfg.validate()?;
    let stocks = analyze_stocks(source, shares, calendar, cfg)?;
    let mut exclusions = stocks.exclusions;

    let mut cohorts = Vec::new();
    for &attribute in &cfg.attributes {
        let (cohort, ex) = analyze_cohort(attribute, &stocks.profiles, &stocks.returns, cfg)?;
        info!("fitted {} {attribute} groups", cohort.fits.len());
        cohorts.push(cohort);
        exclusions.extend(ex);
    }
    drop(stocks.returns);

    let mut reg = RegressionStage::default();
    regress_cohorts(&cohorts, &mut reg)?;
    regress_stocks(&stocks.profiles, &stocks.tails, &mut reg)?;
    exclusions.extend(reg.exclusions);

    Ok(Report {
        config: cfg.clone(),
        profiles: stocks.profiles,
        stock_tails: stocks.tails,
        exclusions,
        cohorts,
        regressions: reg.regressions,
        reparametrizations: reg.reparametrizations,
        comparisons: reg.comparisons,
    })
}
