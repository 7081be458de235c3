use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{ArgAction, Args, Parser, Subcommand};
use log::{info, warn};

use tailex::cohort::{partition_stocks, Attribute, CohortPartition, GroupStat};
use tailex::ingest::{
    build_minute_bars, compute_intraday_returns, compute_profile, read_profiles, read_returns_dir,
    standardize, write_profiles, write_returns_dir, ReturnSeries, SessionCalendar, StockProfile,
};
use tailex::pipeline::io::{write_atomic, write_json};
use tailex::pipeline::{
    emit_plot_data, entity_tail_options, fit_partition, overlay_toml, read_stock_tails,
    regress_cohorts, regress_stocks, run_pipeline, write_exclusions, write_stock_tails,
    CohortResult, Exclusion, FileSource, FitMode, GroupFit, PipelineConfig, RegressionStage,
    Report, StockTail, TickSource, OUT_DIR_ENV,
};
use tailex::synth::{gen_synthetic_market, write_synthetic_market, SyntheticMarketConfig};
use tailex::tail::{fit_tail, Sign};

#[derive(Parser)]
#[command(
    name = "tailex",
    version,
    about = "Tail exponents of one-minute intraday stock returns"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Standardized intraday returns per stock.
    Ingest(IngestArgs),
    /// Capitalization, mean traded value and turnover per stock.
    Profile(ProfileArgs),
    /// Equal-count partition of stocks by one attribute.
    Group(GroupArgs),
    /// Tail fits per stock, or density and tail fits per group.
    Fit(FitArgs),
    /// Regressions of exponents on log attributes.
    Regress(RegressArgs),
    /// Synthetic market with planted exponents.
    Synth(SynthArgs),
    /// Everything from ticks to the report bundle.
    Pipeline(PipelineArgs),
    /// Plot-ready CSVs from a report bundle.
    Plotdata(PlotArgs),
}

#[derive(Args)]
struct Inputs {
    /// Tick CSV files or directories of them.
    #[arg(long, num_args = 1.., required = true)]
    ticks: Vec<PathBuf>,
    /// Session calendar TOML.
    #[arg(long)]
    calendar: Option<PathBuf>,
    /// Drop the return spanning the midday break.
    #[arg(long)]
    drop_session_gap: bool,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Output directory for the return store.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProfileArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    shares: PathBuf,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GroupArgs {
    #[arg(long)]
    profiles: PathBuf,
    #[arg(long, default_value = "turnover")]
    attribute: Attribute,
    #[arg(long, default_value_t = 20)]
    groups: usize,
    #[arg(long, default_value = "mean")]
    group_stat: GroupStat,
    /// Output JSON manifest.
    #[arg(long)]
    out: PathBuf,
}

/// Fit settings shared by `fit` and `pipeline`; unset flags keep defaults.
#[derive(Args)]
struct FitSettings {
    #[arg(long)]
    fit_mode: Option<FitMode>,
    #[arg(long)]
    min_tail: Option<usize>,
    #[arg(long)]
    max_candidates: Option<usize>,
    /// Reference point r_min - 0.5 in the tail likelihood.
    #[arg(long)]
    discrete_shift: bool,
    /// Bootstrap draws for a tail goodness-of-fit p-value.
    #[arg(long)]
    gof_bootstrap: Option<usize>,
    /// Tie the density scale to unit variance.
    #[arg(long)]
    unit_variance: bool,
    #[arg(long)]
    seed: Option<u64>,
}

impl FitSettings {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(m) = self.fit_mode {
            cfg.fit_mode = m;
        }
        if let Some(v) = self.min_tail {
            cfg.tail.min_tail = v;
        }
        if let Some(v) = self.max_candidates {
            cfg.tail.max_candidates = v;
        }
        cfg.tail.discrete_shift |= self.discrete_shift;
        if self.gof_bootstrap.is_some() {
            cfg.tail.gof_bootstrap = self.gof_bootstrap;
        }
        cfg.unit_variance |= self.unit_variance;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Return store written by `ingest`.
    #[arg(long)]
    returns: PathBuf,
    /// Partition manifest; fits pooled groups instead of single stocks.
    #[arg(long)]
    partition: Option<PathBuf>,
    #[command(flatten)]
    settings: FitSettings,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RegressArgs {
    #[arg(long)]
    profiles: PathBuf,
    /// Per-stock tail CSV written by `fit`.
    #[arg(long)]
    tails: Option<PathBuf>,
    /// Directory holding `partitions/` and `group_fits/` from `fit`.
    #[arg(long)]
    cohorts: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Market TOML; its keys override the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    stocks: Option<usize>,
    #[arg(long)]
    returns_per_stock: Option<usize>,
    #[arg(long)]
    intercept: Option<f64>,
    #[arg(long)]
    b_turnover: Option<f64>,
    #[arg(long)]
    b_cap: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline TOML; its keys override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, num_args = 1..)]
    ticks: Vec<PathBuf>,
    #[arg(long)]
    shares: Option<PathBuf>,
    #[arg(long)]
    calendar: Option<PathBuf>,
    #[arg(long)]
    groups: Option<usize>,
    /// Attributes to group by, comma separated.
    #[arg(long, value_delimiter = ',')]
    attributes: Vec<Attribute>,
    #[arg(long)]
    group_stat: Option<GroupStat>,
    #[arg(long)]
    drop_session_gap: bool,
    #[command(flatten)]
    settings: FitSettings,
    #[arg(long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// `report.json` from `pipeline`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn calendar_of(path: &Option<PathBuf>) -> anyhow::Result<SessionCalendar> {
    Ok(match path {
        Some(p) => SessionCalendar::load(p)?,
        None => SessionCalendar::default(),
    })
}

fn write_exclusion_file(dir: &Path, exclusions: &[Exclusion]) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    write_exclusions(&mut buf, exclusions)?;
    write_atomic(&dir.join("exclusions.csv"), &buf)?;
    Ok(())
}

/// Visits every stock of the tick inputs in batch order.
fn for_each_stock(
    inputs: &Inputs,
    mut visit: impl FnMut(&str, &[tailex::TradeTick]) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let source = FileSource::new(&inputs.ticks)?;
    for b in 0..source.batch_count() {
        for (id, ticks) in source.load(b)? {
            visit(&id, &ticks)?;
        }
    }
    Ok(())
}

fn note(exclusions: &mut Vec<Exclusion>, entity: &str, stage: &str, err: tailex::Error) {
    warn!("excluding {entity}: {stage} failed: {err}");
    exclusions.push(Exclusion {
        entity: entity.to_string(),
        stage: stage.to_string(),
        reason: err.to_string(),
    });
}

fn cmd_ingest(a: IngestArgs) -> anyhow::Result<()> {
    let calendar = calendar_of(&a.inputs.calendar)?;
    let mut series = Vec::new();
    let mut exclusions = Vec::new();
    for_each_stock(&a.inputs, |id, ticks| {
        let bars =
            build_minute_bars(ticks, &calendar).with_context(|| format!("minute bars of {id}"))?;
        match compute_intraday_returns(&bars, a.inputs.drop_session_gap)
            .and_then(|raw| standardize(id, &raw))
        {
            Ok(s) => series.push(s),
            Err(e) => note(&mut exclusions, id, "returns", e),
        }
        Ok(())
    })?;
    write_returns_dir(&a.out, &series)?;
    write_exclusion_file(&a.out, &exclusions)?;
    info!(
        "{} return series written to {}",
        series.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_profile(a: ProfileArgs) -> anyhow::Result<()> {
    let calendar = calendar_of(&a.inputs.calendar)?;
    let shares = tailex::ingest::read_shares(
        File::open(&a.shares).with_context(|| a.shares.display().to_string())?,
    )?;
    let mut profiles = Vec::new();
    let mut exclusions = Vec::new();
    for_each_stock(&a.inputs, |id, ticks| {
        let bars =
            build_minute_bars(ticks, &calendar).with_context(|| format!("minute bars of {id}"))?;
        match compute_profile(&bars, shares.get(id).copied()) {
            Ok(p) => profiles.push(p),
            Err(e) => note(&mut exclusions, id, "profile", e),
        }
        Ok(())
    })?;
    let mut buf = Vec::new();
    write_profiles(&mut buf, &profiles)?;
    write_atomic(&a.out, &buf)?;
    if !exclusions.is_empty() {
        let dir = a.out.parent().unwrap_or(Path::new("."));
        write_exclusion_file(dir, &exclusions)?;
    }
    Ok(())
}

fn load_profiles(path: &Path) -> anyhow::Result<Vec<StockProfile>> {
    let file = File::open(path).with_context(|| path.display().to_string())?;
    Ok(read_profiles(file)?)
}

fn cmd_group(a: GroupArgs) -> anyhow::Result<()> {
    let profiles = load_profiles(&a.profiles)?;
    let partition = partition_stocks(&profiles, a.attribute, a.groups, a.group_stat)?;
    write_json(&a.out, &partition)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let bytes = std::fs::read(path).with_context(|| path.display().to_string())?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_fit(a: FitArgs) -> anyhow::Result<()> {
    let mut cfg = PipelineConfig::default();
    a.settings.apply(&mut cfg);
    cfg.validate()?;
    let store: BTreeMap<String, ReturnSeries> = read_returns_dir(&a.returns)?
        .into_iter()
        .map(|s| (s.stock_id.clone(), s))
        .collect();

    if let Some(path) = &a.partition {
        let partition: CohortPartition = read_json(path)?;
        let attr = partition.attribute;
        let (cohort, exclusions) = fit_partition(partition, &store, &cfg)?;
        write_json(
            &a.out.join("partitions").join(format!("{attr}.json")),
            &cohort.partition,
        )?;
        write_json(
            &a.out.join("group_fits").join(format!("{attr}.json")),
            &cohort.fits,
        )?;
        write_exclusion_file(&a.out, &exclusions)?;
        return Ok(());
    }

    if !cfg.fit_mode.tail() {
        bail!("per-stock fits are tail fits; use --partition for density fits");
    }
    let mut tails = Vec::new();
    let mut exclusions = Vec::new();
    for (id, series) in &store {
        let opts = entity_tail_options(&cfg.tail, cfg.seed, id);
        for sign in Sign::BOTH {
            match fit_tail(&series.values, sign, &opts) {
                Ok(fit) => tails.push(StockTail {
                    stock_id: id.clone(),
                    fit,
                }),
                Err(e) => note(&mut exclusions, id, &format!("tail-{sign}"), e),
            }
        }
    }
    let mut buf = Vec::new();
    write_stock_tails(&mut buf, &tails)?;
    write_atomic(&a.out.join("stock_tails.csv"), &buf)?;
    write_exclusion_file(&a.out, &exclusions)?;
    Ok(())
}

fn load_cohorts(dir: &Path) -> anyhow::Result<Vec<CohortResult>> {
    let mut cohorts = Vec::new();
    for attr in Attribute::ALL {
        let part = dir.join("partitions").join(format!("{attr}.json"));
        let fits = dir.join("group_fits").join(format!("{attr}.json"));
        if !fits.exists() {
            continue;
        }
        let partition: CohortPartition = read_json(&part)?;
        let fits: Vec<GroupFit> = read_json(&fits)?;
        cohorts.push(CohortResult { partition, fits });
    }
    if cohorts.is_empty() {
        bail!("no group fits under {}", dir.display());
    }
    Ok(cohorts)
}

fn cmd_regress(a: RegressArgs) -> anyhow::Result<()> {
    if a.tails.is_none() && a.cohorts.is_none() {
        bail!("nothing to regress: give --tails and/or --cohorts");
    }
    let profiles = load_profiles(&a.profiles)?;
    let mut stage = RegressionStage::default();
    if let Some(dir) = &a.cohorts {
        regress_cohorts(&load_cohorts(dir)?, &mut stage)?;
    }
    if let Some(path) = &a.tails {
        let tails =
            read_stock_tails(File::open(path).with_context(|| path.display().to_string())?)?;
        regress_stocks(&profiles, &tails, &mut stage)?;
    }
    for (tag, record) in &stage.regressions {
        write_json(
            &a.out.join("regressions").join(format!("{tag}.json")),
            record,
        )?;
    }
    for (sign, rep) in &stage.reparametrizations {
        write_json(&a.out.join(format!("reparametrization_{sign}.json")), rep)?;
    }
    for (sign, table) in &stage.comparisons {
        write_atomic(
            &a.out.join(format!("comparison_{sign}.csv")),
            &table.to_csv()?,
        )?;
        write_atomic(
            &a.out.join(format!("comparison_{sign}.txt")),
            table.to_text().as_bytes(),
        )?;
        print!("{sign} tails\n{}", table.to_text());
    }
    write_exclusion_file(&a.out, &stage.exclusions)?;
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> anyhow::Result<()> {
    let mut cfg = SyntheticMarketConfig::default();
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = a.$field { cfg.$field = v; })* };
    }
    set!(
        stocks,
        returns_per_stock,
        intercept,
        b_turnover,
        b_cap,
        noise,
        seed
    );
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
        cfg = overlay_toml(&cfg, &text)
            .with_context(|| format!("market config {}", path.display()))?;
    }
    let market = gen_synthetic_market(cfg)?;
    write_synthetic_market(&market, &a.out)?;
    info!(
        "{} synthetic stocks written to {}",
        market.stocks.len(),
        a.out.display()
    );
    Ok(())
}

fn pipeline_config(a: PipelineArgs) -> anyhow::Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if !a.ticks.is_empty() {
        cfg.ticks = a.ticks;
    }
    cfg.shares = a.shares.or(cfg.shares);
    cfg.calendar = a.calendar.or(cfg.calendar);
    if let Some(g) = a.groups {
        cfg.groups = g;
    }
    if !a.attributes.is_empty() {
        cfg.attributes = a.attributes;
    }
    if let Some(s) = a.group_stat {
        cfg.group_stat = s;
    }
    cfg.drop_session_gap |= a.drop_session_gap;
    a.settings.apply(&mut cfg);
    if let Some(out) = a.out {
        cfg.out_dir = out;
    }
    if let Some(path) = &a.config {
        cfg = cfg.overlay_file(path)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_pipeline(a: PipelineArgs) -> anyhow::Result<()> {
    let cfg = pipeline_config(a)?;
    let report = run_pipeline(&cfg)?;
    for (sign, table) in &report.comparisons {
        print!("{sign} tails\n{}", table.to_text());
    }
    Ok(())
}

fn cmd_plotdata(a: PlotArgs) -> anyhow::Result<()> {
    let report = Report::load(&a.report)?;
    let files = emit_plot_data(&report, &a.out)?;
    info!("{} plot files written to {}", files.len(), a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Profile(a) => cmd_profile(a),
        Command::Group(a) => cmd_group(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Regress(a) => cmd_regress(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Plotdata(a) => cmd_plotdata(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
