use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{derive_seed, seeded_rng, unit_f64, Splice};
use crate::ingest::{write_shares, write_ticks, SessionCalendar, TradeTick};
use crate::pipeline::io::write_atomic;
use crate::{Error, Result};

/// Lowest planted exponent a configuration may produce.
pub const MIN_PLANTED_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// `noise` is the standard deviation.
    Normal,
    /// `noise` is the half-width.
    Uniform,
}

/// Synthetic market with exponents planted as
/// `α_i = intercept + b_turnover·ln(turnover_i) + b_cap·ln(cap_i) + ε_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticMarketConfig {
    pub stocks: usize,
    /// Log-uniform range of market capitalization.
    pub cap_range: [f64; 2],
    /// Log-uniform range of per-minute turnover rate.
    pub turnover_range: [f64; 2],
    pub intercept: f64,
    pub b_turnover: f64,
    pub b_cap: f64,
    pub noise: f64,
    pub noise_kind: NoiseKind,
    /// Minimum number of intraday returns per stock; whole days are
    /// generated, so the actual count may be a little higher.
    pub returns_per_stock: usize,
    /// Where the Pareto tail takes over from the Student-t body, in units
    /// of the body scale. Larger values leave fewer returns in the tail.
    pub tail_start: f64,
    /// Raw log-return size of the body/tail cutoff.
    pub return_scale: f64,
    /// Log-uniform range of the first price.
    pub price_range: [f64; 2],
    pub start_date: NaiveDate,
    pub seed: u64,
}

impl Default for SyntheticMarketConfig {
    fn default() -> Self {
        Self {
            stocks: 400,
            cap_range: [1e8, 1e10],
            turnover_range: [1e-5, 1e-3],
            intercept: -1.5,
            b_turnover: -0.1,
            b_cap: 0.2,
            noise: 0.15,
            noise_kind: NoiseKind::Normal,
            returns_per_stock: 50_000,
            tail_start: 3.0,
            return_scale: 1e-3,
            price_range: [3.0, 50.0],
            start_date: NaiveDate::from_ymd_opt(2004, 1, 5).unwrap(),
            seed: 20_040_105,
        }
    }
}

impl SyntheticMarketConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        let range_ok =
            |r: [f64; 2]| r[0].is_finite() && r[0] > 0.0 && r[1] >= r[0] && r[1].is_finite();
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.stocks == 0 {
            return bad("market needs at least one stock".into());
        }
        for (name, r) in [
            ("cap_range", self.cap_range),
            ("turnover_range", self.turnover_range),
            ("price_range", self.price_range),
        ] {
            if !range_ok(r) {
                return bad(format!("{name} {r:?} is not a positive increasing range"));
            }
        }
        if self.returns_per_stock == 0 {
            return bad("returns_per_stock must be positive".into());
        }
        if !(self.tail_start > 0.0 && self.tail_start.is_finite()) {
            return bad(format!("tail_start {} must be positive", self.tail_start));
        }
        if !(self.return_scale > 0.0 && self.return_scale.is_finite()) {
            return bad(format!(
                "return_scale {} must be positive",
                self.return_scale
            ));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise {} must be non-negative", self.noise));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockTruth {
    pub stock_id: String,
    pub cap: f64,
    pub turnover: f64,
    pub mean_value: f64,
    pub tradable_shares: f64,
    pub initial_price: f64,
    pub alpha: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SyntheticMarket {
    pub config: SyntheticMarketConfig,
    #[serde(skip)]
    pub calendar: SessionCalendar,
    pub days: Vec<NaiveDate>,
    pub stocks: Vec<StockTruth>,
}

fn log_uniform(u: f64, [lo, hi]: [f64; 2]) -> f64 {
    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
}

fn trading_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut days = Vec::with_capacity(count);
    let mut d = start;
    while days.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            days.push(d);
        }
        d += Duration::days(1);
    }
    days
}

/// Draws the per-stock attributes and planted exponents. Price paths and
/// trades are produced lazily per stock by [`SyntheticMarket::ticks`].
pub fn gen_synthetic_market(config: SyntheticMarketConfig) -> Result<SyntheticMarket> {
    config.validate()?;
    let calendar = SessionCalendar::default();
    let per_day = calendar.minutes_per_day() - 1;
    let days = trading_days(
        config.start_date,
        config.returns_per_stock.div_ceil(per_day),
    );

    let mut rng = seeded_rng(config.seed);
    let width = (config.stocks as f64).log10().floor() as usize + 1;
    let mut stocks = Vec::with_capacity(config.stocks);
    for i in 0..config.stocks {
        let cap = log_uniform(unit_f64(&mut rng), config.cap_range);
        let turnover = log_uniform(unit_f64(&mut rng), config.turnover_range);
        let initial_price = log_uniform(unit_f64(&mut rng), config.price_range);
        let eps = match config.noise_kind {
            NoiseKind::Normal => {
                let z: f64 = StandardNormal.sample(&mut rng);
                config.noise * z
            }
            NoiseKind::Uniform => config.noise * (2.0 * unit_f64(&mut rng) - 1.0),
        };
        let alpha =
            config.intercept + config.b_turnover * turnover.ln() + config.b_cap * cap.ln() + eps;
        let stock_id = format!("S{i:0width$}");
        if alpha.is_nan() || alpha <= MIN_PLANTED_ALPHA {
            return Err(Error::InvalidParameter(format!(
                "planted alpha {alpha:.3} for {stock_id} is not above {MIN_PLANTED_ALPHA}"
            )));
        }
        stocks.push(StockTruth {
            stock_id,
            cap,
            turnover,
            mean_value: turnover * cap,
            tradable_shares: cap / initial_price,
            initial_price,
            alpha,
            seed: derive_seed(config.seed, i as u64),
        });
    }
    Ok(SyntheticMarket {
        config,
        calendar,
        days,
        stocks,
    })
}

impl SyntheticMarket {
    pub fn shares(&self) -> BTreeMap<String, f64> {
        self.stocks
            .iter()
            .map(|s| (s.stock_id.clone(), s.tradable_shares))
            .collect()
    }

    pub fn truth(&self, stock_id: &str) -> Option<&StockTruth> {
        self.stocks.iter().find(|s| s.stock_id == stock_id)
    }

    /// Calendar restricted to the generated days.
    pub fn dated_calendar(&self) -> SessionCalendar {
        SessionCalendar::new(self.calendar.windows().to_vec(), Some(self.days.clone()))
            .expect("default windows are valid")
    }

    /// Ticks of stock `index`: one or two trades per session minute, the
    /// last of which sets the minute close. Minute-to-minute log returns
    /// are symmetric draws with a Student-t body and an exact Pareto tail of
    /// exponent `alpha`; the per-minute traded values average exactly to
    /// `mean_value`.
    pub fn ticks(&self, index: usize) -> Result<Vec<TradeTick>> {
        let truth = &self.stocks[index];
        let cfg = &self.config;
        let splice = Splice::student_t(cfg.tail_start, 1.0, truth.alpha)?;
        let mut rng = seeded_rng(truth.seed);
        let per_day = self.calendar.minutes_per_day();
        let total = per_day * self.days.len();

        let weights: Vec<f64> = (0..total)
            .map(|_| -(1.0 - unit_f64(&mut rng)).ln())
            .collect();
        let value_scale = truth.mean_value * total as f64 / weights.iter().sum::<f64>();

        let mut ticks = Vec::with_capacity(total * 3 / 2);
        let mut close = truth.initial_price;
        let mut w = weights.iter();
        for &date in &self.days {
            for slot in 0..per_day {
                let prev = close;
                if slot > 0 {
                    close = prev * (cfg.return_scale * splice.draw_symmetric(&mut rng)).exp();
                    if !(close.is_finite() && close > 0.0) {
                        return Err(Error::Degenerate(format!(
                            "{}: price path left the positive reals on {date}",
                            truth.stock_id
                        )));
                    }
                }
                let value = w.next().unwrap() * value_scale;
                let (_, label) = self.calendar.slot_label(slot).expect("slot in day");
                let boundary = date.and_time(label);
                let last_at = boundary - Duration::seconds((rng.next_u64() % 30) as i64);
                if rng.next_u64() >> 63 == 1 {
                    let early_at = boundary - Duration::seconds(30 + (rng.next_u64() % 30) as i64);
                    let share = 0.1 + 0.8 * unit_f64(&mut rng);
                    ticks.push(TradeTick {
                        stock_id: truth.stock_id.clone(),
                        timestamp: early_at,
                        price: prev,
                        volume: value * share / prev,
                    });
                    ticks.push(TradeTick {
                        stock_id: truth.stock_id.clone(),
                        timestamp: last_at,
                        price: close,
                        volume: value * (1.0 - share) / close,
                    });
                } else {
                    ticks.push(TradeTick {
                        stock_id: truth.stock_id.clone(),
                        timestamp: last_at,
                        price: close,
                        volume: value / close,
                    });
                }
            }
        }
        Ok(ticks)
    }
}

use rand::Rng as _;

/// Writes `ticks/<stock>.csv`, `shares.csv`, `calendar.toml` and
/// `ground_truth.json` under `dir`.
pub fn write_synthetic_market(market: &SyntheticMarket, dir: &Path) -> Result<()> {
    let tick_dir = dir.join("ticks");
    std::fs::create_dir_all(&tick_dir).map_err(|e| Error::file(&tick_dir, e))?;
    for (i, s) in market.stocks.iter().enumerate() {
        let mut buf = Vec::new();
        write_ticks(&mut buf, &market.ticks(i)?)?;
        write_atomic(&tick_dir.join(format!("{}.csv", s.stock_id)), &buf)?;
    }
    let mut buf = Vec::new();
    write_shares(&mut buf, &market.shares())?;
    write_atomic(&dir.join("shares.csv"), &buf)?;
    write_atomic(
        &dir.join("calendar.toml"),
        market.dated_calendar().to_toml_string().as_bytes(),
    )?;
    let truth = serde_json::to_vec_pretty(market)?;
    write_atomic(&dir.join("ground_truth.json"), &truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::build_minute_bars;

    fn small() -> SyntheticMarketConfig {
        SyntheticMarketConfig {
            stocks: 6,
            returns_per_stock: 500,
            ..Default::default()
        }
    }

    #[test]
    fn attributes_follow_plant() {
        let m = gen_synthetic_market(small()).unwrap();
        assert_eq!(m.stocks.len(), 6);
        assert_eq!(m.days.len(), 3);
        for s in &m.stocks {
            assert!(s.cap >= 1e8 && s.cap <= 1e10);
            assert!((s.tradable_shares * s.initial_price / s.cap - 1.0).abs() < 1e-12);
            assert!(s.alpha > MIN_PLANTED_ALPHA);
        }
        assert!(m
            .days
            .iter()
            .all(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)));
    }

    #[test]
    fn rejects_low_planted_alpha() {
        let cfg = SyntheticMarketConfig {
            intercept: -10.0,
            ..small()
        };
        assert!(matches!(
            gen_synthetic_market(cfg),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn ticks_realize_closes_and_turnover() {
        let m = gen_synthetic_market(small()).unwrap();
        let ticks = m.ticks(2).unwrap();
        assert!(ticks.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        let bars = build_minute_bars(&ticks, &m.calendar).unwrap();
        assert_eq!(bars.days.len(), 3);
        assert_eq!(bars.minute_count(), 3 * 240);
        let truth = &m.stocks[2];
        assert_eq!(bars.days[0].bars[0].close, truth.initial_price);
        let mean_v = bars.bars().map(|b| b.value).sum::<f64>() / bars.minute_count() as f64;
        assert!((mean_v / truth.mean_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn same_seed_same_ticks() {
        let a = gen_synthetic_market(small()).unwrap();
        let b = gen_synthetic_market(small()).unwrap();
        assert_eq!(a.ticks(4).unwrap(), b.ticks(4).unwrap());
    }

    #[test]
    fn toml_config() {
        let cfg = SyntheticMarketConfig::from_toml_str(
            "stocks = 10\nb_cap = 0.3\nnoise_kind = \"uniform\"\nstart_date = \"2005-03-01\"\n",
        )
        .unwrap();
        assert_eq!(cfg.stocks, 10);
        assert_eq!(cfg.b_cap, 0.3);
        assert_eq!(cfg.noise_kind, NoiseKind::Uniform);
        assert!(SyntheticMarketConfig::from_toml_str("bogus = 1\n").is_err());
    }
}
