use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

use super::{SessionCalendar, TradeTick};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinuteBar {
    /// Closing boundary of the minute.
    pub time: NaiveTime,
    /// Session window the minute belongs to.
    pub window: usize,
    /// Price of the last tick at or before the boundary.
    pub close: f64,
    /// Traded value of the ticks inside the minute.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradingDay {
    pub date: NaiveDate,
    pub bars: Vec<MinuteBar>,
}

/// Minute-close prices of one stock, one entry per session minute from the
/// first tick of each day to the end of the day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinuteSeries {
    pub stock_id: String,
    pub days: Vec<TradingDay>,
}

impl MinuteSeries {
    pub fn minute_count(&self) -> usize {
        self.days.iter().map(|d| d.bars.len()).sum()
    }

    pub fn bars(&self) -> impl Iterator<Item = &MinuteBar> {
        self.days.iter().flat_map(|d| d.bars.iter())
    }
}

/// Total traded value `Σ volume·price` of a set of trades.
pub fn compute_minute_traded_value(ticks: &[TradeTick]) -> f64 {
    ticks.iter().fold(0.0, |acc, t| acc + t.volume * t.price)
}

/// Builds the minute-close grid of one stock.
///
/// Ticks must belong to a single stock and be sorted by time. Ticks outside
/// every session window, or on days the calendar excludes, are ignored.
/// Minutes before the first in-session tick of a day are dropped; minutes
/// without a new tick repeat the previous close.
pub fn build_minute_bars(ticks: &[TradeTick], calendar: &SessionCalendar) -> Result<MinuteSeries> {
    let stock_id = ticks
        .first()
        .map(|t| t.stock_id.clone())
        .unwrap_or_default();
    for (i, t) in ticks.iter().enumerate() {
        t.validate(i)?;
        if t.stock_id != stock_id {
            return Err(Error::InvalidTick {
                index: i,
                reason: format!("stock `{}` mixed into series of `{stock_id}`", t.stock_id),
            });
        }
        if i > 0 && ticks[i - 1].timestamp > t.timestamp {
            return Err(Error::UnsortedTicks { index: i });
        }
    }

    let slots = calendar.minutes_per_day();
    let mut days = Vec::new();
    let mut outside = 0usize;
    let mut start = 0;
    while start < ticks.len() {
        let date = ticks[start].timestamp.date();
        let end = start + ticks[start..].partition_point(|t| t.timestamp.date() == date);
        let day_ticks = &ticks[start..end];
        start = end;
        if !calendar.includes_day(date) {
            outside += day_ticks.len();
            continue;
        }

        let mut last_price: Vec<Option<f64>> = vec![None; slots];
        let mut value = vec![0.0; slots];
        for t in day_ticks {
            match calendar.slot_of(t.timestamp.time()) {
                Some(slot) => {
                    last_price[slot.index] = Some(t.price);
                    value[slot.index] += t.volume * t.price;
                }
                None => outside += 1,
            }
        }
        let Some(first) = last_price.iter().position(Option::is_some) else {
            log::warn!("{stock_id}: {date} has no in-session ticks, day skipped");
            continue;
        };
        let mut close = last_price[first].unwrap();
        let bars = (first..slots)
            .map(|i| {
                if let Some(p) = last_price[i] {
                    close = p;
                }
                let (window, time) = calendar.slot_label(i).expect("slot within day");
                MinuteBar {
                    time,
                    window,
                    close,
                    value: value[i],
                }
            })
            .collect();
        days.push(TradingDay { date, bars });
    }

    if let Some(listed) = calendar.days() {
        for date in listed {
            if !days.iter().any(|d| d.date == date) {
                log::warn!("{stock_id}: no ticks on {date}, day skipped");
            }
        }
    }
    if outside > 0 {
        log::debug!("{stock_id}: {outside} ticks outside the session calendar ignored");
    }
    Ok(MinuteSeries { stock_id, days })
}
