use std::collections::BTreeSet;
use std::path::Path;

use chrono::{NaiveDate, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One continuous trading window inside a day, e.g. 09:30–11:30.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionWindow {
    pub open: NaiveTime,
    pub close: NaiveTime,
}

impl SessionWindow {
    pub fn new(open: NaiveTime, close: NaiveTime) -> Result<Self> {
        for t in [open, close] {
            if t.second() != 0 || t.nanosecond() != 0 {
                return Err(Error::InvalidCalendar(format!(
                    "window boundary {t} is not a whole minute"
                )));
            }
        }
        if close <= open {
            return Err(Error::InvalidCalendar(format!(
                "window {open}-{close} closes before it opens"
            )));
        }
        Ok(Self { open, close })
    }

    pub fn minutes(&self) -> usize {
        ((self.close - self.open).num_seconds() / 60) as usize
    }
}

/// Trading days and the intraday session windows that define the minute grid.
///
/// A session minute is labelled by the boundary that closes it: the first
/// minute of the 09:30 window is `09:31` and covers `[09:30:00, 09:31:00]`,
/// later minutes cover `(t - 1min, t]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionCalendar {
    windows: Vec<SessionWindow>,
    days: Option<BTreeSet<NaiveDate>>,
}

/// Position of one session minute inside a trading day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinuteSlot {
    pub window: usize,
    /// Index of the minute within the whole day, across windows.
    pub index: usize,
}

impl Default for SessionCalendar {
    /// The Shanghai/Shenzhen continuous-trading sessions 09:30–11:30 and
    /// 13:00–15:00, every day that carries ticks.
    fn default() -> Self {
        let t = |h, m| NaiveTime::from_hms_opt(h, m, 0).unwrap();
        Self {
            windows: vec![
                SessionWindow {
                    open: t(9, 30),
                    close: t(11, 30),
                },
                SessionWindow {
                    open: t(13, 0),
                    close: t(15, 0),
                },
            ],
            days: None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CalendarFile {
    windows: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    days: Option<Vec<String>>,
}

fn parse_time(s: &str) -> Result<NaiveTime> {
    NaiveTime::parse_from_str(s, "%H:%M")
        .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M:%S"))
        .map_err(|e| Error::InvalidCalendar(format!("bad time `{s}`: {e}")))
}

impl SessionCalendar {
    pub fn new(windows: Vec<SessionWindow>, days: Option<Vec<NaiveDate>>) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::InvalidCalendar("no session windows".into()));
        }
        for pair in windows.windows(2) {
            if pair[1].open < pair[0].close {
                return Err(Error::InvalidCalendar(format!(
                    "windows {}-{} and {}-{} overlap or are out of order",
                    pair[0].open, pair[0].close, pair[1].open, pair[1].close
                )));
            }
        }
        Ok(Self {
            windows,
            days: days.map(|d| d.into_iter().collect()),
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: CalendarFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let windows = raw
            .windows
            .iter()
            .map(|[o, c]| SessionWindow::new(parse_time(o)?, parse_time(c)?))
            .collect::<Result<Vec<_>>>()?;
        let days = raw
            .days
            .map(|days| {
                days.iter()
                    .map(|d| {
                        NaiveDate::parse_from_str(d, "%Y-%m-%d")
                            .map_err(|e| Error::InvalidCalendar(format!("bad date `{d}`: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        Self::new(windows, days)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let raw = CalendarFile {
            windows: self
                .windows
                .iter()
                .map(|w| {
                    [
                        w.open.format("%H:%M").to_string(),
                        w.close.format("%H:%M").to_string(),
                    ]
                })
                .collect(),
            days: self
                .days
                .as_ref()
                .map(|d| d.iter().map(|d| d.format("%Y-%m-%d").to_string()).collect()),
        };
        toml::to_string(&raw).expect("calendar serializes")
    }

    pub fn windows(&self) -> &[SessionWindow] {
        &self.windows
    }

    /// Explicit trading-day list, if the calendar restricts days.
    pub fn days(&self) -> Option<impl Iterator<Item = NaiveDate> + '_> {
        self.days.as_ref().map(|d| d.iter().copied())
    }

    pub fn includes_day(&self, date: NaiveDate) -> bool {
        self.days.as_ref().is_none_or(|d| d.contains(&date))
    }

    pub fn minutes_per_day(&self) -> usize {
        self.windows.iter().map(SessionWindow::minutes).sum()
    }

    /// Minute label (closing boundary) of a day-level slot index.
    pub fn slot_label(&self, index: usize) -> Option<(usize, NaiveTime)> {
        let mut offset = 0;
        for (w, window) in self.windows.iter().enumerate() {
            let n = window.minutes();
            if index < offset + n {
                let k = (index - offset + 1) as i64;
                return Some((w, window.open + chrono::Duration::minutes(k)));
            }
            offset += n;
        }
        None
    }

    /// Session minute that a tick at `time` belongs to, or `None` when the
    /// time falls outside every window.
    pub fn slot_of(&self, time: NaiveTime) -> Option<MinuteSlot> {
        let mut offset = 0;
        for (w, window) in self.windows.iter().enumerate() {
            if time >= window.open && time <= window.close {
                let secs = (time - window.open).num_milliseconds();
                // ceil(secs / 60s) - 1, with the opening instant in minute 0
                let k = ((secs + 59_999) / 60_000).max(1) - 1;
                return Some(MinuteSlot {
                    window: w,
                    index: offset + k as usize,
                });
            }
            offset += window.minutes();
        }
        None
    }
}
