use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;
use serde::Deserialize;

use crate::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// One trade record.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeTick {
    pub stock_id: String,
    pub timestamp: NaiveDateTime,
    /// Currency per share.
    pub price: f64,
    /// Shares.
    pub volume: f64,
}

impl TradeTick {
    pub fn validate(&self, index: usize) -> Result<()> {
        if !(self.price.is_finite() && self.price > 0.0) {
            return Err(Error::InvalidTick {
                index,
                reason: format!("price {} is not positive", self.price),
            });
        }
        if !(self.volume.is_finite() && self.volume >= 0.0) {
            return Err(Error::InvalidTick {
                index,
                reason: format!("volume {} is negative", self.volume),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct TickRow {
    stock_id: String,
    timestamp: String,
    price: f64,
    volume: f64,
}

/// Reads a `stock_id,timestamp,price,volume` CSV and groups the ticks by
/// stock. Record indices in errors count data rows from zero.
pub fn read_ticks<R: Read>(reader: R) -> Result<BTreeMap<String, Vec<TradeTick>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out: BTreeMap<String, Vec<TradeTick>> = BTreeMap::new();
    for (index, row) in rdr.deserialize::<TickRow>().enumerate() {
        let row = row?;
        let timestamp =
            NaiveDateTime::parse_from_str(&row.timestamp, TIMESTAMP_FORMAT).map_err(|e| {
                Error::InvalidTick {
                    index,
                    reason: format!("timestamp `{}`: {e}", row.timestamp),
                }
            })?;
        let tick = TradeTick {
            stock_id: row.stock_id,
            timestamp,
            price: row.price,
            volume: row.volume,
        };
        tick.validate(index)?;
        let series = out.entry(tick.stock_id.clone()).or_default();
        if series
            .last()
            .is_some_and(|prev| prev.timestamp > tick.timestamp)
        {
            return Err(Error::UnsortedTicks { index });
        }
        series.push(tick);
    }
    Ok(out)
}

pub fn read_ticks_file(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<TradeTick>>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_ticks(std::io::BufReader::new(file))
        .map_err(|e| e.at_stage("read-ticks", path.display().to_string()))
}

pub fn write_ticks<W: Write>(writer: W, ticks: &[TradeTick]) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "stock_id,timestamp,price,volume")?;
    for t in ticks {
        writeln!(
            w,
            "{},{},{},{}",
            t.stock_id,
            t.timestamp.format(TIMESTAMP_FORMAT),
            t.price,
            t.volume
        )?;
    }
    w.flush()?;
    Ok(())
}
