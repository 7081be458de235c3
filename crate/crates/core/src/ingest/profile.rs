use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::MinuteSeries;
use crate::{Error, Result};

/// Trading attributes of one stock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockProfile {
    pub stock_id: String,
    /// Market capitalization: tradable shares times the first minute close.
    #[serde(rename = "c")]
    pub cap: f64,
    /// Mean traded value per session minute, empty minutes included.
    #[serde(rename = "mean_v")]
    pub mean_value: f64,
    /// `mean_value / cap`, per minute.
    pub turnover: f64,
    pub tradable_shares: f64,
}

pub fn compute_profile(bars: &MinuteSeries, tradable_shares: Option<f64>) -> Result<StockProfile> {
    let shares = tradable_shares.ok_or_else(|| Error::MissingShares(bars.stock_id.clone()))?;
    if !(shares.is_finite() && shares > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "{}: tradable shares {shares} must be positive",
            bars.stock_id
        )));
    }
    let first = bars
        .bars()
        .next()
        .ok_or_else(|| Error::EmptySeries(format!("{}: no minute bars", bars.stock_id)))?;
    let (sum, count) = bars
        .bars()
        .fold((0.0, 0usize), |(s, n), b| (s + b.value, n + 1));
    let mean_value = sum / count as f64;
    let cap = shares * first.close;
    Ok(StockProfile {
        stock_id: bars.stock_id.clone(),
        cap,
        mean_value,
        turnover: mean_value / cap,
        tradable_shares: shares,
    })
}

#[derive(Debug, Deserialize)]
struct SharesRow {
    stock_id: String,
    tradable_shares: f64,
}

/// Reads a `stock_id,tradable_shares` CSV.
pub fn read_shares<R: Read>(reader: R) -> Result<BTreeMap<String, f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = BTreeMap::new();
    for row in rdr.deserialize::<SharesRow>() {
        let row = row?;
        out.insert(row.stock_id, row.tradable_shares);
    }
    Ok(out)
}

pub fn write_shares<W: Write>(writer: W, shares: &BTreeMap<String, f64>) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "stock_id,tradable_shares")?;
    for (id, s) in shares {
        writeln!(w, "{id},{s}")?;
    }
    w.flush()?;
    Ok(())
}

/// Profiles CSV: `stock_id,c,mean_v,turnover,tradable_shares`.
pub fn write_profiles<W: Write>(writer: W, profiles: &[StockProfile]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in profiles {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_profiles<R: Read>(reader: R) -> Result<Vec<StockProfile>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}
