use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MinuteSeries;
use crate::{Error, Result};

/// Standardized one-minute intraday returns of one stock.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub stock_id: String,
    pub values: Vec<f64>,
    /// Mean of the raw returns.
    pub raw_mean: f64,
    /// Population standard deviation of the raw returns.
    pub raw_std: f64,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Raw log returns recovered from the standardized values.
    pub fn raw(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|z| z * self.raw_std + self.raw_mean)
            .collect()
    }
}

/// Log returns between consecutive minute closes of the same day.
///
/// The first minute of each day yields no return, so overnight moves never
/// enter. The return across a lunch break is kept unless
/// `drop_session_gap` is set.
pub fn compute_intraday_returns(bars: &MinuteSeries, drop_session_gap: bool) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(bars.minute_count());
    for day in &bars.days {
        for pair in day.bars.windows(2) {
            if drop_session_gap && pair[0].window != pair[1].window {
                continue;
            }
            out.push(pair[1].close.ln() - pair[0].close.ln());
        }
    }
    if out.is_empty() {
        return Err(Error::EmptySeries(format!(
            "{}: no day has two session minutes",
            bars.stock_id
        )));
    }
    Ok(out)
}

/// Rescales returns to zero mean and unit population variance.
pub fn standardize(stock_id: impl Into<String>, raw: &[f64]) -> Result<ReturnSeries> {
    let stock_id = stock_id.into();
    if raw.len() < 2 {
        return Err(Error::InsufficientData {
            what: "standardization",
            needed: 2,
            got: raw.len(),
        });
    }
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    // second pass with the compensating term keeps the mean tight
    let (ss, comp) = raw.iter().fold((0.0, 0.0), |(ss, c), &r| {
        let d = r - mean;
        (ss + d * d, c + d)
    });
    let var = (ss - comp * comp / n) / n;
    let std = var.sqrt();
    if !(std.is_finite() && std > 0.0) || std <= f64::EPSILON * mean.abs() {
        return Err(Error::Degenerate(format!(
            "{stock_id}: returns have zero dispersion"
        )));
    }
    let values = raw.iter().map(|r| (r - mean) / std).collect();
    Ok(ReturnSeries {
        stock_id,
        values,
        raw_mean: mean,
        raw_std: std,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexRow {
    stock_id: String,
    n: usize,
    raw_mean: f64,
    raw_std: f64,
    file: String,
}

fn check_file_safe(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
        && !id.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "stock id `{id}` cannot be used as a file name"
        )))
    }
}

/// Writes one `<stock_id>.f64` file of little-endian 64-bit floats per
/// series plus an `index.csv` with the standardization constants.
pub fn write_returns_dir(dir: &Path, series: &[ReturnSeries]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let mut index = Vec::new();
    for s in series {
        check_file_safe(&s.stock_id)?;
        let file = format!("{}.f64", s.stock_id);
        let mut bytes = Vec::with_capacity(s.values.len() * 8);
        for v in &s.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        crate::pipeline::io::write_atomic(&dir.join(&file), &bytes)?;
        index.push(IndexRow {
            stock_id: s.stock_id.clone(),
            n: s.values.len(),
            raw_mean: s.raw_mean,
            raw_std: s.raw_std,
            file,
        });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &index {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    crate::pipeline::io::write_atomic(&dir.join("index.csv"), &bytes)
}

pub fn read_returns_dir(dir: &Path) -> Result<Vec<ReturnSeries>> {
    let index_path = dir.join("index.csv");
    let file = std::fs::File::open(&index_path).map_err(|e| Error::file(&index_path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for row in rdr.deserialize::<IndexRow>() {
        let row = row?;
        let path = dir.join(&row.file);
        let bytes = std::fs::read(&path).map_err(|e| Error::file(&path, e))?;
        if bytes.len() != row.n * 8 {
            return Err(Error::Config(format!(
                "{}: expected {} values, found {} bytes",
                path.display(),
                row.n,
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push(ReturnSeries {
            stock_id: row.stock_id,
            values,
            raw_mean: row.raw_mean,
            raw_std: row.raw_std,
        });
    }
    Ok(out)
}

/// Plain-text variant: one `r` column.
pub fn write_returns_csv<W: Write>(writer: W, series: &ReturnSeries) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "r")?;
    for v in &series.values {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}
