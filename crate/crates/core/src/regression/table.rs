use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ols::RegressionFit;
use crate::{Error, Result};

/// Significance marks: `***` at 1%, `**` at 5%, `*` at 10%.
pub fn stars(p: f64) -> &'static str {
    if p <= 0.01 {
        "***"
    } else if p <= 0.05 {
        "**"
    } else if p <= 0.10 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub estimate: f64,
    pub p_value: f64,
    pub stars: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    /// One entry per table column, `None` when the model lacks that slope.
    pub slopes: Vec<Option<ComparisonCell>>,
    pub r_squared: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub columns: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

/// Side-by-side slopes, significance and R² of fits made on one dataset.
pub fn model_comparison(fits: &[&RegressionFit]) -> Result<ComparisonTable> {
    let first = fits
        .first()
        .ok_or_else(|| Error::InvalidParameter("no fits to compare".into()))?;
    if let Some(odd) = fits.iter().find(|f| f.n != first.n) {
        return Err(Error::MismatchedData(format!(
            "{} has N = {} but {} has N = {}",
            odd.model, odd.n, first.model, first.n
        )));
    }
    let mut columns: Vec<String> = Vec::new();
    for f in fits {
        for c in f.slopes() {
            if !columns.contains(&c.name) {
                columns.push(c.name.clone());
            }
        }
    }
    let rows = fits
        .iter()
        .map(|f| ComparisonRow {
            model: f.model.clone(),
            slopes: columns
                .iter()
                .map(|name| {
                    f.slopes()
                        .iter()
                        .find(|c| &c.name == name)
                        .map(|c| ComparisonCell {
                            estimate: c.estimate,
                            p_value: c.p_value,
                            stars: stars(c.p_value).to_string(),
                        })
                })
                .collect(),
            r_squared: f.r_squared,
            n: f.n,
        })
        .collect();
    Ok(ComparisonTable { columns, rows })
}

impl ComparisonTable {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["model".to_string()];
        for c in &self.columns {
            header.extend([c.clone(), format!("{c}_p"), format!("{c}_stars")]);
        }
        header.extend(["r_squared".into(), "n".into()]);
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.model.clone()];
            for cell in &row.slopes {
                match cell {
                    Some(c) => rec.extend([
                        c.estimate.to_string(),
                        c.p_value.to_string(),
                        c.stars.clone(),
                    ]),
                    None => rec.extend([String::new(), String::new(), String::new()]),
                }
            }
            rec.extend([row.r_squared.to_string(), row.n.to_string()]);
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn to_text(&self) -> String {
        let mut cells: Vec<Vec<String>> = Vec::with_capacity(self.rows.len() + 1);
        let mut header = vec!["model".to_string()];
        header.extend(self.columns.iter().cloned());
        header.extend(["R2".into(), "N".into()]);
        cells.push(header);
        for row in &self.rows {
            let mut line = vec![row.model.clone()];
            for cell in &row.slopes {
                line.push(match cell {
                    Some(c) => format!("{:.4}{}", c.estimate, c.stars),
                    None => "-".into(),
                });
            }
            line.extend([format!("{:.3}", row.r_squared), row.n.to_string()]);
            cells.push(line);
        }
        let ncol = cells[0].len();
        let widths: Vec<usize> = (0..ncol)
            .map(|j| {
                cells
                    .iter()
                    .map(|r| r[j].chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for line in &cells {
            for (j, cell) in line.iter().enumerate() {
                if j == 0 {
                    let _ = write!(out, "{cell:<w$}", w = widths[j]);
                } else {
                    let _ = write!(out, "  {cell:>w$}", w = widths[j]);
                }
            }
            out.push('\n');
        }
        out.push_str("*** p <= 0.01, ** p <= 0.05, * p <= 0.10\n");
        out
    }
}
