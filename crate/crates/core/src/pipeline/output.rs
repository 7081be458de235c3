use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::analysis::{Exclusion, Report, StockTail};
use super::io::{write_atomic, write_json};
use super::plot::emit_plot_data;
use crate::ingest::write_profiles;
use crate::tail::{Sign, TailFit};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct TailRow {
    stock_id: String,
    sign: Sign,
    alpha: f64,
    r_min: f64,
    n_tail: usize,
    ks: f64,
    stderr: f64,
    flags: String,
}

pub fn write_stock_tails<W: Write>(writer: W, tails: &[StockTail]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for t in tails {
        w.serialize(TailRow {
            stock_id: t.stock_id.clone(),
            sign: t.fit.sign,
            alpha: t.fit.alpha,
            r_min: t.fit.r_min,
            n_tail: t.fit.n_tail,
            ks: t.fit.ks,
            stderr: t.fit.stderr,
            flags: t.fit.flags(),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_stock_tails<R: Read>(reader: R) -> Result<Vec<StockTail>> {
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let row: TailRow = row?;
        let mut gof_p_value = None;
        let mut thin_tail_warning = false;
        for flag in row.flags.split(';').filter(|f| !f.is_empty()) {
            match flag.split_once('=') {
                Some(("gof_p", v)) => {
                    gof_p_value = Some(v.parse().map_err(|_| {
                        Error::InvalidParameter(format!("{}: bad flag `{flag}`", row.stock_id))
                    })?)
                }
                None if flag == "thin_tail_warning" => thin_tail_warning = true,
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "{}: unknown flag `{flag}`",
                        row.stock_id
                    )))
                }
            }
        }
        out.push(StockTail {
            stock_id: row.stock_id,
            fit: TailFit {
                sign: row.sign,
                r_min: row.r_min,
                alpha: row.alpha,
                n_tail: row.n_tail,
                ks: row.ks,
                stderr: row.stderr,
                thin_tail_warning,
                gof_p_value,
            },
        });
    }
    Ok(out)
}

pub fn write_exclusions<W: Write>(writer: W, exclusions: &[Exclusion]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["entity", "stage", "reason"])?;
    for e in exclusions {
        w.write_record([&e.entity, &e.stage, &e.reason])?;
    }
    w.flush()?;
    Ok(())
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Writes the report bundle under `dir`. Each file is replaced atomically.
pub fn write_report(report: &Report, dir: &Path) -> Result<()> {
    write_atomic(
        &dir.join("profiles.csv"),
        &csv_bytes(|b| write_profiles(b, &report.profiles))?,
    )?;
    write_atomic(
        &dir.join("stock_tails.csv"),
        &csv_bytes(|b| write_stock_tails(b, &report.stock_tails))?,
    )?;
    write_atomic(
        &dir.join("exclusions.csv"),
        &csv_bytes(|b| write_exclusions(b, &report.exclusions))?,
    )?;
    for cohort in &report.cohorts {
        let attr = cohort.partition.attribute;
        write_json(
            &dir.join("partitions").join(format!("{attr}.json")),
            &cohort.partition,
        )?;
        write_json(
            &dir.join("group_fits").join(format!("{attr}.json")),
            &cohort.fits,
        )?;
    }
    for (tag, record) in &report.regressions {
        write_json(&dir.join("regressions").join(format!("{tag}.json")), record)?;
    }
    for (sign, rep) in &report.reparametrizations {
        write_json(&dir.join(format!("reparametrization_{sign}.json")), rep)?;
    }
    for (sign, table) in &report.comparisons {
        write_atomic(
            &dir.join(format!("comparison_{sign}.csv")),
            &table.to_csv()?,
        )?;
        write_atomic(
            &dir.join(format!("comparison_{sign}.txt")),
            table.to_text().as_bytes(),
        )?;
    }
    emit_plot_data(report, &dir.join("plots"))?;
    write_json(&dir.join("report.json"), report)
}
