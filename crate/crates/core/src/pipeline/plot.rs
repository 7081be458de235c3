use std::path::{Path, PathBuf};

use super::analysis::{Estimator, Report};
use super::io::write_atomic;
use crate::cohort::Attribute;
use crate::qgaussian::qgaussian_pdf;
use crate::tail::Sign;
use crate::{Error, Result};

/// Level of the reference line drawn on per-stock scatters.
pub const REFERENCE_ALPHA: f64 = 2.0;

fn csv_file(rows: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    rows(&mut w)?;
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn fmt(v: f64) -> String {
    v.to_string()
}

/// `(min, max)` of the finite values, if any.
fn span(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

/// Plot-ready CSVs for `report`: per-group densities with the fitted
/// curve, per-group tail CCDFs, group exponents against the log attribute
/// with the fitted lines, and the per-stock scatter with fitted lines and
/// the `α = 2` reference. Nothing is written if the report holds no fits.
pub fn emit_plot_data(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    let any_group_fit = report
        .cohorts
        .iter()
        .flat_map(|c| &c.fits)
        .any(|g| g.qgaussian.is_some() || !g.tails.is_empty());
    if !any_group_fit && report.stock_tails.is_empty() {
        return Err(Error::EmptySeries("no fits to plot".into()));
    }

    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    for cohort in &report.cohorts {
        let attr = cohort.partition.attribute;
        for g in &cohort.fits {
            let Some(pdf) = &g.pdf else { continue };
            let bytes = csv_file(|w| {
                w.write_record(["bin_center", "density", "count", "fit"])?;
                for b in &pdf.bins {
                    let fit = match &g.qgaussian {
                        Some(q) => fmt(qgaussian_pdf(b.center, q.alpha, q.scale)?),
                        None => String::new(),
                    };
                    w.write_record([fmt(b.center), fmt(b.density), b.count.to_string(), fit])?;
                }
                Ok(())
            })?;
            files.push((dir.join(format!("pdf_{attr}_g{:02}.csv", g.index)), bytes));
        }

        if cohort.fits.iter().any(|g| !g.ccdf.is_empty()) {
            let bytes = csv_file(|w| {
                w.write_record(["group", "sign", "r", "ccdf"])?;
                for g in &cohort.fits {
                    for curve in &g.ccdf {
                        for &(r, p) in &curve.points {
                            w.write_record([
                                g.index.to_string(),
                                curve.sign.to_string(),
                                fmt(r),
                                fmt(p),
                            ])?;
                        }
                    }
                }
                Ok(())
            })?;
            files.push((dir.join(format!("ccdf_{attr}.csv")), bytes));
        }

        let bytes = csv_file(|w| {
            w.write_record(["kind", "estimator", "group", "ln_x", "alpha"])?;
            for est in Estimator::ALL {
                let points: Vec<(usize, f64, f64)> = cohort
                    .fits
                    .iter()
                    .filter_map(|g| g.alpha(est).map(|a| (g.index, g.group_attribute.ln(), a)))
                    .collect();
                for &(k, x, a) in &points {
                    w.write_record(["point", est.as_str(), &k.to_string(), &fmt(x), &fmt(a)])?;
                }
                let tag = format!("{attr}-grouped-{}", est.as_str());
                if let (Some(fit), Some((lo, hi))) =
                    (report.regression(&tag), span(points.iter().map(|p| p.1)))
                {
                    let (a, b) = (fit.intercept().estimate, fit.slopes()[0].estimate);
                    for x in [lo, hi] {
                        w.write_record(["line", est.as_str(), "", &fmt(x), &fmt(a + b * x)])?;
                    }
                }
            }
            Ok(())
        })?;
        files.push((dir.join(format!("scatter_{attr}.csv")), bytes));
    }

    if !report.stock_tails.is_empty() {
        let bytes = csv_file(|w| {
            w.write_record([
                "attribute",
                "kind",
                "estimator",
                "stock_id",
                "ln_x",
                "alpha",
            ])?;
            for attr in Attribute::ALL {
                let mut all_x = Vec::new();
                for sign in Sign::BOTH {
                    let mut xs = Vec::new();
                    for t in report.stock_tails.iter().filter(|t| t.fit.sign == sign) {
                        let Some(p) = report.profiles.iter().find(|p| p.stock_id == t.stock_id)
                        else {
                            continue;
                        };
                        let x = attr.of(p).ln();
                        xs.push(x);
                        w.write_record([
                            attr.as_str(),
                            "point",
                            sign.as_str(),
                            &t.stock_id,
                            &fmt(x),
                            &fmt(t.fit.alpha),
                        ])?;
                    }
                    let tag = format!("{attr}-stock-{sign}");
                    if let (Some(fit), Some((lo, hi))) =
                        (report.regression(&tag), span(xs.iter().copied()))
                    {
                        let (a, b) = (fit.intercept().estimate, fit.slopes()[0].estimate);
                        for x in [lo, hi] {
                            w.write_record([
                                attr.as_str(),
                                "line",
                                sign.as_str(),
                                "",
                                &fmt(x),
                                &fmt(a + b * x),
                            ])?;
                        }
                    }
                    all_x.extend(xs);
                }
                if let Some((lo, hi)) = span(all_x.into_iter()) {
                    for x in [lo, hi] {
                        w.write_record([
                            attr.as_str(),
                            "reference",
                            "",
                            "",
                            &fmt(x),
                            &fmt(REFERENCE_ALPHA),
                        ])?;
                    }
                }
            }
            Ok(())
        })?;
        files.push((dir.join("stock_scatter.csv"), bytes));
    }

    let mut written = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}
