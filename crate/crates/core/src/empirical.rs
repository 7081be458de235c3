//! Binned probability densities and empirical complementary CDFs.

use serde::{Deserialize, Serialize};

use crate::tail::Sign;
use crate::{Error, Result};

pub const MIN_PDF_SAMPLE: usize = 100;

/// Bin layout for [`estimate_pdf`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Binning {
    /// Uniform bins of `width` on `[-core, core]`, then bins whose width
    /// grows geometrically by `ratio` outward, mirrored on both sides.
    Hybrid { width: f64, core: f64, ratio: f64 },
    /// `bins` equal bins on `range`, or on the sample's `[min, max]`.
    Uniform {
        bins: usize,
        range: Option<(f64, f64)>,
    },
}

impl Default for Binning {
    fn default() -> Self {
        Binning::Hybrid {
            width: 0.1,
            core: 5.0,
            ratio: 1.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfBin {
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
    pub density: f64,
}

impl PdfBin {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPdf {
    pub bins: Vec<PdfBin>,
    pub sample_size: u64,
}

impl EmpiricalPdf {
    /// `Σ density·width`, 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        self.bins.iter().map(|b| b.density * b.width()).sum()
    }

    /// Probability mass above `r` implied by the binned densities, with
    /// linear interpolation inside the bin containing `r`.
    pub fn mass_above(&self, r: f64) -> f64 {
        self.bins
            .iter()
            .map(|b| {
                if b.lower >= r {
                    b.density * b.width()
                } else if b.upper > r {
                    b.density * (b.upper - r)
                } else {
                    0.0
                }
            })
            .sum()
    }
}

fn bin_edges(binning: &Binning, lo: f64, hi: f64) -> Result<Vec<f64>> {
    match *binning {
        Binning::Uniform { bins, range } => {
            if bins == 0 {
                return Err(Error::InvalidParameter(
                    "uniform binning needs bins > 0".into(),
                ));
            }
            let (a, b) = range.unwrap_or((lo, hi));
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::InvalidParameter(format!("bad bin range [{a}, {b}]")));
            }
            if lo < a || hi > b {
                return Err(Error::InvalidParameter(format!(
                    "sample [{lo}, {hi}] falls outside bin range [{a}, {b}]"
                )));
            }
            let step = (b - a) / bins as f64;
            let mut edges: Vec<f64> = (0..bins).map(|i| a + step * i as f64).collect();
            edges.push(b);
            Ok(edges)
        }
        Binning::Hybrid { width, core, ratio } => {
            if !(width > 0.0 && core > 0.0 && ratio >= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "bad hybrid binning width={width} core={core} ratio={ratio}"
                )));
            }
            let n_core = (2.0 * core / width).round().max(1.0) as usize;
            let extent = lo.abs().max(hi.abs());
            // positive wing edges beyond the core
            let mut wing = Vec::new();
            let (mut edge, mut w) = (core, width);
            while edge <= extent {
                w *= ratio;
                edge += w;
                wing.push(edge);
            }
            let mut edges: Vec<f64> = wing.iter().rev().map(|e| -e).collect();
            let step = 2.0 * core / n_core as f64;
            edges.extend((0..n_core).map(|i| -core + step * i as f64));
            edges.push(core);
            edges.extend(wing);
            Ok(edges)
        }
    }
}

/// Histogram density estimate: `count / (N · width)` per bin; empty bins
/// are kept with density 0.
pub fn estimate_pdf(sample: &[f64], binning: &Binning) -> Result<EmpiricalPdf> {
    if sample.len() < MIN_PDF_SAMPLE {
        return Err(Error::InsufficientData {
            what: "density estimate",
            needed: MIN_PDF_SAMPLE,
            got: sample.len(),
        });
    }
    if let Some(bad) = sample.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "non-finite sample value {bad}"
        )));
    }
    let (lo, hi) = sample
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let edges = bin_edges(binning, lo, hi)?;
    let nbins = edges.len() - 1;
    let mut counts = vec![0u64; nbins];
    for &x in sample {
        // bins are [lower, upper), the last one closed
        let i = edges
            .partition_point(|&e| e <= x)
            .saturating_sub(1)
            .min(nbins - 1);
        counts[i] += 1;
    }
    let n = sample.len() as f64;
    let bins = counts
        .iter()
        .enumerate()
        .map(|(i, &count)| {
            let (lower, upper) = (edges[i], edges[i + 1]);
            PdfBin {
                center: 0.5 * (lower + upper),
                lower,
                upper,
                count,
                density: count as f64 / (n * (upper - lower)),
            }
        })
        .collect();
    Ok(EmpiricalPdf {
        bins,
        sample_size: sample.len() as u64,
    })
}

/// Empirical complementary CDF of one signed half of a sample: for every
/// distinct magnitude `r`, the fraction of the half with magnitude `≥ r`.
pub fn ccdf(sample: &[f64], sign: Sign) -> Result<Vec<(f64, f64)>> {
    let mut xs = sign.magnitudes(sample);
    if xs.is_empty() {
        return Err(Error::EmptySeries(format!("no {sign} values in sample")));
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut out = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        if i == 0 || xs[i - 1] != x {
            out.push((x, (xs.len() - i) as f64 / n));
        }
    }
    Ok(out)
}

/// Keeps at most `max_points` of a CCDF, evenly spaced in rank, always
/// including both ends.
pub fn thin_ccdf(points: &[(f64, f64)], max_points: usize) -> Vec<(f64, f64)> {
    if points.len() <= max_points || max_points < 2 {
        return points.to_vec();
    }
    let last = points.len() - 1;
    let mut out: Vec<(f64, f64)> = (0..max_points)
        .map(|i| points[(i * last + (max_points - 1) / 2) / (max_points - 1)])
        .collect();
    out.dedup_by(|a, b| a.0 == b.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spread(n: usize) -> Vec<f64> {
        // deterministic, roughly bell-shaped
        (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                (u / (1.0 - u)).ln()
            })
            .collect()
    }

    #[test]
    fn too_small_sample() {
        assert!(matches!(
            estimate_pdf(&[0.0; 10], &Binning::default()),
            Err(Error::InsufficientData { got: 10, .. })
        ));
    }

    #[test]
    fn hybrid_edges_are_symmetric_and_cover() {
        let xs = spread(10_000);
        let pdf = estimate_pdf(&xs, &Binning::default()).unwrap();
        let edges: Vec<f64> = pdf.bins.iter().map(|b| b.lower).collect();
        assert!(edges.windows(2).all(|w| w[1] > w[0]));
        let first = pdf.bins.first().unwrap().lower;
        let last = pdf.bins.last().unwrap().upper;
        assert_eq!(first, -last);
        assert!(last >= 9.2);
        assert_eq!(pdf.bins.iter().map(|b| b.count).sum::<u64>(), 10_000);
        assert!((pdf.total_mass() - 1.0).abs() < 0.01);
        // core bins are 0.1 wide
        let core = pdf.bins.iter().find(|b| b.lower >= -0.05).unwrap();
        assert!((core.width() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn doubling_sample_keeps_densities() {
        let xs = spread(5_000);
        let doubled: Vec<f64> = xs.iter().chain(xs.iter()).copied().collect();
        let a = estimate_pdf(&xs, &Binning::default()).unwrap();
        let b = estimate_pdf(&doubled, &Binning::default()).unwrap();
        assert_eq!(a.bins.len(), b.bins.len());
        for (x, y) in a.bins.iter().zip(&b.bins) {
            assert_eq!(x.density, y.density);
            assert_eq!(2 * x.count, y.count);
        }
    }

    #[test]
    fn uniform_binning_range_checks() {
        let xs = spread(1_000);
        let b = Binning::Uniform {
            bins: 10,
            range: Some((-1.0, 1.0)),
        };
        assert!(estimate_pdf(&xs, &b).is_err());
        let auto = Binning::Uniform {
            bins: 10,
            range: None,
        };
        let pdf = estimate_pdf(&xs, &auto).unwrap();
        assert_eq!(pdf.bins.len(), 10);
        assert_eq!(pdf.bins.iter().map(|b| b.count).sum::<u64>(), 1_000);
    }

    #[test]
    fn ccdf_counts() {
        let pts = ccdf(&[1.0, 2.0, 3.0], Sign::Positive).unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[0], (1.0, 1.0));
        assert!((pts[1].1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((pts[2].1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ccdf_requires_signed_values() {
        assert!(ccdf(&[-1.0, -2.0], Sign::Positive).is_err());
        assert!(ccdf(&[0.0, 1.0], Sign::Negative).is_err());
    }

    #[test]
    fn ccdf_symmetric_sample() {
        let xs = [0.5, -0.5, 1.5, -1.5, 2.0, -2.0, 2.0, -2.0];
        assert_eq!(
            ccdf(&xs, Sign::Positive).unwrap(),
            ccdf(&xs, Sign::Negative).unwrap()
        );
    }

    #[test]
    fn ccdf_ties_collapse() {
        let pts = ccdf(&[1.0, 1.0, 2.0, 0.0, -3.0], Sign::Positive).unwrap();
        assert_eq!(pts, vec![(1.0, 1.0), (2.0, 1.0 / 3.0)]);
    }

    #[test]
    fn thinning_keeps_ends() {
        let pts: Vec<(f64, f64)> = (0..1000)
            .map(|i| (i as f64, 1.0 - i as f64 / 1000.0))
            .collect();
        let thin = thin_ccdf(&pts, 50);
        assert!(thin.len() <= 50);
        assert_eq!(thin[0], pts[0]);
        assert_eq!(*thin.last().unwrap(), pts[999]);
    }
}
