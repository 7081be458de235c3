//! Student-t (q-Gaussian) density with `α` degrees of freedom and scale
//! parameter `L`:
//!
//! `f(r) = √(L/α) / B(1/2, α/2) · (1 + L r²/α)^{-(α+1)/2}`
//!
//! The density tail decays as `|r|^{-(α+1)}`, so `α` doubles as the CCDF
//! tail exponent.

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::empirical::EmpiricalPdf;
use crate::simplex::{self, SimplexOptions};
use crate::{Error, Result};

/// Bins with fewer counts than this are left out of the fit.
pub const MIN_BIN_COUNT: u64 = 5;
/// Minimum number of usable bins.
pub const MIN_FIT_BINS: usize = 10;
/// Above this the density is indistinguishable from a Gaussian.
pub const ALPHA_MAX: f64 = 200.0;
/// Fits beyond this many degrees of freedom are flagged near-Gaussian.
pub const NEAR_GAUSSIAN_ALPHA: f64 = 20.0;

const START_ALPHAS: [f64; 6] = [1.0, 2.0, 3.0, 5.0, 10.0, 30.0];
const START_SCALES: [f64; 3] = [0.5, 1.0, 2.0];

fn check_params(alpha: f64, scale: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0 && scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "q-Gaussian needs alpha > 0 and L > 0, got alpha={alpha} L={scale}"
        )));
    }
    Ok(())
}

fn ln_pdf_unchecked(r: f64, alpha: f64, scale: f64) -> f64 {
    0.5 * (scale / alpha).ln()
        - ln_beta(0.5, 0.5 * alpha)
        - 0.5 * (alpha + 1.0) * (scale * r * r / alpha).ln_1p()
}

pub fn qgaussian_ln_pdf(r: f64, alpha: f64, scale: f64) -> Result<f64> {
    check_params(alpha, scale)?;
    Ok(ln_pdf_unchecked(r, alpha, scale))
}

pub fn qgaussian_pdf(r: f64, alpha: f64, scale: f64) -> Result<f64> {
    qgaussian_ln_pdf(r, alpha, scale).map(f64::exp)
}

/// Variance `α / (L (α − 2))`, defined for `α > 2`.
pub fn qgaussian_variance(alpha: f64, scale: f64) -> Option<f64> {
    (alpha > 2.0 && scale > 0.0).then(|| alpha / (scale * (alpha - 2.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QGaussianFit {
    pub alpha: f64,
    #[serde(rename = "L")]
    pub scale: f64,
    pub objective: f64,
    pub converged: bool,
    pub n_bins_used: usize,
}

impl QGaussianFit {
    /// True when `α` is too large to be told apart from a Gaussian.
    pub fn near_gaussian(&self) -> bool {
        self.alpha > NEAR_GAUSSIAN_ALPHA
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QGaussianOptions {
    /// Pin `L = α/(α−2)` so the fitted law has unit variance.
    pub unit_variance: bool,
}

struct FitBin {
    r: f64,
    ln_density: f64,
    weight: f64,
}

fn objective(bins: &[FitBin], alpha: f64, scale: f64) -> f64 {
    if !(alpha > 0.0 && alpha <= ALPHA_MAX && scale > 0.0 && scale.is_finite()) {
        return f64::INFINITY;
    }
    let norm = 0.5 * (scale / alpha).ln() - ln_beta(0.5, 0.5 * alpha);
    let power = 0.5 * (alpha + 1.0);
    bins.iter()
        .map(|b| {
            let model = norm - power * (scale * b.r * b.r / alpha).ln_1p();
            b.weight * (b.ln_density - model).powi(2)
        })
        .sum()
}

/// Least-squares fit of the q-Gaussian to a binned density in log space.
///
/// Minimizes `Σ count_b (ln density_b − ln f(center_b))²` over the bins with
/// at least [`MIN_BIN_COUNT`] counts, running a Nelder–Mead search in
/// `(ln α, ln L)` from each point of a fixed start grid and keeping the
/// lowest objective.
pub fn fit_qgaussian(pdf: &EmpiricalPdf, opts: &QGaussianOptions) -> Result<QGaussianFit> {
    let bins: Vec<FitBin> = pdf
        .bins
        .iter()
        .filter(|b| b.count >= MIN_BIN_COUNT && b.density > 0.0)
        .map(|b| FitBin {
            r: b.center,
            ln_density: b.density.ln(),
            weight: b.count as f64,
        })
        .collect();
    if bins.len() < MIN_FIT_BINS {
        return Err(Error::InsufficientData {
            what: "q-Gaussian fit bins",
            needed: MIN_FIT_BINS,
            got: bins.len(),
        });
    }

    let simplex_opts = SimplexOptions::default();
    let mut best: Option<QGaussianFit> = None;
    let mut consider = |alpha: f64, scale: f64, value: f64, converged: bool| {
        let better = best.as_ref().is_none_or(|b| value < b.objective);
        if better && value.is_finite() {
            best = Some(QGaussianFit {
                alpha,
                scale,
                objective: value,
                converged,
                n_bins_used: bins.len(),
            });
        }
    };

    if opts.unit_variance {
        // α = 2 + e^θ keeps the variance finite
        for &a0 in START_ALPHAS.iter().filter(|&&a| a > 2.0) {
            let f = |x: &[f64]| {
                let alpha = 2.0 + x[0].exp();
                objective(&bins, alpha, alpha / (alpha - 2.0))
            };
            let r = simplex::minimize(f, &[(a0 - 2.0).ln()], &simplex_opts);
            let alpha = 2.0 + r.x[0].exp();
            consider(alpha, alpha / (alpha - 2.0), r.value, r.converged);
        }
    } else {
        for &a0 in &START_ALPHAS {
            for &l0 in &START_SCALES {
                let f = |x: &[f64]| objective(&bins, x[0].exp(), x[1].exp());
                let r = simplex::minimize(f, &[a0.ln(), l0.ln()], &simplex_opts);
                consider(r.x[0].exp(), r.x[1].exp(), r.value, r.converged);
            }
        }
    }

    let fit = best.ok_or_else(|| Error::Degenerate("q-Gaussian objective is not finite".into()))?;
    if !fit.converged {
        log::warn!(
            "q-Gaussian fit did not converge; keeping best point alpha={}",
            fit.alpha
        );
    }
    if fit.near_gaussian() {
        log::warn!(
            "q-Gaussian fit alpha={:.1}: near-Gaussian, alpha unstable",
            fit.alpha
        );
    }
    Ok(fit)
}
