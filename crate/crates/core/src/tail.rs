//! Power-law tail exponents by maximum likelihood with a KS-minimizing
//! cutoff.
//!
//! For a cutoff `r_min` with `N` magnitudes at or above it, the exponent of
//! the complementary CDF `P(|r| ≥ x) ∝ x^{-α}` is estimated as
//! `α̂ = N / Σ ln(r_j / r_min)`. The cutoff is the candidate whose fitted
//! law is closest to the empirical tail in Kolmogorov–Smirnov distance.

use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::synth::{self, pareto_quantile};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Positive, Sign::Negative];

    /// Magnitudes of the strictly positive (or strictly negative) values.
    pub fn magnitudes(self, sample: &[f64]) -> Vec<f64> {
        match self {
            Sign::Positive => sample.iter().copied().filter(|&r| r > 0.0).collect(),
            Sign::Negative => sample.iter().filter(|&&r| r < 0.0).map(|r| -r).collect(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Positive => "positive",
            Sign::Negative => "negative",
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Sign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" | "pos" | "+" => Ok(Sign::Positive),
            "negative" | "neg" | "-" => Ok(Sign::Negative),
            _ => Err(Error::InvalidParameter(format!("unknown sign `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailOptions {
    /// Smallest tail a candidate cutoff may leave.
    pub min_tail: usize,
    /// Cap on scanned cutoffs; more are thinned evenly by rank.
    pub max_candidates: usize,
    /// Use `r_min − 0.5` as the reference point (discrete-data correction).
    pub discrete_shift: bool,
    /// Number of semi-parametric bootstrap draws for a goodness-of-fit
    /// p-value; none by default.
    pub gof_bootstrap: Option<usize>,
    pub seed: u64,
}

impl Default for TailOptions {
    fn default() -> Self {
        Self {
            min_tail: 50,
            max_candidates: 1000,
            discrete_shift: false,
            gof_bootstrap: None,
            seed: 0,
        }
    }
}

/// Exponents above this are flagged as thin-tailed.
pub const THIN_TAIL_ALPHA: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub sign: Sign,
    pub r_min: f64,
    pub alpha: f64,
    pub n_tail: usize,
    pub ks: f64,
    /// Asymptotic standard error `α/√N`.
    pub stderr: f64,
    pub thin_tail_warning: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gof_p_value: Option<f64>,
}

impl TailFit {
    /// Semicolon-separated flag list for the tail CSV.
    pub fn flags(&self) -> String {
        let mut flags = Vec::new();
        if self.thin_tail_warning {
            flags.push("thin_tail_warning".to_string());
        }
        if let Some(p) = self.gof_p_value {
            flags.push(format!("gof_p={p}"));
        }
        flags.join(";")
    }
}

fn reference_point(r_min: f64, discrete_shift: bool) -> Result<f64> {
    if !(r_min.is_finite() && r_min > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "r_min {r_min} must be positive"
        )));
    }
    let r_eff = if discrete_shift { r_min - 0.5 } else { r_min };
    if r_eff <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "shifted reference point {r_eff} is not positive"
        )));
    }
    Ok(r_eff)
}

fn check_tail(tail: &[f64], r_min: f64) -> Result<()> {
    if let Some(&bad) = tail.iter().find(|&&r| !r.is_finite() || r < r_min) {
        return Err(Error::InvalidParameter(format!(
            "tail value {bad} lies below r_min {r_min}"
        )));
    }
    Ok(())
}

/// Maximum-likelihood exponent `N / Σ ln(r_j / r_eff)`.
pub fn mle_alpha(tail: &[f64], r_min: f64, discrete_shift: bool) -> Result<f64> {
    let r_eff = reference_point(r_min, discrete_shift)?;
    if tail.len() < 2 {
        return Err(Error::InsufficientData {
            what: "tail exponent",
            needed: 2,
            got: tail.len(),
        });
    }
    check_tail(tail, r_min)?;
    let log_sum: f64 = tail.iter().map(|r| (r / r_eff).ln()).sum();
    if log_sum <= 0.0 {
        return Err(Error::Degenerate(
            "degenerate tail: all values equal r_min".into(),
        ));
    }
    Ok(tail.len() as f64 / log_sum)
}

/// KS distance between the empirical CDF of `tail` and the power law
/// `P(r) = 1 − (r/r_min)^{-α}`, checked on both sides of every jump.
pub fn ks_statistic(tail: &[f64], r_min: f64, alpha: f64) -> Result<f64> {
    reference_point(r_min, false)?;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha {alpha} must be positive"
        )));
    }
    if tail.is_empty() {
        return Err(Error::InsufficientData {
            what: "KS statistic",
            needed: 1,
            got: 0,
        });
    }
    check_tail(tail, r_min)?;
    let mut xs = tail.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let p = 1.0 - (x / r_min).powf(-alpha);
        let above = ((i + 1) as f64 / n - p).abs();
        let below = (i as f64 / n - p).abs();
        d.max(above).max(below)
    });
    Ok(d)
}

/// Sorted magnitudes with cached logarithms and prefix sums for O(1)
/// exponent estimates per candidate cutoff.
struct TailScan {
    /// Descending.
    desc: Vec<f64>,
    ln_desc: Vec<f64>,
    /// `prefix[k] = Σ_{j<k} ln desc[j]`.
    prefix: Vec<f64>,
}

impl TailScan {
    fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        let ln_desc: Vec<f64> = values.iter().map(|x| x.ln()).collect();
        let mut prefix = Vec::with_capacity(values.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for l in &ln_desc {
            acc += l;
            prefix.push(acc);
        }
        Self {
            desc: values,
            ln_desc,
            prefix,
        }
    }

    /// Tail sizes `k` whose cutoff `desc[k-1]` is a distinct value.
    fn candidates(&self, min_tail: usize) -> Vec<usize> {
        let n = self.desc.len();
        (min_tail.max(2)..=n)
            .filter(|&k| k == n || self.desc[k] < self.desc[k - 1])
            .filter(|&k| self.desc[0] > self.desc[k - 1])
            .collect()
    }

    fn alpha(&self, k: usize, ln_ref: f64) -> f64 {
        k as f64 / (self.prefix[k] - k as f64 * ln_ref)
    }

    /// KS distance for the top-`k` tail, or `None` once it exceeds `bound`.
    fn ks(&self, k: usize, alpha: f64, bound: f64) -> Option<f64> {
        let ln_min = self.ln_desc[k - 1];
        let kf = k as f64;
        let mut d = 0.0f64;
        // ascending order: mismatch near the cutoff shows up first
        for j in (0..k).rev() {
            let p = 1.0 - (-alpha * (self.ln_desc[j] - ln_min)).exp();
            let rank = (k - j) as f64;
            d = d
                .max((rank / kf - p).abs())
                .max(((rank - 1.0) / kf - p).abs());
            if d > bound {
                return None;
            }
        }
        Some(d)
    }
}

fn thin(candidates: Vec<usize>, max: usize) -> Vec<usize> {
    if candidates.len() <= max || max < 2 {
        return candidates;
    }
    let last = candidates.len() - 1;
    let mut out: Vec<usize> = (0..max)
        .map(|i| candidates[(i * last + (max - 1) / 2) / (max - 1)])
        .collect();
    out.dedup();
    out
}

fn scan(values: Vec<f64>, sign: Sign, opts: &TailOptions) -> Result<TailFit> {
    let n = values.len();
    let needed = 2 * opts.min_tail;
    if n < needed {
        return Err(Error::InsufficientData {
            what: "tail fit",
            needed,
            got: n,
        });
    }
    let table = TailScan::new(values);
    let candidates = thin(table.candidates(opts.min_tail), opts.max_candidates);

    // (ks, k, alpha); ties go to the larger tail, i.e. the smaller cutoff
    let mut best: Option<(f64, usize, f64)> = None;
    for &k in &candidates {
        let r_min = table.desc[k - 1];
        let r_eff = if opts.discrete_shift {
            r_min - 0.5
        } else {
            r_min
        };
        if r_eff <= 0.0 {
            continue;
        }
        let alpha = table.alpha(k, r_eff.ln());
        if !(alpha.is_finite() && alpha > 0.0) {
            continue;
        }
        let bound = best.map_or(f64::INFINITY, |b| b.0);
        let Some(d) = table.ks(k, alpha, bound) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((bd, bk, _)) => d < bd || (d == bd && k > bk),
        };
        if better {
            best = Some((d, k, alpha));
        }
    }

    let (ks, k, alpha) = best.ok_or_else(|| {
        Error::Degenerate(format!(
            "no usable {sign} cutoff among {} values",
            table.desc.len()
        ))
    })?;
    Ok(TailFit {
        sign,
        r_min: table.desc[k - 1],
        alpha,
        n_tail: k,
        ks,
        stderr: alpha / (k as f64).sqrt(),
        thin_tail_warning: alpha > THIN_TAIL_ALPHA,
        gof_p_value: None,
    })
}

/// Fits the power-law tail of one sign of `sample`.
///
/// Every distinct magnitude leaving at least `min_tail` points at or above
/// it is a candidate cutoff (thinned to `max_candidates`). The fit with the
/// smallest KS distance wins; ties go to the larger tail.
pub fn fit_tail(sample: &[f64], sign: Sign, opts: &TailOptions) -> Result<TailFit> {
    let values = sign.magnitudes(sample);
    let body: Vec<f64> = match opts.gof_bootstrap {
        Some(_) => values.clone(),
        None => Vec::new(),
    };
    let mut fit = scan(values, sign, opts)?;
    if let Some(draws) = opts.gof_bootstrap {
        fit.gof_p_value = Some(gof_p_value(&fit, &body, draws, opts)?);
    }
    Ok(fit)
}

/// Semi-parametric bootstrap p-value: the share of synthetic samples (body
/// resampled below the cutoff, tail drawn from the fitted law) whose own
/// best fit is at least as far from its data as the observed fit.
fn gof_p_value(fit: &TailFit, magnitudes: &[f64], draws: usize, opts: &TailOptions) -> Result<f64> {
    if draws == 0 {
        return Err(Error::InvalidParameter(
            "bootstrap needs at least one draw".into(),
        ));
    }
    let body: Vec<f64> = magnitudes
        .iter()
        .copied()
        .filter(|&x| x < fit.r_min)
        .collect();
    let n = magnitudes.len();
    let tail_share = fit.n_tail as f64 / n as f64;
    let inner = TailOptions {
        gof_bootstrap: None,
        ..opts.clone()
    };
    let mut rng = synth::seeded_rng(opts.seed);
    let mut exceed = 0usize;
    for _ in 0..draws {
        let synthetic: Vec<f64> = (0..n)
            .map(|_| {
                let u = synth::unit_f64(&mut rng);
                if u < tail_share || body.is_empty() {
                    pareto_quantile(synth::unit_f64(&mut rng), fit.alpha, fit.r_min)
                } else {
                    body[(rng.next_u64() % body.len() as u64) as usize]
                }
            })
            .collect();
        match scan(synthetic, fit.sign, &inner) {
            Ok(f) if f.ks >= fit.ks => exceed += 1,
            Ok(_) => {}
            // an unusable synthetic sample fits no better than the data
            Err(_) => exceed += 1,
        }
    }
    Ok(exceed as f64 / draws as f64)
}
