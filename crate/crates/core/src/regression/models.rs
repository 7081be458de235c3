use serde::{Deserialize, Serialize};

use super::ols::{ols, RegressionFit};
use crate::{Error, Result};

pub const LN_TURNOVER: &str = "ln_turnover";
pub const LN_CAP: &str = "ln_cap";
pub const LN_TRADED_VALUE: &str = "ln_traded_value";

fn ln_column(name: &str, xs: impl Iterator<Item = f64>) -> Result<Vec<f64>> {
    xs.map(|x| {
        if x > 0.0 && x.is_finite() {
            Ok(x.ln())
        } else {
            Err(Error::InvalidParameter(format!(
                "{name} needs positive values, got {x}"
            )))
        }
    })
    .collect()
}

fn univariate(name: &str, points: &[(f64, f64)]) -> Result<RegressionFit> {
    let x = ln_column(name, points.iter().map(|p| p.0))?;
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    Ok(ols(&[(name, &x)], &y)?.with_model(name.trim_start_matches("ln_")))
}

/// `α = A + B ln(turnover)` over `(turnover, α)` pairs.
pub fn regress_alpha_turnover(points: &[(f64, f64)]) -> Result<RegressionFit> {
    univariate(LN_TURNOVER, points)
}

/// `α = A + B ln(cap)` over `(cap, α)` pairs.
pub fn regress_alpha_cap(points: &[(f64, f64)]) -> Result<RegressionFit> {
    univariate(LN_CAP, points)
}

/// `α = A + B ln(traded value)` over `(traded value, α)` pairs.
pub fn regress_alpha_traded_value(points: &[(f64, f64)]) -> Result<RegressionFit> {
    univariate(LN_TRADED_VALUE, points)
}

/// `α = A + B_t ln(turnover) + B_c ln(cap)` over `(turnover, cap, α)`.
pub fn regress_alpha_bivariate(points: &[(f64, f64, f64)]) -> Result<RegressionFit> {
    let t = ln_column(LN_TURNOVER, points.iter().map(|p| p.0))?;
    let c = ln_column(LN_CAP, points.iter().map(|p| p.1))?;
    let y: Vec<f64> = points.iter().map(|p| p.2).collect();
    Ok(ols(&[(LN_TURNOVER, &t), (LN_CAP, &c)], &y)?.with_model("bivariate"))
}

/// The bivariate model rewritten on `ln(traded value) = ln(turnover) + ln(cap)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reparametrization {
    /// `(A, B_t, B_c − B_t)` derived from the bivariate fit.
    pub derived: [f64; 3],
    /// Direct fit of `α` on `[ln(traded value), ln(cap)]`.
    pub direct: RegressionFit,
    pub max_abs_diff: f64,
    pub tolerance: f64,
}

/// Relative agreement demanded between derived and direct coefficients.
pub const REPARAMETRIZATION_RTOL: f64 = 1e-9;

/// Derives the traded-value/cap coefficients from `bivariate` and checks
/// them against a direct fit on the same points. The two must agree up to
/// rounding because the designs span the same column space.
pub fn reparametrize_check(
    bivariate: &RegressionFit,
    points: &[(f64, f64, f64)],
) -> Result<Reparametrization> {
    let coef = |name: &str| {
        bivariate
            .coefficient(name)
            .map(|c| c.estimate)
            .ok_or_else(|| Error::InvalidParameter(format!("fit has no {name} coefficient")))
    };
    let (a, bt, bc) = (
        bivariate.intercept().estimate,
        coef(LN_TURNOVER)?,
        coef(LN_CAP)?,
    );
    if bivariate.n != points.len() {
        return Err(Error::MismatchedData(format!(
            "fit has N = {}, {} points supplied",
            bivariate.n,
            points.len()
        )));
    }
    let t = ln_column(LN_TURNOVER, points.iter().map(|p| p.0))?;
    let c = ln_column(LN_CAP, points.iter().map(|p| p.1))?;
    let v: Vec<f64> = t.iter().zip(&c).map(|(t, c)| t + c).collect();
    let y: Vec<f64> = points.iter().map(|p| p.2).collect();
    let direct = ols(&[(LN_TRADED_VALUE, &v), (LN_CAP, &c)], &y)?.with_model("reparametrized");

    let derived = [a, bt, bc - bt];
    let scale = derived
        .iter()
        .chain(direct.coefficients.iter().map(|c| &c.estimate))
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let tolerance = REPARAMETRIZATION_RTOL * scale.max(f64::MIN_POSITIVE);
    let max_abs_diff = derived
        .iter()
        .zip(&direct.coefficients)
        .map(|(d, c)| (d - c.estimate).abs())
        .fold(0.0, f64::max);
    if max_abs_diff.is_nan() || max_abs_diff > tolerance {
        return Err(Error::Consistency(format!(
            "reparametrized coefficients differ by {max_abs_diff:e} (tolerance {tolerance:e})"
        )));
    }
    Ok(Reparametrization {
        derived,
        direct,
        max_abs_diff,
        tolerance,
    })
}
