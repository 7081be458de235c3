use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::beta::beta_reg;

use crate::{Error, Result};

/// Pivot threshold, relative to the column norm, below which the design is
/// treated as rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Internally studentized residuals beyond this magnitude are flagged.
pub const OUTLIER_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    /// Infinite when the fit is exact; stored as `"inf"`/`"-inf"` in JSON.
    #[serde(with = "nonfinite")]
    pub t_stat: f64,
    pub p_value: f64,
    /// Half-width of the two-sided 95% t interval.
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub model: String,
    /// Intercept first, then one slope per predictor.
    pub coefficients: Vec<Coefficient>,
    pub r_squared: f64,
    pub n: usize,
    pub df: usize,
    /// Observation indices whose studentized residual exceeds
    /// [`OUTLIER_THRESHOLD`] in magnitude.
    pub outliers: Vec<usize>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl RegressionFit {
    pub fn intercept(&self) -> &Coefficient {
        &self.coefficients[0]
    }

    pub fn slopes(&self) -> &[Coefficient] {
        &self.coefficients[1..]
    }

    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }
}

mod nonfinite {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Two-sided Student-t p-value, `I_{df/(df+t²)}(df/2, 1/2)`.
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(0.5 * df, 0.5, df / (df + t * t))
}

/// 97.5% quantile of Student's t with `df` degrees of freedom.
pub fn t_quantile_975(df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("df is positive")
        .inverse_cdf(0.975)
}

/// Least squares of `response` on an intercept plus `predictors`, each a
/// named column of the same length.
pub fn ols(predictors: &[(&str, &[f64])], response: &[f64]) -> Result<RegressionFit> {
    let n = response.len();
    let p = predictors.len() + 1;
    if predictors.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one predictor is required".into(),
        ));
    }
    for (name, col) in predictors {
        if col.len() != n {
            return Err(Error::MismatchedData(format!(
                "predictor {name} has {} values, response has {n}",
                col.len()
            )));
        }
    }
    if n <= p {
        return Err(Error::InsufficientData {
            what: "regression",
            needed: p + 1,
            got: n,
        });
    }
    if let Some(bad) = response
        .iter()
        .chain(predictors.iter().flat_map(|(_, c)| c.iter()))
        .find(|v| !v.is_finite())
    {
        return Err(Error::InvalidParameter(format!(
            "non-finite regression input {bad}"
        )));
    }

    let x = DMatrix::from_fn(
        n,
        p,
        |i, j| if j == 0 { 1.0 } else { predictors[j - 1].1[i] },
    );
    let y = DVector::from_column_slice(response);
    let norms: Vec<f64> = (0..p).map(|j| x.column(j).norm()).collect();
    let qr = x.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    for j in 0..p {
        if r[(j, j)].abs() <= RANK_TOL * norms[j] || norms[j] == 0.0 {
            return Err(Error::CollinearDesign);
        }
    }
    let qty = q.transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::CollinearDesign)?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::CollinearDesign)?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let residuals: Vec<f64> = (&y - &x * &beta).iter().copied().collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let mean = response.iter().sum::<f64>() / n as f64;
    let sst: f64 = response.iter().map(|v| (v - mean) * (v - mean)).sum();
    let r_squared = if sst > 0.0 {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    } else {
        0.0
    };

    let df = n - p;
    let s2 = ssr / df as f64;
    let tq = t_quantile_975(df as f64);
    let names = std::iter::once("intercept").chain(predictors.iter().map(|(name, _)| *name));
    let coefficients = names
        .enumerate()
        .map(|(j, name)| {
            let estimate = beta[j];
            let std_error = (s2 * xtx_inv[(j, j)]).max(0.0).sqrt();
            let t_stat = if std_error > 0.0 {
                estimate / std_error
            } else if estimate == 0.0 {
                0.0
            } else {
                f64::INFINITY.copysign(estimate)
            };
            Coefficient {
                name: name.to_string(),
                estimate,
                std_error,
                t_stat,
                p_value: two_sided_p(t_stat, df as f64),
                half_width: tq * std_error,
            }
        })
        .collect();

    let outliers = if s2 > 0.0 {
        (0..n)
            .filter(|&i| {
                let h: f64 = q.row(i).iter().take(p).map(|v| v * v).sum();
                let denom = (s2 * (1.0 - h)).sqrt();
                denom > 0.0 && (residuals[i] / denom).abs() > OUTLIER_THRESHOLD
            })
            .collect()
    } else {
        Vec::new()
    };

    Ok(RegressionFit {
        model: String::new(),
        coefficients,
        r_squared,
        n,
        df,
        outliers,
        residuals,
    })
}
