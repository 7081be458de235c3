//! Least squares with t-tests, the exponent-on-attribute models built on it
//! and a side-by-side model comparison.

mod models;
mod ols;
mod table;

pub use models::{
    regress_alpha_bivariate, regress_alpha_cap, regress_alpha_traded_value, regress_alpha_turnover,
    reparametrize_check, Reparametrization, LN_CAP, LN_TRADED_VALUE, LN_TURNOVER,
    REPARAMETRIZATION_RTOL,
};
pub use ols::{ols, t_quantile_975, two_sided_p, Coefficient, RegressionFit, OUTLIER_THRESHOLD};
pub use table::{model_comparison, stars, ComparisonCell, ComparisonRow, ComparisonTable};
