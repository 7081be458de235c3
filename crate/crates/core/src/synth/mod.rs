//! Seeded generators used as ground truth for the estimators.
//!
//! All randomness comes from xoshiro256** seeded through SplitMix64, and
//! uniforms are formed from the top 53 bits of each output, so a given
//! `(parameters, seed)` pair always yields the same sample.

mod market;

pub use market::{
    gen_synthetic_market, write_synthetic_market, NoiseKind, StockTruth, SyntheticMarket,
    SyntheticMarketConfig,
};

use rand::{Rng, SeedableRng};
use rand_distr::{ChiSquared, Distribution, StandardNormal, StudentT};
use rand_xoshiro::Xoshiro256StarStar;

use crate::{Error, Result};

pub type SynthRng = Xoshiro256StarStar;

pub fn seeded_rng(seed: u64) -> SynthRng {
    Xoshiro256StarStar::seed_from_u64(seed)
}

/// SplitMix64 output function.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent sub-seed for item `index` of a run seeded with `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// Uniform on `[0, 1)` with 53 random bits.
pub fn unit_f64<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Inverse CDF of the Pareto law `P(X > x) = (x / r_min)^{-α}`.
pub fn pareto_quantile(u: f64, alpha: f64, r_min: f64) -> f64 {
    r_min * libm::pow(1.0 - u, -1.0 / alpha)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

/// `n` Pareto variates by inverse transform.
pub fn gen_pareto(alpha: f64, r_min: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    check_positive("alpha", alpha)?;
    check_positive("r_min", r_min)?;
    if n == 0 {
        return Err(Error::InvalidParameter(
            "sample size must be at least 1".into(),
        ));
    }
    let mut rng = seeded_rng(seed);
    Ok((0..n)
        .map(|_| pareto_quantile(unit_f64(&mut rng), alpha, r_min))
        .collect())
}

/// `n` Student-t variates with `df` degrees of freedom, as a standard
/// normal over `√(χ²_df / df)`. Not rescaled.
pub fn gen_student_t(df: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    check_positive("df", df)?;
    let chi = ChiSquared::new(df).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = seeded_rng(seed);
    Ok((0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let c: f64 = chi.sample(&mut rng);
            z / (c / df).sqrt()
        })
        .collect())
}

pub fn gen_normal(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded_rng(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Shape of the body of a [`Splice`] on `(0, cutoff)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum Body {
    #[default]
    Uniform,
    /// `|scale·T|` with `T` Student-t on `alpha` degrees of freedom,
    /// truncated at the cutoff.
    StudentT { scale: f64 },
}

/// Positive magnitudes whose body on `(0, cutoff)` holds `body_fraction`
/// of the mass, followed by an exact Pareto(`alpha`, `cutoff`) tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splice {
    pub body_fraction: f64,
    pub cutoff: f64,
    pub alpha: f64,
    pub body: Body,
}

impl Splice {
    /// Student-t body of scale `cutoff / tail_start`, with the tail mass
    /// chosen so the density is continuous at the cutoff:
    /// `τ/(1−τ) = 2 q f(q) / (α (2F(q) − 1))` for `q = tail_start`.
    pub fn student_t(tail_start: f64, cutoff: f64, alpha: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        check_positive("cutoff", cutoff)?;
        check_positive("tail start", tail_start)?;
        let t = statrs::distribution::StudentsT::new(0.0, 1.0, alpha)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let q = tail_start;
        let odds = 2.0 * q * statrs::distribution::Continuous::pdf(&t, q)
            / (alpha * (2.0 * statrs::distribution::ContinuousCDF::cdf(&t, q) - 1.0));
        Ok(Self {
            body_fraction: 1.0 / (1.0 + odds),
            cutoff,
            alpha,
            body: Body::StudentT { scale: cutoff / q },
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("alpha", self.alpha)?;
        check_positive("cutoff", self.cutoff)?;
        if let Body::StudentT { scale } = self.body {
            check_positive("body scale", scale)?;
        }
        if !(0.0..1.0).contains(&self.body_fraction) {
            return Err(Error::InvalidParameter(format!(
                "body fraction {} must lie in [0, 1)",
                self.body_fraction
            )));
        }
        Ok(())
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = unit_f64(rng);
        if u < self.body_fraction {
            match self.body {
                Body::Uniform => {
                    // reuse the same uniform, rescaled, for the body position
                    let v = u / self.body_fraction;
                    self.cutoff * (1.0 - v)
                }
                Body::StudentT { scale } => {
                    let t = StudentT::new(self.alpha).expect("alpha validated");
                    loop {
                        let m = (scale * t.sample(rng)).abs();
                        if m < self.cutoff {
                            break m;
                        }
                    }
                }
            }
        } else {
            pareto_quantile(unit_f64(rng), self.alpha, self.cutoff)
        }
    }

    /// Same law with a random sign.
    pub fn draw_symmetric<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let m = self.draw(rng);
        if rng.next_u64() >> 63 == 1 {
            m
        } else {
            -m
        }
    }
}

pub fn gen_spliced(splice: Splice, n: usize, seed: u64) -> Result<Vec<f64>> {
    splice.validate()?;
    let mut rng = seeded_rng(seed);
    Ok((0..n).map(|_| splice.draw(&mut rng)).collect())
}
