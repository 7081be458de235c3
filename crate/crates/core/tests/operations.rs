use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng as _;

use tailex::cohort::{partition_stocks, Attribute, GroupStat};
use tailex::empirical::{estimate_pdf, Binning};
use tailex::pipeline::{analyze, emit_plot_data, PipelineConfig};
use tailex::qgaussian::{fit_qgaussian, QGaussianOptions};
use tailex::regression::{
    ols, regress_alpha_bivariate, regress_alpha_cap, regress_alpha_traded_value,
    regress_alpha_turnover,
};
use tailex::synth::{
    gen_normal, gen_pareto, gen_student_t, gen_synthetic_market, seeded_rng, unit_f64,
    SyntheticMarketConfig,
};
use tailex::tail::{fit_tail, ks_statistic, mle_alpha, Sign, TailOptions};
use tailex::StockProfile;

fn normal(rng: &mut tailex::synth::SynthRng) -> f64 {
    // Box-Muller
    let (u, v) = (1.0 - unit_f64(rng), unit_f64(rng));
    (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
}

#[test]
fn uniform_sample_has_flat_density() {
    let mut rng = seeded_rng(135);
    let x: Vec<f64> = (0..1_000_000).map(|_| unit_f64(&mut rng)).collect();
    let pdf = estimate_pdf(
        &x,
        &Binning::Uniform {
            bins: 50,
            range: Some((0.0, 1.0)),
        },
    )
    .unwrap();
    assert_eq!(pdf.bins.len(), 50);
    for b in &pdf.bins {
        assert!((b.density - 1.0).abs() <= 0.05, "{b:?}");
    }
}

#[test]
fn gaussian_sample_reads_as_near_gaussian() {
    let x = gen_normal(1_000_000, 194);
    let pdf = estimate_pdf(&x, &Binning::default()).unwrap();
    let fit = fit_qgaussian(&pdf, &QGaussianOptions::default()).unwrap();
    assert!(fit.alpha > 20.0, "{}", fit.alpha);
    assert!(fit.near_gaussian());
}

#[test]
fn pareto_mle_within_three_standard_errors() {
    let x = gen_pareto(3.0, 2.0, 100_000, 236).unwrap();
    let alpha = mle_alpha(&x, 2.0, false).unwrap();
    assert!((2.97..=3.03).contains(&alpha), "{alpha}");
}

#[test]
fn ks_on_quantile_placed_sample() {
    let (alpha, r_min, n) = (3.0, 1.0, 1000);
    let x: Vec<f64> = (1..=n)
        .map(|i| r_min * (1.0 - (i as f64 - 0.5) / n as f64).powf(-1.0 / alpha))
        .collect();
    let d = ks_statistic(&x, r_min, alpha).unwrap();
    assert!(d <= 0.5 / n as f64 + 1e-12, "{d}");
    assert!(ks_statistic(&x, r_min, 0.5).unwrap() > 0.2);
}

const PURE_N: usize = 20_000;

fn pure_pareto_fit() -> tailex::TailFit {
    let x = gen_pareto(2.5, 1.5, PURE_N, 253).unwrap();
    fit_tail(&x, Sign::Positive, &TailOptions::default()).unwrap()
}

#[test]
fn pure_pareto_scan_exponent() {
    let fit = pure_pareto_fit();
    assert!(
        (fit.alpha - 2.5).abs() <= 3.0 * 2.5 / (PURE_N as f64).sqrt(),
        "{}",
        fit.alpha
    );
}

#[test]
fn pure_pareto_scan_cutoff() {
    let fit = pure_pareto_fit();
    assert!(
        fit.r_min <= 1.2 * 1.5,
        "r_min {} above 1.2 x 1.5",
        fit.r_min
    );
}

#[test]
fn gaussian_tail_is_flagged_thin() {
    let x = gen_normal(10_000, 254);
    let fit = fit_tail(&x, Sign::Positive, &TailOptions::default()).unwrap();
    assert!(fit.alpha > 4.0, "{}", fit.alpha);
    assert!(fit.thin_tail_warning);
    assert!(fit.n_tail < 2_500);
}

#[test]
fn noisy_log_line_slope_within_half_width() {
    let mut rng = seeded_rng(347);
    let x: Vec<f64> = (0..400).map(|_| 1.0 + 99.0 * unit_f64(&mut rng)).collect();
    let ln_x: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = ln_x
        .iter()
        .map(|l| 1.0 + 0.2 * l + 0.05 * normal(&mut rng))
        .collect();
    let fit = ols(&[("ln_x", &ln_x)], &y).unwrap();
    let b = &fit.slopes()[0];
    assert!((b.estimate - 0.2).abs() <= b.half_width, "{b:?}");
}

fn planted_groups(slope: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = seeded_rng(seed);
    (0..20)
        .map(|k| {
            let x = (-11.0 + 4.0 * k as f64 / 19.0).exp();
            (x, 3.0 + slope * x.ln() + 0.05 * normal(&mut rng))
        })
        .collect()
}

#[test]
fn grouped_slopes_recovered() {
    let fit = regress_alpha_turnover(&planted_groups(-0.20, 353)).unwrap();
    let b = &fit.slopes()[0];
    assert!((b.estimate + 0.20).abs() <= b.half_width, "{b:?}");

    let caps: Vec<(f64, f64)> = planted_groups(0.15, 361)
        .iter()
        .map(|&(x, a)| (x * 1e14, a))
        .collect();
    let fit = regress_alpha_cap(&caps).unwrap();
    let b = &fit.slopes()[0];
    assert!((b.estimate - 0.15).abs() <= b.half_width, "{b:?}");
}

#[test]
fn shuffled_exponents_are_not_significant() {
    let mut quiet = 0;
    for trial in 0..100 {
        let mut rng = seeded_rng(362_000 + trial);
        let caps: Vec<f64> = (0..200)
            .map(|_| (18.0 + 5.0 * unit_f64(&mut rng)).exp())
            .collect();
        // exponents tied to cap, then permuted to break the link
        let mut alphas: Vec<f64> = caps
            .iter()
            .map(|c| -1.0 + 0.2 * c.ln() + 0.3 * normal(&mut rng))
            .collect();
        for i in (1..alphas.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            alphas.swap(i, j);
        }
        let pts: Vec<(f64, f64)> = caps.into_iter().zip(alphas).collect();
        quiet += u32::from(regress_alpha_cap(&pts).unwrap().slopes()[0].p_value > 0.1);
    }
    assert!(quiet >= 80, "{quiet}/100");
}

fn planted_points(b_turnover: f64, b_cap: f64, seed: u64) -> Vec<(f64, f64, f64)> {
    let market = gen_synthetic_market(SyntheticMarketConfig {
        stocks: 400,
        intercept: 3.5 - 20.0 * b_cap + 9.0 * b_turnover,
        b_turnover,
        b_cap,
        seed,
        ..Default::default()
    })
    .unwrap();
    market
        .stocks
        .iter()
        .map(|s| (s.turnover, s.cap, s.alpha))
        .collect()
}

#[test]
fn traded_value_alone_absorbs_the_cap_effect() {
    let pts = planted_points(-0.1, 0.2, 380);
    let bivariate = regress_alpha_bivariate(&pts).unwrap();
    let direct =
        regress_alpha_traded_value(&pts.iter().map(|&(t, c, a)| (t * c, a)).collect::<Vec<_>>())
            .unwrap();
    let (bt, bv) = (&bivariate.slopes()[0], &direct.slopes()[0]);
    assert!(bt.estimate < 0.0 && bv.estimate > 0.0);
    let se = (bt.std_error.powi(2) + bv.std_error.powi(2)).sqrt();
    assert!(
        (bv.estimate - bt.estimate).abs() > 3.0 * se,
        "{} vs {}",
        bv.estimate,
        bt.estimate
    );
}

#[test]
fn traded_value_explains_little_without_a_plant() {
    let pts = planted_points(0.0, 0.0, 386);
    let fit =
        regress_alpha_traded_value(&pts.iter().map(|&(t, c, a)| (t * c, a)).collect::<Vec<_>>())
            .unwrap();
    assert!(fit.r_squared < 0.05, "{}", fit.r_squared);
}

#[test]
fn pareto_log_ratio_mean() {
    let x = gen_pareto(3.0, 0.7, 100_000, 439).unwrap();
    let mean = x.iter().map(|r| (r / 0.7).ln()).sum::<f64>() / x.len() as f64;
    assert!((mean - 1.0 / 3.0).abs() <= 0.005, "{mean}");
}

#[test]
fn student_t_moments_and_tail() {
    let x = gen_student_t(1e4, 1_000_000, 446).unwrap();
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    let excess = m4 / (m2 * m2) - 3.0;
    assert!(excess.abs() < 0.05, "{excess}");

    // closed-form df = 3 CDF
    let cdf3 =
        |t: f64| 0.5 + (t / (3f64.sqrt() * (1.0 + t * t / 3.0)) + (t / 3f64.sqrt()).atan()) / PI;
    let want = 2.0 * (1.0 - cdf3(10.0));
    let x = gen_student_t(3.0, 1_000_000, 447).unwrap();
    let got = x.iter().filter(|v| v.abs() > 10.0).count() as f64 / x.len() as f64;
    assert!(got > want / 2.0 && got < want * 2.0, "{got} vs {want}");
}

#[test]
fn hundred_stocks_in_twenty_groups() {
    let profiles: Vec<StockProfile> = (0..100)
        .map(|i| StockProfile {
            stock_id: format!("S{i:03}"),
            cap: 1e8 * (1.0 + i as f64),
            mean_value: 1e4,
            turnover: 1e-4 / (1.0 + i as f64),
            tradable_shares: 1e7,
        })
        .collect();
    for attr in Attribute::ALL {
        let p = partition_stocks(&profiles, attr, 20, GroupStat::Median).unwrap();
        assert!(p.groups.iter().all(|g| g.size == 5 && g.members.len() == 5));
    }
}

#[test]
fn plot_files_and_fitted_lines() {
    let market = gen_synthetic_market(SyntheticMarketConfig {
        stocks: 40,
        returns_per_stock: 2_000,
        seed: 503,
        ..Default::default()
    })
    .unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.tail.min_tail = 30;
    let report = analyze(&market, &market.shares(), &market.calendar, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_plot_data(&report, dir.path()).unwrap();
    let names: Vec<String> = files
        .iter()
        .map(|f| f.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    for attr in Attribute::ALL {
        let pdfs = names
            .iter()
            .filter(|n| n.starts_with(&format!("pdf_{attr}_g")))
            .count();
        assert_eq!(pdfs, 20, "{attr}");
        assert_eq!(
            names
                .iter()
                .filter(|n| **n == format!("scatter_{attr}.csv"))
                .count(),
            1
        );

        let mut reader =
            csv::Reader::from_path(dir.path().join(format!("scatter_{attr}.csv"))).unwrap();
        let mut lines = BTreeMap::<String, usize>::new();
        for row in reader.records() {
            let row = row.unwrap();
            if &row[0] != "line" {
                continue;
            }
            let fit = report
                .regression(&format!("{attr}-grouped-{}", &row[1]))
                .unwrap();
            let (a, b) = (fit.intercept().estimate, fit.slopes()[0].estimate);
            let x: f64 = row[3].parse().unwrap();
            let y: f64 = row[4].parse().unwrap();
            assert_eq!(y, a + b * x);
            *lines.entry(row[1].to_string()).or_default() += 1;
        }
        assert_eq!(lines.len(), 3);
        assert!(lines.values().all(|&k| k == 2));
    }

    let mut empty = report;
    empty.cohorts.clear();
    empty.stock_tails.clear();
    let out = dir.path().join("none");
    assert!(emit_plot_data(&empty, &out).is_err());
    assert!(!out.exists());
}
