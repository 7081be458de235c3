use proptest::prelude::*;

use tailex::pipeline::{analyze, PipelineConfig};
use tailex::regression::ols;
use tailex::synth::{
    gen_pareto, gen_synthetic_market, seeded_rng, unit_f64, SyntheticMarketConfig,
};
use tailex::{build_minute_bars, compute_intraday_returns, compute_profile};

fn design(n: usize, k: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = seeded_rng(seed);
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..n).map(|_| 4.0 * unit_f64(&mut rng) - 2.0).collect())
        .collect();
    let y = (0..n)
        .map(|i| 0.5 + cols.iter().map(|c| c[i]).sum::<f64>() + 2.0 * unit_f64(&mut rng))
        .collect();
    (cols, y)
}

fn named(cols: &[Vec<f64>]) -> Vec<(&str, &[f64])> {
    cols.iter().map(|c| ("x", c.as_slice())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn r_squared_is_one_minus_ssr_over_sst(n in 8usize..80, k in 1usize..4, seed in any::<u64>()) {
        let (cols, y) = design(n, k, seed);
        let fit = ols(&named(&cols), &y).unwrap();
        let mean = y.iter().sum::<f64>() / n as f64;
        let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        let ssr: f64 = fit.residuals.iter().map(|e| e * e).sum();
        prop_assert!((fit.r_squared - (1.0 - ssr / sst)).abs() < 1e-10);
    }

    #[test]
    fn extra_predictor_never_lowers_r_squared(n in 10usize..80, seed in any::<u64>()) {
        let (cols, y) = design(n, 3, seed);
        let small = ols(&named(&cols[..2]), &y).unwrap();
        let big = ols(&named(&cols), &y).unwrap();
        prop_assert!(big.r_squared >= small.r_squared - 1e-12);
    }

    #[test]
    fn slope_inference_is_invariant_to_rescaling(n in 8usize..60, a in 0.01f64..100.0, b in -10.0f64..10.0, seed in any::<u64>()) {
        let (cols, y) = design(n, 1, seed);
        let base = ols(&named(&cols), &y).unwrap();
        let scaled = vec![cols[0].iter().map(|x| a * x + b).collect::<Vec<f64>>()];
        let fit = ols(&named(&scaled), &y).unwrap();
        let (p, q) = (base.coefficients[1].p_value, fit.coefficients[1].p_value);
        prop_assert!((p - q).abs() <= 1e-8 * p.max(1e-12) + 1e-14, "{} vs {}", p, q);
        prop_assert!((fit.coefficients[1].estimate * a - base.coefficients[1].estimate).abs() < 1e-9 * (1.0 + base.coefficients[1].estimate.abs()));
    }

    #[test]
    fn pareto_survival(alpha in 1.0f64..5.0, seed in any::<u64>()) {
        let n = 40_000;
        let x = gen_pareto(alpha, 2.0, n, seed).unwrap();
        prop_assert!(x.iter().all(|&v| v >= 2.0));
        for k in [1.5f64, 3.0] {
            let want = k.powf(-alpha);
            let got = x.iter().filter(|&&v| v > 2.0 * k).count() as f64 / n as f64;
            let sd = (want * (1.0 - want) / n as f64).sqrt();
            prop_assert!((got - want).abs() < 5.0 * sd + 1e-4, "k={}: {} vs {}", k, got, want);
        }
    }
}

#[test]
fn synthetic_market_round_trips_through_bars() {
    let market = gen_synthetic_market(SyntheticMarketConfig {
        stocks: 12,
        returns_per_stock: 3_000,
        seed: 11,
        ..Default::default()
    })
    .unwrap();
    for (i, truth) in market.stocks.iter().enumerate() {
        let ticks = market.ticks(i).unwrap();
        let bars = build_minute_bars(&ticks, &market.calendar).unwrap();
        let returns = compute_intraday_returns(&bars, false).unwrap();
        let per_day = market.calendar.minutes_per_day() - 1;
        assert_eq!(returns.len(), market.days.len() * per_day);
        assert!(returns.len() >= 3_000 && returns.len() < 3_000 + per_day);
        let p = compute_profile(&bars, Some(truth.tradable_shares)).unwrap();
        assert!(
            (p.turnover / truth.turnover - 1.0).abs() < 0.01,
            "{} {}",
            p.turnover,
            truth.turnover
        );
        assert!(
            (p.cap / truth.cap - 1.0).abs() < 0.01,
            "{} {}",
            p.cap,
            truth.cap
        );
        assert!((p.mean_value / truth.mean_value - 1.0).abs() < 0.01);
    }
}

#[test]
fn analysis_is_deterministic() {
    let cfg = SyntheticMarketConfig {
        stocks: 30,
        returns_per_stock: 2_000,
        seed: 3,
        ..Default::default()
    };
    let pcfg = PipelineConfig {
        groups: 3,
        ..Default::default()
    };
    pcfg.validate().unwrap();
    let run = || {
        let m = gen_synthetic_market(cfg.clone()).unwrap();
        let r = analyze(&m, &m.shares(), &m.calendar, &pcfg).unwrap();
        serde_json::to_string(&r).unwrap()
    };
    assert_eq!(run(), run());
}
