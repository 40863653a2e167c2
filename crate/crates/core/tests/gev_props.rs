use evmix::dist_zoo::sample;
use evmix::gev_fit::{
    block_maxima, extrapolate, fit_dsm_gev, gev_cdf, gev_pdf, gev_quantile, mle_fit, pwm_init,
    MleOptions,
};
use evmix::rng::{open_unit, SeedKey};
use evmix::{DistributionSpec, GevParams, Sample};
use proptest::prelude::*;

fn any_params() -> impl Strategy<Value = GevParams> {
    (-0.9..3.0f64, 0.05..20.0f64, -50.0..50.0f64)
        .prop_map(|(g, a, b)| GevParams::new(g, a, b).unwrap())
}

fn gev_sample(params: &GevParams, n: usize, seed: u64) -> Sample {
    let mut rng = SeedKey::from_seed(seed).rng();
    let v = (0..n)
        .map(|_| gev_quantile(params, open_unit(&mut rng)).unwrap())
        .collect();
    Sample::new(v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn max_stability(p in any_params(), r in 1usize..=64, q in 1e-6..(1.0 - 1e-6f64), shift in -3.0..3.0f64) {
        // Points from the middle of the support and beyond it.
        let x = gev_quantile(&p, q).unwrap() + shift * p.a;
        let lhs = gev_cdf(&p, x).powi(r as i32);
        let rhs = gev_cdf(&extrapolate(&p, 1, r).unwrap(), x);
        prop_assert!((lhs - rhs).abs() <= 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn quantile_roundtrip(p in any_params(), q in 1e-6..(1.0 - 1e-6f64)) {
        let x = gev_quantile(&p, q).unwrap();
        prop_assert!((gev_cdf(&p, x) - q).abs() <= 1e-10);
    }

    #[test]
    fn cdf_is_monotone(p in any_params(), mut xs in prop::collection::vec(-200.0..200.0f64, 2..50)) {
        xs.sort_by(f64::total_cmp);
        let mut last = 0.0;
        for x in xs {
            let v = gev_cdf(&p, x);
            prop_assert!((0.0..=1.0).contains(&v) && v >= last);
            prop_assert!(gev_pdf(&p, x) >= 0.0);
            last = v;
        }
    }

    #[test]
    fn pdf_matches_finite_differences(p in any_params(), q in 0.01..0.99f64) {
        let x = gev_quantile(&p, q).unwrap();
        let d = 1e-6 * p.a;
        let fd = (gev_cdf(&p, x + d) - gev_cdf(&p, x - d)) / (2.0 * d);
        let exact = gev_pdf(&p, x);
        prop_assert!((fd - exact).abs() <= 1e-6 * exact.max(1.0 / p.a), "{fd} vs {exact}");
    }

    #[test]
    fn near_zero_shape_is_continuous(a in 0.05..20.0f64, b in -50.0..50.0f64, t in -5.0..5.0f64) {
        let tiny = GevParams::new(1e-9, a, b).unwrap();
        let zero = GevParams::new(0.0, a, b).unwrap();
        let x = b + t * a;
        prop_assert!((gev_cdf(&tiny, x) - gev_cdf(&zero, x)).abs() <= 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn mle_never_worse_than_init(
        truth in any_params(),
        n in 20usize..150,
        seed in any::<u64>(),
        dg in -0.3..0.3f64,
        da in 0.5..2.0f64,
        db in -1.0..1.0f64,
    ) {
        let data = gev_sample(&truth, n, seed);
        prop_assume!(data.distinct_count() >= 3);
        let pwm = pwm_init(&data).unwrap();
        let perturbed = GevParams::new(pwm.gamma + dg, pwm.a * da, pwm.b + db * pwm.a).unwrap();
        for init in [pwm, perturbed] {
            let fit = mle_fit(&data, init, &MleOptions::default()).unwrap();
            prop_assert!(fit.loglik >= init.loglik(data.values()));
            prop_assert!(fit.loglik.is_finite());
            prop_assert!((fit.params.loglik(data.values()) - fit.loglik).abs() <= 1e-9 * fit.loglik.abs().max(1.0));
        }
    }
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, nodes: usize) -> f64 {
    let h = (b - a) / (nodes - 1) as f64;
    let mut s = f(a) + f(b);
    for i in 1..nodes - 1 {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn pdf_integrates_to_one() {
    let edge: f64 = 1e-9;
    for gamma in [-0.9, -0.3, 0.0, 1e-8, 0.5, 2.0, 4.5] {
        let p = GevParams::new(gamma, 1.7, -0.4).unwrap();
        // Pieces between quantile levels, log-spaced into both tails.
        let mut levels: Vec<f64> = (0..=60)
            .map(|i| (edge.ln() + (0.5f64.ln() - edge.ln()) * i as f64 / 60.0).exp())
            .collect();
        let upper: Vec<f64> = levels.iter().rev().skip(1).map(|t| 1.0 - t).collect();
        levels.extend(upper);
        let xs: Vec<f64> = levels
            .iter()
            .map(|&q| gev_quantile(&p, q).unwrap())
            .collect();
        let total: f64 = xs
            .windows(2)
            .map(|w| simpson(|x| gev_pdf(&p, x), w[0], w[1], 65))
            .sum();
        assert!(
            (total - (1.0 - 2.0 * edge)).abs() <= 1e-6,
            "gamma={gamma}: {total}"
        );
    }
}

#[test]
fn mle_recovers_parameters() {
    for (gamma, seed) in [(-0.3, 1u64), (0.0, 2), (0.5, 3)] {
        let truth = GevParams::new(gamma, 2.0, 5.0).unwrap();
        let data = gev_sample(&truth, 5000, seed);
        let fit = mle_fit(&data, pwm_init(&data).unwrap(), &MleOptions::default()).unwrap();
        let p = fit.params;
        assert!((p.gamma - gamma).abs() <= 0.05, "{p}");
        assert!((p.a / 2.0 - 1.0).abs() <= 0.05, "{p}");
        assert!((p.b - 5.0).abs() <= 0.1, "{p}");
    }
}

#[test]
fn frechet_block_fit_recovers_shape() {
    let spec = DistributionSpec::Frechet { gamma: 1.0 };
    for seed in 1..=5 {
        let s = sample(&spec, 4096, seed).unwrap();
        let fit = fit_dsm_gev(&s, 64, 64).unwrap();
        assert_eq!(fit.n_blocks, 64);
        assert!(
            (0.7..=1.3).contains(&fit.params.gamma),
            "seed {seed}: {}",
            fit.params
        );
    }
}

#[test]
fn block_fit_extrapolates_by_max_stability() {
    let spec = DistributionSpec::Weibull { kappa: 2.0 };
    let s = sample(&spec, 1024, 9).unwrap();
    let at_k = fit_dsm_gev(&s, 16, 16).unwrap();
    let at_m = fit_dsm_gev(&s, 256, 16).unwrap();
    assert_eq!(at_m.params, extrapolate(&at_k.params, 16, 256).unwrap());
    assert_eq!(block_maxima(&s, 16).unwrap().len(), 64);
    assert_eq!(fit_dsm_gev(&s, 256, 16).unwrap(), at_m);
}
