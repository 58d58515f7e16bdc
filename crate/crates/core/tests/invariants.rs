use wwkde::metrics::bias_variance_decompose;
use wwkde::{
    build_orthogonal_kernel, normalizer, target_functional, validate_kernel, ww_batch, BandwidthSchedule,
    EvaluationGrid, KernelSpec, QuadratureSettings, TailModel,
};

#[test]
fn normalized_target_functional_is_bounded() {
    for (beta, d) in [(1.0, 1), (2.0, 1), (1.0, 2), (0.5, 3)] {
        let s = BandwidthSchedule::optimal(beta, d);
        let scaled: Vec<f64> = [10u64, 100, 1_000, 10_000, 100_000]
            .iter()
            .map(|&n| normalizer(n, beta, d).unwrap().powi(2) * target_functional(&s, n).unwrap())
            .collect();
        let hi = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(lo > 0.1 && hi < 10.0, "({beta},{d}): {scaled:?}");
    }
}

#[test]
fn optimal_exponent_beats_distant_exponents() {
    let (beta, d) = (1.0, 1);
    for n in [1_000_000u64, 4_000_000] {
        let best = target_functional(&BandwidthSchedule::optimal(beta, d), n).unwrap();
        for a in [0.1, 0.2, 0.25, 0.45, 0.5, 0.6, 0.9] {
            let other = target_functional(&BandwidthSchedule::optimal(beta, d).with_exponent(a), n).unwrap();
            assert!(other >= best, "a={a} n={n}: {other} < {best}");
        }
    }
}

#[test]
fn two_regime_slopes() {
    let tm = TailModel::new(1.0, 1).unwrap();
    let n = 1000;
    let m = tm.regime_m(n).unwrap();
    // Gaussian regime: -ln bound = u^2 exactly
    for u in [0.5, 1.0, 0.9 * m] {
        let e = tm.two_regime_exponent(n, u).unwrap();
        assert!((e - u * u).abs() <= 1e-12 * u * u);
    }
    // far regime: local slope tends to q*
    let (u1, u2) = (1e6 * m, 1.01e6 * m);
    let slope = (tm.two_regime_exponent(n, u2).unwrap().ln() - tm.two_regime_exponent(n, u1).unwrap().ln())
        / (u2.ln() - u1.ln());
    assert!((slope - tm.exponent_qstar()).abs() < 1e-3, "{slope}");
}

#[test]
fn summed_series_obeys_a_power_upper_bound() {
    // sum_k Delta_k(v) <= C v^{-q} with C = the value at v = 1, since
    // v^q * sum decreases on [1, 10]
    for (beta, d) in [(1.0, 1), (1.0, 2), (2.0, 1), (2.0, 2)] {
        let tm = TailModel::new(beta, d).unwrap();
        let scaled: Vec<f64> = (0..=18)
            .map(|i| {
                let v = 10f64.powf(i as f64 / 18.0);
                tm.as_convergence_terms(v, 10_000).unwrap().partial_sum * v.powf(tm.exponent_q())
            })
            .collect();
        assert!(scaled.windows(2).all(|w| w[1] <= w[0]), "({beta},{d}): {scaled:?}");
        let c = scaled[0];
        assert!(c.is_finite() && c > 0.0);
        let tm = tm.with_c_lower(c);
        for i in 0..=18 {
            let v = 10f64.powf(i as f64 / 18.0);
            let t = tm.as_convergence_terms(v, 10_000).unwrap();
            assert!(t.partial_sum <= t.series_bound * (1.0 + 1e-12));
        }
    }
}

#[test]
fn arrival_order_matters() {
    let samples: Vec<Vec<f64>> = [-0.7, 0.1, 0.4, 1.3, -0.2].iter().map(|v| vec![*v]).collect();
    let mut reversed = samples.clone();
    reversed.reverse();
    let grid = EvaluationGrid::uniform_box(&[-2.0], &[2.0], 9, Default::default()).unwrap();
    let k = KernelSpec::gaussian(1);
    let s = BandwidthSchedule::optimal(1.0, 1);
    let a = ww_batch(&samples, &grid, &k, &s).unwrap();
    let b = ww_batch(&reversed, &grid, &k, &s).unwrap();
    assert_ne!(a, b);
}

#[test]
fn mse_decomposes_into_bias_and_variance() {
    let truth = vec![1.0, -0.5];
    let reps: Vec<Vec<f64>> = (0..17).map(|i| vec![1.0 + 0.1 * (i as f64).cos(), 0.3 * (i as f64).sin()]).collect();
    let bv = bias_variance_decompose(&reps, &truth).unwrap();
    let m = bv.replications as f64;
    for i in 0..2 {
        let identity = bv.bias[i] * bv.bias[i] + bv.variance[i] * (m - 1.0) / m;
        assert!((bv.mse[i] - identity).abs() <= 1e-12, "{} vs {identity}", bv.mse[i]);
    }
}

#[test]
fn orthogonal_kernels_pass_validation_in_three_dimensions() {
    let settings = QuadratureSettings {
        nodes_per_axis: 16,
        ..Default::default()
    };
    for order in [1, 2, 3] {
        let k = build_orthogonal_kernel(3, order).unwrap();
        let r = validate_kernel(&k, &settings).unwrap();
        assert!(r.passed(), "order {order}: {:?}", r.checks);
        assert!(r.max_odd_moment() <= 1e-10);
    }
}
