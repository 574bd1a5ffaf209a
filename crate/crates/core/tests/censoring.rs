mod common;

use cindex_core::beran::{beran_fit, kaplan_meier_censoring};
use cindex_core::cox::{cox_score, fit_cox, log_partial_likelihood, CoxOptions};
use cindex_core::data::dot;
use cindex_core::index::{fit_censoring_index, PipelineConfig};
use cindex_core::measure::{build_km_measure, build_weighted_measure};
use cindex_core::sim::{simulate_dataset, Model, SimScenario, THETA0};
use cindex_core::{Kernel, ObservedTriple};
use common::*;

#[test]
fn cox_recovers_censoring_index() {
    let mut errs = vec![Vec::new(); THETA0.len()];
    for seed in 0..20 {
        let data = cox_censored_dataset(2000, &THETA0, 1.0, 2024 + seed);
        let fit = fit_cox(&data, CoxOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.score_norm < 1e-8);
        let at_zero = log_partial_likelihood(&data, &[0.0; 4]).unwrap();
        let at_truth = log_partial_likelihood(&data, &THETA0).unwrap();
        assert!(fit.log_partial_likelihood >= at_zero - 1e-8);
        assert!(fit.log_partial_likelihood >= at_truth - 1e-8);
        let score = cox_score(&data, &fit.theta_hat).unwrap();
        assert!(score.iter().all(|v| v.abs() < 1e-8));
        for (k, (est, truth)) in fit.theta_hat.iter().zip(THETA0).enumerate() {
            errs[k].push((est - truth).abs());
        }
    }
    for e in errs {
        let med = median(e);
        assert!(med < 0.15, "median error {med}");
    }
}

#[test]
fn cox_fit_ignores_row_order_and_location() {
    let s = SimScenario::new(Model::M2, 300, 1.0, 0.3, 9);
    let data = simulate_dataset(&s);
    let base = fit_cox(&data, CoxOptions::default()).unwrap();
    let mut perm = data.clone();
    let mut r = rng(3);
    use rand::seq::SliceRandom;
    perm.shuffle(&mut r);
    let fit = fit_cox(&perm, CoxOptions::default()).unwrap();
    for (a, b) in base.theta_hat.iter().zip(&fit.theta_hat) {
        assert!((a - b).abs() < 1e-12);
    }
    let shifted: Vec<_> = data
        .iter()
        .map(|o| ObservedTriple::new(o.x.iter().map(|v| v + 10.0).collect(), o.t, o.delta))
        .collect();
    let fit = fit_cox(&shifted, CoxOptions::default()).unwrap();
    for (a, b) in base.theta_hat.iter().zip(&fit.theta_hat) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn beran_with_flat_weights_is_kaplan_meier() {
    let mut r = rng(17);
    for _ in 0..50 {
        let data = random_dataset(&mut r, 40, 2, 0.4);
        // a_n far beyond the index range: every kernel weight is K(~0)
        // only if the index is constant, so use theta = 0.
        let curve = beran_fit(&data, &[0.0, 0.0], 0.0, 1.0, Kernel::Quartic).unwrap();
        let km = textbook_km_censoring(&data);
        assert_eq!(curve.jump_times.len(), km.len());
        for ((t, g), (&jt, &jv)) in km.iter().zip(curve.jump_times.iter().zip(&curve.jump_values)) {
            assert_eq!(*t, jt);
            assert!((g - jv).abs() < 1e-12);
        }
        let km_curve = kaplan_meier_censoring(&data);
        for o in &data {
            assert!((km_curve.eval_left(o.t) - curve.eval_left(o.t)).abs() < 1e-12);
        }
    }
}

#[test]
fn beran_is_independent_of_z_when_weights_are_flat() {
    let mut r = rng(5);
    let data = random_dataset(&mut r, 30, 1, 0.5);
    let a = beran_fit(&data, &[0.0], 0.0, 1.0, Kernel::Triweight).unwrap();
    let b = beran_fit(&data, &[0.0], 0.3, 1.0, Kernel::Triweight).unwrap();
    assert_eq!(a.jump_values, b.jump_values);
}

#[test]
fn estimated_weights_track_true_censoring_weights() {
    let gamma = 1.0;
    let corrs: Vec<f64> = (0..15)
        .map(|seed| {
            let data = simulate_dataset(&SimScenario::new(Model::M1, 100, gamma, 0.3, 77 + seed));
            let fit = fit_cox(&data, CoxOptions::default()).unwrap();
            let m = build_weighted_measure(&data, &fit.theta_hat, 2.0, Kernel::Quartic).unwrap();
            let n = data.len() as f64;
            // C | X ~ Exp(mean gamma exp(theta0'x)): 1 - G(t-|x) = exp(-t / mean) for t > 0
            let oracle: Vec<f64> = data
                .iter()
                .filter(|o| o.delta)
                .map(|o| {
                    let mean = gamma * dot(&THETA0, &o.x).exp();
                    1.0 / (n * (-o.t.max(0.0) / mean).exp())
                })
                .collect();
            correlation(&m.weights, &oracle)
        })
        .collect();
    // pilot over seeds 0..8: correlations 0.82..0.99, median about 0.92
    let med = median(corrs.clone());
    assert!(med > 0.85, "median correlation {med}: {corrs:?}");
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn kaplan_meier_and_conditional_weights_differ_under_index_censoring() {
    let s = SimScenario::new(Model::M1, 200, 1.0, 0.3, 8);
    let data = simulate_dataset(&s);
    let fit = fit_cox(&data, CoxOptions::default()).unwrap();
    let ckm = build_weighted_measure(&data, &fit.theta_hat, 2.0, Kernel::Quartic).unwrap();
    let km = build_km_measure(&data).unwrap();
    assert_eq!(ckm.len(), km.len());
    assert!(ckm.weights.iter().zip(&km.weights).any(|(a, b)| (a - b).abs() > 1e-6));
}

#[test]
fn flat_kernel_weights_make_both_measures_equal() {
    let mut r = rng(41);
    let data = random_dataset(&mut r, 60, 3, 0.3);
    let ckm = build_weighted_measure(&data, &[0.0; 3], 1.0, Kernel::Quartic).unwrap();
    let km = build_km_measure(&data).unwrap();
    for (a, b) in ckm.weights.iter().zip(&km.weights) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn measure_cdf_is_monotone_and_ignores_censored_points() {
    let mut r = rng(2);
    let data = random_dataset(&mut r, 80, 2, 0.3);
    let m = build_km_measure(&data).unwrap();
    assert_eq!(m.len(), data.iter().filter(|o| o.delta).count());
    assert!(m.weights.iter().all(|&w| w >= 0.0));
    let ys = [-1.0, 0.0, 0.5, 1.0, 2.0, 3.0];
    for x1 in [0.2, 0.5, 1.0] {
        let vals: Vec<f64> = ys.iter().map(|&y| m.eval_cdf(&[x1, 0.7], y).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        assert!(m.eval_cdf(&[x1, 0.7], 1.0).unwrap() <= m.eval_cdf(&[x1 + 0.1, 0.7], 1.0).unwrap());
    }
}

#[test]
fn weighted_means_converge() {
    // E[Y 1{Y <= 1}] under the m1 design, from a large uncensored sample
    let truth = {
        let big = simulate_dataset(&SimScenario::new(Model::M1, 400_000, 1e12, 0.0, 1));
        big.iter().map(|o| if o.t <= 1.0 { o.t } else { 0.0 }).sum::<f64>() / big.len() as f64
    };
    let gamma = cindex_core::sim::calibrate_gamma(Model::M1, 0.3, 4).unwrap();
    let err_at = |n: usize| {
        let errs: Vec<f64> = (0..20)
            .map(|seed| {
                let data = simulate_dataset(&SimScenario::new(Model::M1, n, gamma, 0.3, 100 + seed));
                let fit = fit_cox(&data, CoxOptions::default()).unwrap();
                let m = build_weighted_measure(&data, &fit.theta_hat, 2.0, Kernel::Quartic).unwrap();
                (m.integrate(|_, y| if y <= 1.0 { y } else { 0.0 }) - truth).abs()
            })
            .collect();
        median(errs)
    };
    let (small, large) = (err_at(100), err_at(800));
    assert!(large < small, "median error n=100: {small}, n=800: {large}");
}

#[test]
fn constant_covariates_skip_the_censoring_model() {
    let data: Vec<ObservedTriple> =
        [(1.0, false), (2.0, true), (3.0, false), (4.0, true)].iter().map(|&(t, d)| ObservedTriple::new(vec![0.5, 2.0], t, d)).collect();
    assert!(fit_cox(&data, CoxOptions::default()).is_err());
    let mut warnings = Vec::new();
    let (fit, theta) = fit_censoring_index(&data, &PipelineConfig::default(), &mut warnings).unwrap();
    assert!(fit.is_none());
    assert_eq!(theta, vec![0.0, 0.0]);
    assert!(warnings.iter().any(|w| w.contains("constant")));

    // varying covariates keep the error
    let mut varied = data.clone();
    varied[0].x[0] = 0.7;
    varied[1].x[0] = 0.7;
    let mut warnings = Vec::new();
    match fit_censoring_index(&varied, &PipelineConfig::default(), &mut warnings) {
        Ok((Some(_), _)) | Err(_) => {}
        Ok((None, _)) => panic!("censoring model skipped for varying covariates"),
    }
}
