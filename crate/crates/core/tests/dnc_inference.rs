use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dnc_krr::dnc::{
    fit_all, fit_all_with_workers, partition, partition_indices, predict_bar, predict_bar_direct, xi_diagnostic,
    Dataset, DncEstimate,
};
use dnc_krr::inference::{estimate_sigma2, norm_breakdown, separation, test_statistic, SeparationInput, Sigma2};
use dnc_krr::simlab::{generate, Model};
use dnc_krr::solver::{krr_fit, predict, SolvePath};
use dnc_krr::{Family, Points, Spectrum};

fn periodic(lambda: f64) -> Spectrum {
    Spectrum::for_lambda(Family::PeriodicSobolev { m: 2 }, lambda).unwrap()
}

fn random_data(len: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
    let ys = xs.iter().map(|x| (5.0 * x).cos() + rng.random::<f64>() - 0.5).collect();
    Dataset::new(Points::from_scalars(xs), ys, seed).unwrap()
}

proptest! {
    #[test]
    fn partition_is_sound(len in 1usize..400, frac in 0.0..1.0f64, seed in any::<u64>()) {
        let s = 1 + ((len - 1) as f64 * frac) as usize;
        let p = partition_indices(len, s, seed).unwrap();
        prop_assert_eq!(p.n, len / s);
        prop_assert_eq!(p.assignment.len(), s);
        prop_assert!(p.assignment.iter().all(|a| a.len() == p.n));
        prop_assert_eq!(p.dropped.len(), len - s * p.n);
        let mut all: Vec<usize> = p.assignment.iter().flatten().chain(&p.dropped).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..len).collect::<Vec<_>>());
        prop_assert_eq!(&p, &partition_indices(len, s, seed).unwrap());
    }
}

#[test]
fn partition_rejects_bad_counts() {
    assert!(partition_indices(10, 0, 1).is_err());
    assert!(partition_indices(10, 11, 1).is_err());
}

#[test]
fn average_is_mean_of_machines() {
    let data = random_data(120, 3);
    let part = partition(&data, 6, 3).unwrap();
    let eval = Points::midpoint_grid(1, 50);
    let spec = periodic(1e-4);
    let gauss = Spectrum::new(Family::GaussianRkhs { d: 1, c: 1.0 }, 64).unwrap();
    for (spec, path) in [(spec.clone(), SolvePath::ExactGram), (spec, SolvePath::TruncatedFeature), (gauss, SolvePath::ExactGram)] {
        let est = fit_all(&spec, &data, &part, 1e-4, path).unwrap();
        let mut manual = vec![0.0; eval.len()];
        for fit in &est.fits {
            for (m, v) in manual.iter_mut().zip(predict(fit, &spec, &eval).unwrap()) {
                *m += v / 6.0;
            }
        }
        for (a, b) in predict_bar(&est, &eval).unwrap().iter().zip(&manual) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        for (a, b) in predict_bar_direct(&est, &eval).unwrap().iter().zip(&manual) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn identical_machines_average_to_one_fit() {
    let data = random_data(40, 5);
    let spec = periodic(1e-3);
    let part = partition(&data, 1, 5).unwrap();
    let fit = krr_fit(&spec, &part.subsample(&data, 0), 1e-3, SolvePath::ExactGram).unwrap();
    let mut twin = fit.clone();
    twin.machine_id = 1;
    let est = DncEstimate::from_fits(&spec, vec![fit.clone(), twin], 1e-3).unwrap();
    let eval = Points::midpoint_grid(1, 33);
    let single = predict(&fit, &spec, &eval).unwrap();
    for (a, b) in predict_bar(&est, &eval).unwrap().iter().zip(&single) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(est.n_total, 80);
}

#[test]
fn estimate_independent_of_worker_count() {
    let data = random_data(600, 9);
    let spec = periodic(1e-5);
    let part = partition(&data, 12, 9).unwrap();
    let json = |w| {
        let est = fit_all_with_workers(&spec, &data, &part, 1e-5, SolvePath::ExactGram, w).unwrap();
        serde_json::to_string(&est).unwrap()
    };
    assert_eq!(json(1), json(3));
}

fn bernoulli4(t: f64) -> f64 {
    t.powi(4) - 2.0 * t.powi(3) + t * t - 1.0 / 30.0
}

fn bernoulli8(t: f64) -> f64 {
    t.powi(8) - 4.0 * t.powi(7) + 14.0 / 3.0 * t.powi(6) - 7.0 / 3.0 * t.powi(4) + 2.0 / 3.0 * t * t - 1.0 / 30.0
}

#[test]
fn statistic_matches_closed_form_quadratic() {
    // T = d_bar^2 + a' (R2 + lambda R) a with a the stacked alpha / s and
    // R(t) = -B4(t)/4!, R2(t) = sum mu^2 phi phi = -B8(t)/8!
    let lambda = 1e-3;
    let spec = Spectrum::new(Family::PeriodicSobolev { m: 2 }, 16_001).unwrap();
    let data = random_data(40, 11);
    let part = partition(&data, 4, 11).unwrap();
    let est = fit_all(&spec, &data, &part, lambda, SolvePath::ExactGram).unwrap();
    let mut xs: Vec<f64> = Vec::new();
    let mut a: Vec<f64> = Vec::new();
    for fit in &est.fits {
        xs.extend(fit.anchors.as_slice());
        a.extend(fit.alpha.iter().map(|v| v / 4.0));
    }
    let d_bar = est.fits.iter().map(|f| f.offset).sum::<f64>() / 4.0;
    let mut quad = d_bar * d_bar;
    for i in 0..xs.len() {
        for k in 0..xs.len() {
            let t = (xs[i] - xs[k]).rem_euclid(1.0);
            let r = -bernoulli4(t) / 24.0;
            let r2 = -bernoulli8(t) / 40320.0;
            quad += a[i] * a[k] * (r2 + lambda * r);
        }
    }
    let report = test_statistic(&est, Sigma2::Known(1.0), 0.05).unwrap();
    assert_relative_eq!(report.t, quad, max_relative = 1e-8);
}

#[test]
fn coefficient_norm_matches_grid_quadrature() {
    let lambda = 1e-4;
    let spec = periodic(lambda);
    let data = random_data(300, 13);
    let part = partition(&data, 3, 13).unwrap();
    let est = fit_all(&spec, &data, &part, lambda, SolvePath::ExactGram).unwrap();
    let grid = Points::midpoint_grid(1, 4096);
    let f = predict_bar(&est, &grid).unwrap();
    let quad = f.iter().map(|v| v * v).sum::<f64>() / 4096.0;
    let nb = norm_breakdown(&est).unwrap();
    assert_relative_eq!(nb.v_part, quad, max_relative = 1e-4);
    assert!(nb.quadrature_error.is_none());
    let h: f64 = est.fits.iter().map(|f| f.rkhs_norm_sq(&spec).unwrap()).sum::<f64>();
    assert!(nb.h_part <= h / 3.0 + 1e-9, "norm of the average exceeds the mean norm");
}

#[test]
fn gaussian_norm_uses_quadrature_fallback() {
    let lambda = 1e-3;
    let spec = Spectrum::new(Family::GaussianRkhs { d: 1, c: 1.0 }, 64).unwrap();
    let data = random_data(90, 17);
    let part = partition(&data, 3, 17).unwrap();
    let est = fit_all(&spec, &data, &part, lambda, SolvePath::ExactGram).unwrap();
    let nb = norm_breakdown(&est).unwrap();
    assert!(nb.quadrature_error.is_some());
    let grid = Points::midpoint_grid(1, 10_000);
    let f = predict_bar(&est, &grid).unwrap();
    let quad = f.iter().map(|v| v * v).sum::<f64>() / 10_000.0;
    assert_relative_eq!(nb.v_part, quad, max_relative = 1e-5);
    assert_relative_eq!(nb.total, nb.v_part + lambda * nb.h_part, max_relative = 1e-14);
}

#[test]
fn null_center_and_scale() {
    let lambda = 1e-4;
    let spec = periodic(lambda);
    let xs = Points::from_scalars((0..64).map(|i| (i as f64 + 0.5) / 64.0).collect());
    let data = Dataset::new(xs, vec![0.0; 64], 0).unwrap();
    let part = partition(&data, 4, 0).unwrap();
    let est = fit_all(&spec, &data, &part, lambda, SolvePath::ExactGram).unwrap();
    let r = test_statistic(&est, Sigma2::Known(2.0), 0.05).unwrap();
    let sums = spec.spectral_sums(lambda).unwrap();
    let n = 64.0;
    assert_eq!(r.t, 0.0);
    assert_relative_eq!(r.center, 2.0 * sums.h_inv / n, max_relative = 1e-14);
    assert_relative_eq!(r.scale, (2.0 * 4.0 * n * (n - 1.0) * sums.h_inv2).sqrt() / (n * n), max_relative = 1e-14);
    assert_relative_eq!(r.z, -r.center / r.scale, max_relative = 1e-14);
    assert_relative_eq!(r.critical_value, 1.959963984540054, max_relative = 1e-9);
    assert!(!r.reject);
}

#[test]
fn statistic_rejects_bad_inputs() {
    let lambda = 1e-3;
    let spec = periodic(lambda);
    let one = Dataset::new(Points::from_scalars(vec![0.5]), vec![1.0], 0).unwrap();
    let est = fit_all(&spec, &one, &partition(&one, 1, 0).unwrap(), lambda, SolvePath::ExactGram).unwrap();
    assert!(test_statistic(&est, Sigma2::Known(1.0), 0.05).is_err());
    let data = random_data(20, 1);
    let est = fit_all(&spec, &data, &partition(&data, 2, 1).unwrap(), lambda, SolvePath::ExactGram).unwrap();
    assert!(test_statistic(&est, Sigma2::Known(0.0), 0.05).is_err());
    assert!(test_statistic(&est, Sigma2::Known(1.0), 1.0).is_err());
    assert!(test_statistic(&est, Sigma2::Known(1.0), 0.05).is_ok());
}

#[test]
fn plugin_variance_is_consistent_under_the_null() {
    let n_total = 2048;
    let lambda = 1e-4 * (n_total as f64).powf(-8.0 / 9.0);
    let spec = periodic(lambda);
    let model = Model::Spline1d { c: 0.0 };
    let estimates: Vec<f64> = (0..50)
        .map(|r| {
            let data = generate(&model, n_total, 100 + r);
            let part = partition(&data, 8, 100 + r).unwrap();
            let est = fit_all(&spec, &data, &part, lambda, SolvePath::ExactGram).unwrap();
            estimate_sigma2(&est, &data, &part).unwrap()
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / 50.0;
    assert!((0.9..=1.1).contains(&mean), "{mean}");
}

#[test]
fn xi_shrinks_with_subsample_size() {
    let lambda = 1e-3;
    let spec = periodic(lambda);
    let mean_xi = |n: usize| {
        (0..20)
            .map(|seed| {
                let data = random_data(n, 200 + seed);
                let part = partition(&data, 1, seed).unwrap();
                xi_diagnostic(&spec, &part, &data, lambda).unwrap()[0]
            })
            .sum::<f64>()
            / 20.0
    };
    let (small, large) = (mean_xi(64), mean_xi(1024));
    assert!(large < small, "{large} vs {small}");
    let gauss = Spectrum::new(Family::GaussianRkhs { d: 1, c: 1.0 }, 64).unwrap();
    let data = random_data(10, 0);
    assert!(xi_diagnostic(&gauss, &partition(&data, 1, 0).unwrap(), &data, lambda).is_err());
}

#[test]
fn separation_terms_balance_at_the_testing_rate() {
    // with lambda ~ N^{-8/9} the bias and null-scale terms shrink together
    let ratio = |n_total: f64| {
        let lambda = n_total.powf(-8.0 / 9.0);
        let spec = periodic(lambda);
        let input = SeparationInput { lambda, n_total, n: n_total / 4.0, f_norm_h: 1.0, a: 1.0, b: 1.0, constant: 1.0 };
        let r = separation(&spec, input).unwrap();
        r.bias / r.sd
    };
    let (a, b) = (ratio(4096.0), ratio(65536.0));
    assert!((a / b - 1.0).abs() < 0.1, "{a} vs {b}");
    let spec = periodic(1e-3);
    let base = SeparationInput { lambda: 1e-3, n_total: 1000.0, n: 100.0, f_norm_h: 1.0, a: 1.0, b: 1.0, constant: 1.0 };
    let low = separation(&spec, base).unwrap();
    let high = separation(&spec, SeparationInput { f_norm_h: 2.0, ..base }).unwrap();
    assert!(high.d_term > low.d_term && high.b_term > low.b_term);
    assert!(separation(&spec, SeparationInput { n: 0.0, ..base }).is_err());
}
