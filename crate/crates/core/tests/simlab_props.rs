use proptest::prelude::*;

use dnc_krr::dnc::{fit_all, partition, Dataset};
use dnc_krr::simlab::{
    generate, machine_count, mse_of_estimate, run_sweep, write_csv, CellPlan, ExperimentConfig, Model, CSV_HEADER,
};
use dnc_krr::solver::SolvePath;
use dnc_krr::{Points, Spectrum};

fn zero_estimate(model: &Model) -> dnc_krr::dnc::DncEstimate {
    let lambda = 1e-3;
    let spec = Spectrum::for_lambda(model.family(2), lambda).unwrap();
    let d = model.dim();
    let xs = Points::midpoint_grid(d, 8);
    let data = Dataset::new(xs.clone(), vec![0.0; xs.len()], 0).unwrap();
    let part = partition(&data, 2, 0).unwrap();
    fit_all(&spec, &data, &part, lambda, SolvePath::ExactGram).unwrap()
}

#[test]
fn zero_estimate_mse_is_signal_energy() {
    // int (0.6 sin(1.5 pi x))^2 = 0.18; the additive signal adds 0.01 * 2 * 0.5^7 / 7
    let spline = Model::Spline1d { c: 1.0 };
    let mse = mse_of_estimate(&zero_estimate(&spline), &spline, 512).unwrap();
    assert!((mse - 0.18).abs() < 1e-6 * 0.18, "{mse}");
    let additive = Model::Additive2d { c: 1.0 };
    let expected = 0.08 + 0.01 * 2.0 * 0.5f64.powi(7) / 7.0;
    let mse = mse_of_estimate(&zero_estimate(&additive), &additive, 64).unwrap();
    assert!((mse - expected).abs() < 1e-4 * expected, "{mse} vs {expected}");
}

fn config(json: &str) -> ExperimentConfig {
    serde_json::from_str(json).unwrap()
}

const MINIMAL: &str = r#"{
    "model": {"kind": "spline1d", "c": 1.0},
    "N_list": [256],
    "rho_list": [0.3],
    "replications": 3,
    "lambda_source": {"kind": "rates", "task": "estimation", "scale": 1e-5}
}"#;

#[test]
fn mse_grid_refinement_is_stable() {
    let cfg = config(MINIMAL);
    let plan = CellPlan::new(&cfg, 256, 0.3).unwrap();
    let (_, _, est) = plan.estimate(4).unwrap();
    let model = Model::Spline1d { c: 1.0 };
    let coarse = mse_of_estimate(&est, &model, 512).unwrap();
    let fine = mse_of_estimate(&est, &model, 2048).unwrap();
    assert!((coarse - fine).abs() < 1e-2 * fine, "{coarse} vs {fine}");
}

#[test]
fn null_data_is_standard_noise() {
    let data = generate(&Model::Spline1d { c: 0.0 }, 100_000, 7);
    let n = data.len() as f64;
    let mean = data.ys.iter().sum::<f64>() / n;
    let var = data.ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 0.02, "{mean}");
    assert!((var - 1.0).abs() < 0.02, "{var}");
    assert!(data.xs.as_slice().iter().all(|x| (0.0..1.0).contains(x)));
    let xbar = data.xs.as_slice().iter().sum::<f64>() / n;
    assert!((xbar - 0.5).abs() < 0.01);
}

#[test]
fn generation_is_seeded() {
    let model = Model::Additive2d { c: 1.0 };
    assert_eq!(generate(&model, 50, 3), generate(&model, 50, 3));
    assert_ne!(generate(&model, 50, 3).ys, generate(&model, 50, 4).ys);
    assert_eq!(generate(&model, 50, 3).xs.dim(), 2);
}

#[test]
fn single_replication_sweep_matches_the_pipeline() {
    let mut cfg = config(MINIMAL);
    cfg.replications = 1;
    cfg.base_seed = 21;
    let cell = &run_sweep(&cfg).unwrap().cells[0];
    let rep = CellPlan::new(&cfg, 256, 0.3).unwrap().run(21).unwrap();
    assert_eq!(cell.mse_mean, rep.mse);
    assert_eq!(cell.z_values, vec![rep.test.z]);
    assert_eq!(cell.mse_stderr, 0.0);
    assert_eq!(cell.s, machine_count(256, 0.3));
    assert_eq!(cell.s * cell.n + cell.dropped_points, 256);
}

#[test]
fn csv_round_trips() {
    let mut cfg = config(MINIMAL);
    cfg.n_list = vec![128, 256];
    cfg.rho_list = vec![0.2, 0.4];
    cfg.worker_count = Some(1);
    let result = run_sweep(&cfg).unwrap();
    let mut buf = Vec::new();
    write_csv(&result, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.starts_with(CSV_HEADER));
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header.join(","), CSV_HEADER);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    for (row, cell) in rows.iter().zip(&result.cells) {
        assert_eq!(row[0].parse::<usize>().unwrap(), cell.n_total);
        assert_eq!(row[1].parse::<f64>().unwrap(), cell.rho);
        assert_eq!(row[4].parse::<f64>().unwrap(), cell.lambda);
        assert_eq!(row[5].parse::<f64>().unwrap(), cell.mse_mean);
        assert_eq!(row[7].parse::<f64>().unwrap(), cell.rejection_rate);
    }
}

#[test]
fn config_defaults_and_validation() {
    let cfg = config(MINIMAL);
    assert_eq!((cfg.m, cfg.alpha, cfg.base_seed, cfg.grid_size()), (2, 0.05, 0, 512));
    assert!(cfg.validate().is_ok());
    assert!(serde_json::from_str::<ExperimentConfig>(&MINIMAL.replace("\"replications\"", "\"bogus\": 1, \"replications\"")).is_err());
    for (field, value) in [("replications", "0"), ("rho_list", "[1.5]"), ("N_list", "[]"), ("N_list", "[2]")] {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        v[field] = serde_json::from_str(value).unwrap();
        let cfg: ExperimentConfig = serde_json::from_value(v).unwrap();
        assert!(cfg.validate().is_err(), "{field} = {value}");
    }
}

proptest! {
    #[test]
    fn machine_count_is_monotone(n in 4usize..1_000_000, r1 in 0.01..0.99f64, r2 in 0.01..0.99f64) {
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        let (a, b) = (machine_count(n, lo), machine_count(n, hi));
        prop_assert!(1 <= a && a <= b && b <= n);
        prop_assert!((b as f64 - (n as f64).powf(hi)).abs() <= 0.5 + 1e-9);
    }
}
