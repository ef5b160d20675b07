use proptest::prelude::*;

use dnc_krr::rates::{prescribe, rho_max, RateFamily, Task};

proptest! {
    #[test]
    fn penalty_falls_and_machine_bound_grows(m in 1u32..5, n in 1000u64..1_000_000_000, k in 2u64..64) {
        for task in [Task::Estimation, Task::Testing] {
            let a = prescribe(RateFamily::Spline, m, 1, n, task).unwrap();
            let b = prescribe(RateFamily::Spline, m, 1, n * k, task).unwrap();
            prop_assert!(b.lambda < a.lambda);
            prop_assert!(b.s_bound > a.s_bound);
            prop_assert!(b.s_max >= a.s_max);
            prop_assert!(b.rate < a.rate);
        }
    }

    #[test]
    fn spline_rate_is_root_penalty(m in 1u32..5, n in 2u64..1_000_000_000) {
        for task in [Task::Estimation, Task::Testing] {
            let p = prescribe(RateFamily::Spline, m, 1, n, task).unwrap();
            prop_assert!((p.rate * p.rate / p.lambda - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn testing_penalty_is_smaller(m in 1u32..5, n in 16u64..1_000_000_000) {
        let e = prescribe(RateFamily::Spline, m, 1, n, Task::Estimation).unwrap();
        let t = prescribe(RateFamily::Spline, m, 1, n, Task::Testing).unwrap();
        prop_assert!(t.lambda < e.lambda);
        prop_assert!(t.s_law.n_exp < e.s_law.n_exp);
    }

    #[test]
    fn additive_in_one_dimension_is_spline(m in 1u32..5, n in 16u64..1_000_000_000) {
        for task in [Task::Estimation, Task::Testing] {
            let a = prescribe(RateFamily::Additive, m, 1, n, task).unwrap();
            let s = prescribe(RateFamily::Spline, m, 1, n, task).unwrap();
            prop_assert_eq!(a.lambda, s.lambda);
            prop_assert_eq!(a.s_max, s.s_max);
            prop_assert_eq!(a.rate, s.rate);
        }
    }

    #[test]
    fn rho_bound_lies_below_the_exponent(m in 1u32..5, n in 16u64..1_000_000_000) {
        for task in [Task::Estimation, Task::Testing] {
            let p = prescribe(RateFamily::Spline, m, 1, n, task).unwrap();
            let rho = rho_max(RateFamily::Spline, m, 1, n, task).unwrap();
            prop_assert!(rho >= 0.0 && rho <= p.s_law.n_exp.max(0.0) + 1e-12);
        }
    }
}

#[test]
fn additive_dimension_scaling() {
    let n = 1u64 << 20;
    let one = prescribe(RateFamily::Additive, 2, 1, n, Task::Estimation).unwrap();
    let four = prescribe(RateFamily::Additive, 2, 4, n, Task::Estimation).unwrap();
    assert!((four.rate / one.rate - 2.0).abs() < 1e-12);
    assert!((one.s_bound / four.s_bound - 4.0).abs() < 1e-9);
    assert_eq!(one.lambda, four.lambda);
}

#[test]
fn prescription_round_trips_through_json() {
    let p = prescribe(RateFamily::ThinPlate, 2, 2, 4096, Task::Estimation).unwrap();
    let back = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
    assert_eq!(p, back);
}
