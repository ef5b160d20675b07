//! Tuning rules and machine-count bounds for each kernel family.
//!
//! Every order statement is evaluated with its constant set to 1 and the
//! natural logarithm. The exponents are the authoritative output; the
//! numeric values are scale indications.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Estimation,
    Testing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateFamily {
    Spline,
    Additive,
    Gaussian,
    ThinPlate,
}

/// `d^d_exp * N^n_exp * (ln N)^log_exp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub n_exp: f64,
    pub log_exp: f64,
    pub d_exp: f64,
}

impl PowerLaw {
    const fn new(n_exp: f64, log_exp: f64, d_exp: f64) -> Self {
        Self { n_exp, log_exp, d_exp }
    }

    pub fn eval(&self, n: f64, d: f64) -> f64 {
        let mut v = n.powf(self.n_exp) * n.ln().powf(self.log_exp);
        if self.d_exp != 0.0 {
            v *= d.powf(self.d_exp);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePrescription {
    pub family: RateFamily,
    pub task: Task,
    pub m: u32,
    pub d: usize,
    pub n_total: u64,
    pub lambda: f64,
    /// Unfloored bound on the machine count.
    pub s_bound: f64,
    /// `max(1, floor(s_bound))`.
    pub s_max: u64,
    pub rate: f64,
    pub lambda_law: PowerLaw,
    pub s_law: PowerLaw,
    pub rate_law: PowerLaw,
    pub warnings: Vec<String>,
}

fn laws(family: RateFamily, task: Task, m: f64, d: f64) -> (PowerLaw, PowerLaw, PowerLaw) {
    use RateFamily::*;
    use Task::*;
    let p = PowerLaw::new;
    match (family, task) {
        (Spline, Estimation) => (
            p(-2.0 * m / (2.0 * m + 1.0), 0.0, 0.0),
            p(2.0 * m / (2.0 * m + 1.0), -1.0, 0.0),
            p(-m / (2.0 * m + 1.0), 0.0, 0.0),
        ),
        (Spline, Testing) => (
            p(-4.0 * m / (4.0 * m + 1.0), 0.0, 0.0),
            p((4.0 * m - 3.0) / (4.0 * m + 1.0), -1.0, 0.0),
            p(-2.0 * m / (4.0 * m + 1.0), 0.0, 0.0),
        ),
        (Additive, Estimation) => (
            p(-2.0 * m / (2.0 * m + 1.0), 0.0, 0.0),
            p(2.0 * m / (2.0 * m + 1.0), -1.0, -1.0),
            p(-m / (2.0 * m + 1.0), 0.0, 0.5),
        ),
        (Additive, Testing) => (
            p(-4.0 * m / (4.0 * m + 1.0), 0.0, -2.0 * m / (4.0 * m + 1.0)),
            p((4.0 * m - 3.0) / (4.0 * m + 1.0), -1.0, -4.0 * (2.0 * m + 1.0) / (4.0 * m + 1.0)),
            p(-2.0 * m / (4.0 * m + 1.0), 0.0, (2.0 * m + 1.0) / (2.0 * (4.0 * m + 1.0))),
        ),
        (Gaussian, Estimation) => (p(-1.0, 0.5, 0.0), p(1.0, -(d + 3.0), 0.0), p(-0.5, 0.25, 0.0)),
        (Gaussian, Testing) => (p(-1.0, 0.25, 0.0), p(1.0, -(d + 3.5), 0.0), p(-0.5, 0.125, 0.0)),
        (ThinPlate, Estimation) => (
            p(-2.0 * m / (2.0 * m + d), 0.0, 0.0),
            p((2.0 * m - d).powi(2) / (2.0 * m * (2.0 * m + d)), -1.0, 0.0),
            p(-m / (2.0 * m + d), 0.0, 0.0),
        ),
        (ThinPlate, Testing) => (
            p(-4.0 * m / (4.0 * m + d), 0.0, 0.0),
            p((4.0 * m * m - 7.0 * d * m + d * d) / ((4.0 * m + d) * m), -1.0, 0.0),
            p(-2.0 * m / (4.0 * m + d), 0.0, 0.0),
        ),
    }
}

fn side_conditions(family: RateFamily, task: Task, m: u32, d: usize, n: f64) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    if d == 0 {
        return Err(Error::SideCondition("dimension d must be >= 1".into()));
    }
    let needs_order = !matches!(family, RateFamily::Gaussian);
    // integer orders: m > 1/2 and m > 3/4 both reduce to m >= 1
    if needs_order && m == 0 {
        return Err(Error::SideCondition(format!(
            "{family:?} {task:?} requires m >= 1 (got m = 0)"
        )));
    }
    let mf = m as f64;
    let df = d as f64;
    match family {
        RateFamily::Spline if d != 1 => {
            return Err(Error::SideCondition(format!("spline family is univariate (got d = {d})")));
        }
        RateFamily::Gaussian if !(d == 1 || d == 2) => {
            return Err(Error::SideCondition(format!("Gaussian family supports d in {{1,2}} (got d = {d})")));
        }
        RateFamily::ThinPlate => {
            if 2 * m as usize <= d {
                return Err(Error::SideCondition(format!("thin-plate requires 2m > d (got m = {m}, d = {d})")));
            }
            if d != 2 {
                warnings.push(format!("thin-plate bounds are stated for d = 2 (got d = {d})"));
            }
        }
        RateFamily::Additive => {
            let limit = match task {
                Task::Estimation => n.powf(2.0 * mf / (2.0 * mf + 1.0)) / n.ln(),
                Task::Testing => {
                    n.powf((4.0 * mf - 3.0) / (4.0 * (2.0 * mf + 1.0)))
                        * n.ln().powf(-(4.0 * mf + 1.0) / (4.0 * (2.0 * mf + 1.0)))
                }
            };
            if df >= limit {
                warnings.push(format!(
                    "additive dimension d = {d} is not small relative to its bound {limit:.4} at N = {n}"
                ));
            }
        }
        _ => {}
    }
    Ok(warnings)
}

/// Prescribed penalty, machine-count bound and minimax rate.
pub fn prescribe(family: RateFamily, m: u32, d: usize, n_total: u64, task: Task) -> Result<RatePrescription> {
    if n_total < 2 {
        return Err(Error::InvalidParameter(format!("N must be >= 2 (got {n_total})")));
    }
    let n = n_total as f64;
    let mut warnings = side_conditions(family, task, m, d, n)?;
    let (lambda_law, s_law, rate_law) = laws(family, task, m as f64, d as f64);
    let df = d as f64;
    let lambda = lambda_law.eval(n, df);
    let s_bound = s_law.eval(n, df);
    let rate = rate_law.eval(n, df);
    let s_max = if s_bound >= 1.0 {
        s_bound.floor() as u64
    } else {
        warnings.push(format!("machine-count bound {s_bound:.4e} is below 1; clamped to s_max = 1"));
        1
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(RatePrescription {
        family,
        task,
        m,
        d,
        n_total,
        lambda,
        s_bound,
        s_max,
        rate,
        lambda_law,
        s_law,
        rate_law,
        warnings,
    })
}

/// `ln(s_max) / ln(N)`: the machine-count bound on the `rho` scale.
pub fn rho_max(family: RateFamily, m: u32, d: usize, n_total: u64, task: Task) -> Result<f64> {
    let p = prescribe(family, m, d, n_total, task)?;
    Ok((p.s_max as f64).ln() / (n_total as f64).ln())
}
