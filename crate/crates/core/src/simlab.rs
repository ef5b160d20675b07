//! Simulation models, replicated experiments over `(N, rho)` grids and the
//! sweep CSV format.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dnc::{fit_all, partition, predict_bar, xi_diagnostic, Dataset, DncEstimate};
use crate::error::{Error, Result};
use crate::inference::{estimate_sigma2, test_statistic, Sigma2, TestReport};
use crate::points::Points;
use crate::rates::{prescribe, RateFamily, Task};
use crate::solver::SolvePath;
use crate::spectra::{Family, Spectrum};

/// Header of the sweep CSV.
pub const CSV_HEADER: &str = "N,rho,s,n,lambda,mse_mean,mse_stderr,reject_rate,reject_stderr,reps,dropped";

/// Calibrated multipliers on the rate-prescribed penalties. The rates carry
/// order statements only; these constants place the estimation rule in its
/// variance-dominated regime and keep the null calibration accurate at
/// desk-scale N.
pub const ESTIMATION_LAMBDA_SCALE: f64 = 1e-5;
pub const TESTING_LAMBDA_SCALE: f64 = 1e-4;

/// Largest tolerated share of failed replications per grid cell.
pub const MAX_FAILURE_SHARE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    /// `c * 0.6 sin(1.5 pi x)` on `[0,1]`.
    Spline1d { c: f64 },
    /// `c * (0.4 sin(1.5 pi x1) + 0.1 (0.5 - x2)^3)` on `[0,1]^2`.
    Additive2d { c: f64 },
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Spline1d { .. } => 1,
            Model::Additive2d { .. } => 2,
        }
    }

    pub fn c(&self) -> f64 {
        match *self {
            Model::Spline1d { c } | Model::Additive2d { c } => c,
        }
    }

    /// The regression function including the signal multiplier `c`.
    pub fn signal(&self, x: &[f64]) -> f64 {
        match *self {
            Model::Spline1d { c } => c * 0.6 * (1.5 * PI * x[0]).sin(),
            Model::Additive2d { c } => c * (0.4 * (1.5 * PI * x[0]).sin() + 0.1 * (0.5 - x[1]).powi(3)),
        }
    }

    /// Kernel family used to fit this model with Sobolev order `m`.
    pub fn family(&self, m: u32) -> Family {
        match self {
            Model::Spline1d { .. } => Family::PeriodicSobolev { m },
            Model::Additive2d { .. } => Family::Additive { m, d: 2 },
        }
    }

    pub fn rate_family(&self) -> (RateFamily, usize) {
        match self {
            Model::Spline1d { .. } => (RateFamily::Spline, 1),
            Model::Additive2d { .. } => (RateFamily::Additive, 2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaSource {
    /// `scale` times the prescribed penalty for `task`.
    Rates {
        task: Task,
        #[serde(default = "one")]
        scale: f64,
    },
    Explicit { value: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sigma2Mode {
    Known { value: f64 },
    Plugin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PathChoice {
    /// Gram system when `n <= M` or no eigenbasis is available, else the
    /// truncated-feature system.
    #[default]
    Auto,
    ExactGram,
    TruncatedFeature,
}

impl PathChoice {
    pub fn resolve(self, spec: &Spectrum, n: usize) -> SolvePath {
        match self {
            PathChoice::ExactGram => SolvePath::ExactGram,
            PathChoice::TruncatedFeature => SolvePath::TruncatedFeature,
            PathChoice::Auto if spec.supports_feature_solve() && n > spec.len() => SolvePath::TruncatedFeature,
            PathChoice::Auto => SolvePath::ExactGram,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    #[serde(default = "default_m")]
    pub m: u32,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    pub rho_list: Vec<f64>,
    pub replications: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub lambda_source: LambdaSource,
    #[serde(default = "default_sigma2")]
    pub sigma2_mode: Sigma2Mode,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub solve_path: PathChoice,
    /// Worker threads; `None` uses all available cores.
    #[serde(default)]
    pub worker_count: Option<usize>,
    /// Points per axis of the MSE grid; 512 in 1D and 64 in 2D by default.
    #[serde(default)]
    pub grid_size: Option<usize>,
    #[serde(default)]
    pub compute_xi: bool,
}

fn default_m() -> u32 {
    2
}

fn default_alpha() -> f64 {
    0.05
}

fn default_sigma2() -> Sigma2Mode {
    Sigma2Mode::Known { value: 1.0 }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.replications == 0 {
            return bad("replications must be >= 1".into());
        }
        if self.n_list.is_empty() || self.rho_list.is_empty() {
            return bad("N_list and rho_list must be nonempty".into());
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n < 4) {
            return bad(format!("every N must be >= 4 (got {n})"));
        }
        if let Some(&r) = self.rho_list.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
            return bad(format!("every rho must lie in (0,1) (got {r})"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0,1) (got {})", self.alpha));
        }
        if self.m == 0 {
            return bad("m must be >= 1".into());
        }
        match self.lambda_source {
            LambdaSource::Rates { scale, .. } if !(scale > 0.0 && scale.is_finite()) => {
                return bad(format!("lambda scale must be positive (got {scale})"));
            }
            LambdaSource::Explicit { value } if !(value > 0.0 && value.is_finite()) => {
                return bad(format!("explicit lambda must be positive (got {value})"));
            }
            _ => {}
        }
        if let Sigma2Mode::Known { value } = self.sigma2_mode {
            if !(value > 0.0 && value.is_finite()) {
                return bad(format!("known sigma^2 must be positive (got {value})"));
            }
        }
        if let Some(g) = self.grid_size {
            if g < 2 {
                return bad(format!("grid_size must be >= 2 (got {g})"));
            }
        }
        if self.worker_count == Some(0) {
            return bad("worker_count must be >= 1".into());
        }
        Ok(())
    }

    pub fn lambda(&self, n_total: usize) -> Result<f64> {
        match self.lambda_source {
            LambdaSource::Explicit { value } => Ok(value),
            LambdaSource::Rates { task, scale } => {
                let (family, d) = self.model.rate_family();
                Ok(scale * prescribe(family, self.m, d, n_total as u64, task)?.lambda)
            }
        }
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size.unwrap_or(match self.model.dim() {
            1 => 512,
            _ => 64,
        })
    }
}

/// `s = max(1, round(N^rho))`, ties rounded up.
pub fn machine_count(n_total: usize, rho: f64) -> usize {
    ((n_total as f64).powf(rho) + 0.5).floor().max(1.0).min(n_total as f64) as usize
}

/// Draws `N` uniform design points and responses `f(x) + N(0,1)` from the
/// data stream of `seed`.
pub fn generate(model: &Model, n_total: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = model.dim();
    let mut coords = Vec::with_capacity(n_total * d);
    let mut ys = Vec::with_capacity(n_total);
    let mut x = vec![0.0; d];
    for _ in 0..n_total {
        for xk in x.iter_mut() {
            *xk = rng.random::<f64>();
        }
        let eps: f64 = rng.sample(StandardNormal);
        coords.extend_from_slice(&x);
        ys.push(model.signal(&x) + eps);
    }
    Dataset { xs: Points::new(d, coords).expect("coordinate count is a multiple of d"), ys, seed }
}

/// Grid mean of `(f_bar - f)^2` over midpoints (`grid_size` per axis).
pub fn mse_of_estimate(est: &DncEstimate, model: &Model, grid_size: usize) -> Result<f64> {
    if grid_size < 2 {
        return Err(Error::InvalidParameter(format!("grid_size must be >= 2 (got {grid_size})")));
    }
    let grid = Points::midpoint_grid(model.dim(), grid_size);
    let pred = predict_bar(est, &grid)?;
    let sq: f64 = grid.iter().zip(&pred).map(|(x, p)| (p - model.signal(x)).powi(2)).sum();
    Ok(sq / grid.len() as f64)
}

/// Everything one replication produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub seed: u64,
    pub mse: f64,
    pub test: TestReport,
    pub dropped: usize,
    pub xi_max: Option<f64>,
}

/// Settings shared by every replication of one grid cell.
#[derive(Debug, Clone)]
pub struct CellPlan {
    pub model: Model,
    pub spec: Spectrum,
    pub n_total: usize,
    pub s: usize,
    pub lambda: f64,
    pub path: PathChoice,
    pub sigma2: Sigma2Mode,
    pub alpha: f64,
    pub grid_size: usize,
    pub compute_xi: bool,
}

impl CellPlan {
    pub fn new(cfg: &ExperimentConfig, n_total: usize, rho: f64) -> Result<Self> {
        let lambda = cfg.lambda(n_total)?;
        let spec = Spectrum::for_lambda(cfg.model.family(cfg.m), lambda)?;
        Ok(Self {
            model: cfg.model,
            spec,
            n_total,
            s: machine_count(n_total, rho),
            lambda,
            path: cfg.solve_path,
            sigma2: cfg.sigma2_mode,
            alpha: cfg.alpha,
            grid_size: cfg.grid_size(),
            compute_xi: cfg.compute_xi,
        })
    }

    /// Fits the averaged estimator for replication seed `seed`.
    pub fn estimate(&self, seed: u64) -> Result<(Dataset, crate::dnc::Partition, DncEstimate)> {
        let data = generate(&self.model, self.n_total, seed);
        let part = partition(&data, self.s, seed)?;
        let path = self.path.resolve(&self.spec, part.n);
        let est = fit_all(&self.spec, &data, &part, self.lambda, path)?;
        Ok((data, part, est))
    }

    /// generate, partition, fit, score and test.
    pub fn run(&self, seed: u64) -> Result<Replication> {
        let (data, part, est) = self.estimate(seed)?;
        let mse = mse_of_estimate(&est, &self.model, self.grid_size)?;
        let sigma2 = match self.sigma2 {
            Sigma2Mode::Known { value } => Sigma2::Known(value),
            Sigma2Mode::Plugin => Sigma2::Plugin(estimate_sigma2(&est, &data, &part)?),
        };
        let test = test_statistic(&est, sigma2, self.alpha)?;
        let xi_max = if self.compute_xi {
            let xi = xi_diagnostic(&self.spec, &part, &data, self.lambda)?;
            Some(xi.into_iter().fold(0.0, f64::max))
        } else {
            None
        };
        Ok(Replication { seed, mse, test, dropped: part.dropped.len(), xi_max })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    #[serde(rename = "N")]
    pub n_total: usize,
    pub rho: f64,
    pub s: usize,
    pub n: usize,
    pub lambda: f64,
    pub truncation: usize,
    pub mse_mean: f64,
    pub mse_stderr: f64,
    pub rejection_rate: f64,
    pub rejection_stderr: f64,
    pub mean_xi_max: Option<f64>,
    /// Successful replications.
    pub reps: usize,
    pub failed: usize,
    pub dropped_points: usize,
    pub wall_time_secs: f64,
    /// Per-replication statistics in seed order.
    pub mse_values: Vec<f64>,
    pub z_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub cells: Vec<CellResult>,
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

fn run_cell(cfg: &ExperimentConfig, n_total: usize, rho: f64) -> Result<CellResult> {
    let start = Instant::now();
    let plan = CellPlan::new(cfg, n_total, rho)?;
    let outcomes: Vec<Result<Replication>> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| plan.run(cfg.base_seed.wrapping_add(r)))
        .collect();
    let total = outcomes.len();
    let mut ok = Vec::with_capacity(total);
    let mut first_err = None;
    for o in outcomes {
        match o {
            Ok(rep) => ok.push(rep),
            Err(e) => {
                log::warn!("replication failed at N={n_total}, rho={rho}: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    let failed = total - ok.len();
    if failed as f64 > MAX_FAILURE_SHARE * total as f64 || ok.is_empty() {
        return Err(Error::TooManyFailures {
            failed,
            total,
            first: first_err.map(|e| e.to_string()).unwrap_or_default(),
        });
    }
    let mse_values: Vec<f64> = ok.iter().map(|r| r.mse).collect();
    let z_values: Vec<f64> = ok.iter().map(|r| r.test.z).collect();
    let (mse_mean, mse_stderr) = mean_and_stderr(&mse_values);
    let k = ok.len() as f64;
    let rejection_rate = ok.iter().filter(|r| r.test.reject).count() as f64 / k;
    let rejection_stderr = (rejection_rate * (1.0 - rejection_rate) / k).sqrt();
    let mean_xi_max = cfg.compute_xi.then(|| ok.iter().filter_map(|r| r.xi_max).sum::<f64>() / k);
    let n = n_total / plan.s;
    Ok(CellResult {
        n_total,
        rho,
        s: plan.s,
        n,
        lambda: plan.lambda,
        truncation: plan.spec.len(),
        mse_mean,
        mse_stderr,
        rejection_rate,
        rejection_stderr,
        mean_xi_max,
        reps: ok.len(),
        failed,
        dropped_points: n_total - plan.s * n,
        wall_time_secs: start.elapsed().as_secs_f64(),
        mse_values,
        z_values,
    })
}

/// Runs every `(N, rho)` cell in `N`-major order. Replication `r` uses seed
/// `base_seed + r` in every cell; results do not depend on the worker count.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.worker_count {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    pool.install(|| {
        let mut cells = Vec::new();
        for &n_total in &cfg.n_list {
            for &rho in &cfg.rho_list {
                cells.push(run_cell(cfg, n_total, rho)?);
            }
        }
        Ok(ExperimentResult { cells })
    })
}

fn g17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the sweep CSV (dot decimals, LF line endings, 17 significant
/// digits for reals).
pub fn write_csv<W: Write>(result: &ExperimentResult, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for c in &result.cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            c.n_total,
            g17(c.rho),
            c.s,
            c.n,
            g17(c.lambda),
            g17(c.mse_mean),
            g17(c.mse_stderr),
            g17(c.rejection_rate),
            g17(c.rejection_stderr),
            c.reps,
            c.dropped_points
        )?;
    }
    Ok(())
}
