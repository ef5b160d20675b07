//! Random partitioning, parallel per-machine fits and the averaged estimator.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_spectral_norm, Vector};
use crate::points::Points;
use crate::solver::{krr_fit, predict, MachineFit, SolvePath, Subsample};
use crate::spectra::Spectrum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub xs: Points,
    pub ys: Vec<f64>,
    pub seed: u64,
}

impl Dataset {
    pub fn new(xs: Points, ys: Vec<f64>, seed: u64) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidParameter(format!(
                "{} design points but {} responses",
                xs.len(),
                ys.len()
            )));
        }
        if ys.is_empty() {
            return Err(Error::InvalidParameter("dataset is empty".into()));
        }
        Ok(Self { xs, ys, seed })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub s: usize,
    pub n: usize,
    pub assignment: Vec<Vec<usize>>,
    pub dropped: Vec<usize>,
}

impl Partition {
    /// Total number of points used, `s * n`.
    pub fn used(&self) -> usize {
        self.s * self.n
    }

    pub fn subsample(&self, data: &Dataset, machine: usize) -> Subsample {
        let idx = &self.assignment[machine];
        Subsample {
            xs: data.xs.select(idx),
            ys: idx.iter().map(|&i| data.ys[i]).collect(),
            machine_id: machine,
        }
    }
}

/// Shuffles `0..N` with `seed` and cuts contiguous chunks of `floor(N/s)`;
/// the `N mod s` trailing indices are dropped.
pub fn partition(data: &Dataset, s: usize, seed: u64) -> Result<Partition> {
    partition_indices(data.len(), s, seed)
}

pub fn partition_indices(len: usize, s: usize, seed: u64) -> Result<Partition> {
    if s == 0 || s > len {
        return Err(Error::InvalidParameter(format!("machine count s = {s} must lie in [1, {len}]")));
    }
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut partition_rng(seed));
    let n = len / s;
    let assignment = idx.chunks(n).take(s).map(<[usize]>::to_vec).collect();
    let dropped = idx[s * n..].to_vec();
    Ok(Partition { s, n, assignment, dropped })
}

/// Stream 1 of the seed's ChaCha generator; data generation uses stream 0.
fn partition_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// The averaged estimator `f_bar = (1/s) sum_j f_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DncEstimate {
    pub fits: Vec<MachineFit>,
    /// `V(f_bar, phi_nu)` for each retained eigenpair, when an eigenbasis
    /// is available.
    pub mercer_coeffs: Option<Vec<f64>>,
    pub lambda: f64,
    pub spec: Spectrum,
    /// Sample size `s * n` actually used.
    pub n_total: usize,
}

impl DncEstimate {
    pub fn s(&self) -> usize {
        self.fits.len()
    }

    /// Builds the estimate from fits already computed, averaging the
    /// per-machine coefficients in machine order.
    pub fn from_fits(spec: &Spectrum, fits: Vec<MachineFit>, lambda: f64) -> Result<Self> {
        if fits.is_empty() {
            return Err(Error::InvalidParameter("no machine fits to average".into()));
        }
        let n_total = fits.iter().map(|f| f.anchors.len()).sum();
        let mercer_coeffs = if spec.supports_feature_solve() {
            let per: Vec<Vec<f64>> = fits.iter().map(|f| f.mercer_coefficients(spec)).collect::<Result<_>>()?;
            let s = per.len() as f64;
            let mut acc = vec![0.0; spec.len()];
            for c in &per {
                for (a, v) in acc.iter_mut().zip(c) {
                    *a += v;
                }
            }
            acc.iter_mut().for_each(|a| *a /= s);
            Some(acc)
        } else {
            None
        };
        Ok(Self { fits, mercer_coeffs, lambda, spec: spec.clone(), n_total })
    }
}

/// Fits every machine concurrently on the current rayon pool and averages
/// the results. Output does not depend on the pool width.
pub fn fit_all(spec: &Spectrum, data: &Dataset, part: &Partition, lambda: f64, path: SolvePath) -> Result<DncEstimate> {
    let fits: Vec<MachineFit> = (0..part.s)
        .into_par_iter()
        .map(|j| {
            krr_fit(spec, &part.subsample(data, j), lambda, path)
                .map_err(|e| Error::Machine { machine_id: j, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    DncEstimate::from_fits(spec, fits, lambda)
}

/// [`fit_all`] on a dedicated pool of `workers` threads.
pub fn fit_all_with_workers(
    spec: &Spectrum,
    data: &Dataset,
    part: &Partition,
    lambda: f64,
    path: SolvePath,
    workers: usize,
) -> Result<DncEstimate> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    pool.install(|| fit_all(spec, data, part, lambda, path))
}

/// `f_bar` at each point: the mean of the machine predictions, summed in
/// machine order.
pub fn predict_bar(est: &DncEstimate, xs_eval: &Points) -> Result<Vec<f64>> {
    if let Some(c) = &est.mercer_coeffs {
        let spec = &est.spec;
        if xs_eval.dim() != spec.dim() {
            return Err(Error::DimensionMismatch { expected: spec.dim(), got: xs_eval.dim() });
        }
        spec.check_points(xs_eval)?;
        let phi = spec.feature_matrix_unchecked(xs_eval);
        return Ok((phi * Vector::from_column_slice(c)).as_slice().to_vec());
    }
    predict_bar_direct(est, xs_eval)
}

/// `f_bar` by averaging the per-machine [`predict`] calls.
pub fn predict_bar_direct(est: &DncEstimate, xs_eval: &Points) -> Result<Vec<f64>> {
    let preds: Vec<Vec<f64>> = est.fits.par_iter().map(|f| predict(f, &est.spec, xs_eval)).collect::<Result<_>>()?;
    let s = preds.len() as f64;
    let mut out = vec![0.0; xs_eval.len()];
    for p in &preds {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= s);
    Ok(out)
}

/// `xi_j`: the spectral norm of `[(P_j - P)(phi_a phi_b)] / sqrt((1+lambda/mu_a)(1+lambda/mu_b))`
/// over the retained eigenpairs, for each machine. `P` is the uniform design
/// measure under which the basis is orthonormal.
pub fn xi_diagnostic(spec: &Spectrum, part: &Partition, data: &Dataset, lambda: f64) -> Result<Vec<f64>> {
    if !spec.supports_feature_solve() {
        return Err(Error::Unsupported {
            family: spec.family().to_string(),
            what: "an eigenbasis orthonormal under the design measure",
        });
    }
    spec.check_points(&data.xs)?;
    let w: Vec<f64> = spec.weights(lambda).iter().map(|v| v.sqrt()).collect();
    (0..part.s)
        .into_par_iter()
        .map(|j| {
            let sub = part.subsample(data, j);
            Ok(xi_of_points(spec, &sub.xs, &w))
        })
        .collect()
}

fn xi_of_points(spec: &Spectrum, xs: &Points, sqrt_w: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let phi = spec.feature_matrix_unchecked(xs);
    let mut delta = phi.transpose() * &phi / n;
    for a in 0..delta.nrows() {
        delta[(a, a)] -= 1.0;
    }
    for a in 0..delta.nrows() {
        for b in 0..delta.ncols() {
            delta[(a, b)] *= sqrt_w[a] * sqrt_w[b];
        }
    }
    symmetric_spectral_norm(delta)
}
