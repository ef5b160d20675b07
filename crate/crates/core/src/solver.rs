//! Single-machine kernel ridge regression.
//!
//! Each machine minimizes `(1/2n) sum (y_i - f(x_i))^2 + (lambda/2) |f|_H^2`.
//! For the periodic families the constant function has zero RKHS norm, so
//! the minimizer is `f = d + sum_i alpha_i R(x_i, .)` with an unpenalized
//! offset `d` and `sum_i alpha_i = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix, Vector};
use crate::points::Points;
use crate::spectra::{check_lambda, Family, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolvePath {
    /// Representer solution from the `n x n` gram system.
    ExactGram,
    /// Ridge problem in the `M`-dimensional truncated eigenbasis.
    TruncatedFeature,
}

/// One machine's share of the data.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsample {
    pub xs: Points,
    pub ys: Vec<f64>,
    pub machine_id: usize,
}

impl Subsample {
    pub fn new(xs: Points, ys: Vec<f64>, machine_id: usize) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidParameter(format!(
                "{} design points but {} responses",
                xs.len(),
                ys.len()
            )));
        }
        if ys.is_empty() {
            return Err(Error::InvalidParameter("subsample is empty".into()));
        }
        Ok(Self { xs, ys, machine_id })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }
}

/// A fitted machine. `ExactGram` fits carry `alpha` (one entry per anchor);
/// `TruncatedFeature` fits carry `coefficients` in the eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineFit {
    pub machine_id: usize,
    pub anchors: Points,
    pub alpha: Vec<f64>,
    /// Unpenalized constant (zero for families without a constant function).
    pub offset: f64,
    pub coefficients: Option<Vec<f64>>,
    pub lambda: f64,
    pub solve_path: SolvePath,
}

impl MachineFit {
    /// Coefficients `V(f, phi_nu)` of the fitted function in the truncated
    /// eigenbasis. Exact for either path because the gram path uses the same
    /// truncated `R`.
    pub fn mercer_coefficients(&self, spec: &Spectrum) -> Result<Vec<f64>> {
        if let Some(c) = &self.coefficients {
            return Ok(c.clone());
        }
        if !spec.supports_feature_solve() {
            return Err(Error::Unsupported {
                family: spec.family().to_string(),
                what: "an eigenbasis under the uniform design",
            });
        }
        let phi = spec.feature_matrix_unchecked(&self.anchors);
        let proj = phi.tr_mul(&Vector::from_column_slice(&self.alpha));
        Ok(spec
            .eigenvalues()
            .iter()
            .enumerate()
            .map(|(i, e)| match e.finite() {
                Some(mu) => mu * proj[i],
                None => self.offset,
            })
            .collect())
    }

    /// Squared RKHS norm `|f|_H^2` of the fitted function.
    pub fn rkhs_norm_sq(&self, spec: &Spectrum) -> Result<f64> {
        match self.solve_path {
            SolvePath::TruncatedFeature => {
                let c = self.coefficients.as_ref().expect("feature fit stores coefficients");
                Ok(spec.eigenvalues().iter().zip(c).map(|(e, ci)| ci * ci * e.inverse()).sum())
            }
            SolvePath::ExactGram => {
                let r = gram(spec, &self.anchors);
                let a = Vector::from_column_slice(&self.alpha);
                Ok(a.dot(&(&r * &a)))
            }
        }
    }
}

/// `R_n` with `(R_n)_{ik} = R(x_i, x_k)`.
pub(crate) fn gram(spec: &Spectrum, xs: &Points) -> Matrix {
    cross_gram(spec, xs, xs)
}

/// `R(a_i, b_k)` for all pairs; uses the truncated expansion for the
/// eigenbasis families and the closed form for the Gaussian kernel.
pub(crate) fn cross_gram(spec: &Spectrum, a: &Points, b: &Points) -> Matrix {
    if let Family::GaussianRkhs { .. } = spec.family() {
        return Matrix::from_fn(a.len(), b.len(), |i, k| spec.kernel_r_unchecked(a.get(i), b.get(k)));
    }
    let scaled: Vec<f64> = spec.eigenvalues().iter().map(|e| e.finite().unwrap_or(0.0).sqrt()).collect();
    let mut phi_a = spec.feature_matrix_unchecked(a);
    for (j, mut col) in phi_a.column_iter_mut().enumerate() {
        col *= scaled[j];
    }
    if std::ptr::eq(a, b) {
        return &phi_a * phi_a.transpose();
    }
    let mut phi_b = spec.feature_matrix_unchecked(b);
    for (j, mut col) in phi_b.column_iter_mut().enumerate() {
        col *= scaled[j];
    }
    &phi_a * phi_b.transpose()
}

fn check_fit_inputs(spec: &Spectrum, sub: &Subsample, lambda: f64) -> Result<()> {
    check_lambda(lambda)?;
    if !spec.supports_kernel() {
        return Err(Error::Unsupported { family: spec.family().to_string(), what: "a kernel" });
    }
    if sub.xs.len() != sub.ys.len() || sub.ys.is_empty() {
        return Err(Error::InvalidParameter("subsample must be nonempty with matching lengths".into()));
    }
    if sub.xs.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: sub.xs.dim() });
    }
    spec.check_points(&sub.xs)?;
    if sub.ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidParameter("responses must be finite".into()));
    }
    Ok(())
}

/// Fits one machine's kernel ridge regression.
pub fn krr_fit(spec: &Spectrum, sub: &Subsample, lambda: f64, path: SolvePath) -> Result<MachineFit> {
    check_fit_inputs(spec, sub, lambda)?;
    if sub.len() == 1 {
        log::warn!("machine {} fits a single observation", sub.machine_id);
    }
    match path {
        SolvePath::ExactGram => fit_exact(spec, sub, lambda),
        SolvePath::TruncatedFeature => fit_feature(spec, sub, lambda),
    }
}

fn fit_exact(spec: &Spectrum, sub: &Subsample, lambda: f64) -> Result<MachineFit> {
    let n = sub.len();
    let mut a = gram(spec, &sub.xs);
    for i in 0..n {
        a[(i, i)] += n as f64 * lambda;
    }
    let chol = cholesky(a, "R_n + n lambda I")?;
    let y = Vector::from_column_slice(&sub.ys);
    let u = chol.solve(&y);
    let (alpha, offset) = if spec.has_constant() {
        let v = chol.solve(&Vector::from_element(n, 1.0));
        let d = u.sum() / v.sum();
        (u - v * d, d)
    } else {
        (u, 0.0)
    };
    if alpha.iter().any(|v| !v.is_finite()) || !offset.is_finite() {
        return Err(Error::NumericalDegeneracy("gram solve produced non-finite coefficients".into()));
    }
    Ok(MachineFit {
        machine_id: sub.machine_id,
        anchors: sub.xs.clone(),
        alpha: alpha.as_slice().to_vec(),
        offset,
        coefficients: None,
        lambda,
        solve_path: SolvePath::ExactGram,
    })
}

/// `Phi' Phi / n + diag(lambda / mu)` and `Phi' y / n`.
fn feature_system(spec: &Spectrum, sub: &Subsample, lambda: f64) -> (Matrix, Vector) {
    let n = sub.len() as f64;
    let phi = spec.feature_matrix_unchecked(&sub.xs);
    let mut b = phi.transpose() * &phi / n;
    for (i, e) in spec.eigenvalues().iter().enumerate() {
        b[(i, i)] += lambda * e.inverse();
    }
    let rhs = phi.tr_mul(&Vector::from_column_slice(&sub.ys)) / n;
    (b, rhs)
}

fn fit_feature(spec: &Spectrum, sub: &Subsample, lambda: f64) -> Result<MachineFit> {
    if !spec.supports_feature_solve() {
        return Err(Error::Unsupported {
            family: spec.family().to_string(),
            what: "an eigenbasis for the truncated-feature path",
        });
    }
    let (b, rhs) = feature_system(spec, sub, lambda);
    let theta = cholesky(b, "feature normal matrix")?.solve(&rhs);
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalDegeneracy("feature solve produced non-finite coefficients".into()));
    }
    let offset = if spec.has_constant() { theta[0] } else { 0.0 };
    Ok(MachineFit {
        machine_id: sub.machine_id,
        anchors: sub.xs.clone(),
        alpha: Vec::new(),
        offset,
        coefficients: Some(theta.as_slice().to_vec()),
        lambda,
        solve_path: SolvePath::TruncatedFeature,
    })
}

/// Evaluates a fitted machine at `xs_eval`.
pub fn predict(fit: &MachineFit, spec: &Spectrum, xs_eval: &Points) -> Result<Vec<f64>> {
    if xs_eval.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: xs_eval.dim() });
    }
    spec.check_points(xs_eval)?;
    if xs_eval.is_empty() {
        return Ok(Vec::new());
    }
    match (fit.solve_path, spec.family()) {
        (SolvePath::ExactGram, Family::GaussianRkhs { .. }) => {
            let r = cross_gram(spec, xs_eval, &fit.anchors);
            let f = r * Vector::from_column_slice(&fit.alpha);
            Ok(f.iter().map(|v| v + fit.offset).collect())
        }
        _ => {
            let coeffs = Vector::from_vec(fit.mercer_coefficients(spec)?);
            let phi = spec.feature_matrix_unchecked(xs_eval);
            Ok((phi * coeffs).as_slice().to_vec())
        }
    }
}

/// `(1/2n) sum (y - f(x))^2 + (lambda/2) |f|_H^2` at a fit.
pub fn objective(fit: &MachineFit, spec: &Spectrum, sub: &Subsample) -> Result<f64> {
    let pred = predict(fit, spec, &sub.xs)?;
    let n = sub.len() as f64;
    let rss: f64 = sub.ys.iter().zip(&pred).map(|(y, f)| (y - f) * (y - f)).sum();
    Ok(rss / (2.0 * n) + 0.5 * fit.lambda * fit.rkhs_norm_sq(spec)?)
}

/// Trace of the smoother matrix on the exact gram path. Without a constant
/// function this is `tr(R_n (R_n + n lambda I)^{-1})`; with the unpenalized
/// constant it also counts the offset, so it lies in `[1, n]`.
pub fn smoother_trace(spec: &Spectrum, sub: &Subsample, lambda: f64) -> Result<f64> {
    smoother_trace_on(spec, sub, lambda, SolvePath::ExactGram)
}

/// Smoother trace computed on the given path.
pub fn smoother_trace_on(spec: &Spectrum, sub: &Subsample, lambda: f64, path: SolvePath) -> Result<f64> {
    check_fit_inputs(spec, sub, lambda)?;
    let n = sub.len();
    match path {
        SolvePath::ExactGram => {
            let mut a = gram(spec, &sub.xs);
            for i in 0..n {
                a[(i, i)] += n as f64 * lambda;
            }
            let inv = cholesky(a, "R_n + n lambda I")?.inverse();
            let mut resid = inv.trace();
            if spec.has_constant() {
                let v = inv.column_sum();
                resid -= v.dot(&v) / v.sum();
            }
            Ok(n as f64 - n as f64 * lambda * resid)
        }
        SolvePath::TruncatedFeature => {
            if !spec.supports_feature_solve() {
                return Err(Error::Unsupported {
                    family: spec.family().to_string(),
                    what: "an eigenbasis for the truncated-feature path",
                });
            }
            let (b, _) = feature_system(spec, sub, lambda);
            let mut data = b.clone();
            for (i, e) in spec.eigenvalues().iter().enumerate() {
                data[(i, i)] -= lambda * e.inverse();
            }
            let chol = cholesky(b, "feature normal matrix")?;
            Ok(chol.solve(&data).trace())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gaussian() -> Spectrum {
        Spectrum::new(Family::GaussianRkhs { d: 1, c: 1.0 }, 64).unwrap()
    }

    fn periodic(lambda: f64) -> Spectrum {
        Spectrum::for_lambda(Family::PeriodicSobolev { m: 2 }, lambda).unwrap()
    }

    fn sample(xs: Vec<f64>, ys: Vec<f64>) -> Subsample {
        Subsample::new(Points::from_scalars(xs), ys, 0).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_fit() {
        let spec = periodic(1e-3);
        let sub = sample(vec![0.1, 0.5, 0.8], vec![0.0; 3]);
        for path in [SolvePath::ExactGram, SolvePath::TruncatedFeature] {
            let fit = krr_fit(&spec, &sub, 1e-3, path).unwrap();
            assert!(fit.alpha.iter().all(|&a| a == 0.0));
            assert_eq!(fit.offset, 0.0);
            let pred = predict(&fit, &spec, &Points::from_scalars(vec![0.2, 0.7])).unwrap();
            assert!(pred.iter().all(|&p| p == 0.0));
        }
    }

    #[test]
    fn single_observation_gaussian() {
        let spec = gaussian();
        let sub = sample(vec![0.3], vec![2.0]);
        let fit = krr_fit(&spec, &sub, 0.25, SolvePath::ExactGram).unwrap();
        // R(x,x) = 1, so alpha = y / (1 + lambda)
        assert_abs_diff_eq!(fit.alpha[0], 2.0 / 1.25, epsilon = 1e-14);
    }

    #[test]
    fn single_observation_periodic_is_constant() {
        let spec = periodic(1e-2);
        let sub = sample(vec![0.3], vec![2.0]);
        let fit = krr_fit(&spec, &sub, 1e-2, SolvePath::ExactGram).unwrap();
        assert_abs_diff_eq!(fit.offset, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.alpha[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn smoother_trace_limits() {
        let xs: Vec<f64> = (0..10).map(|i| (i as f64 + 0.3) / 10.0).collect();
        let sub = sample(xs, vec![0.0; 10]);
        let g = gaussian();
        assert!(smoother_trace(&g, &sub, 1e8).unwrap() < 1e-6);
        let p = periodic(1e-2);
        // the unpenalized constant survives any penalty
        assert_abs_diff_eq!(smoother_trace(&p, &sub, 1e8).unwrap(), 1.0, epsilon = 1e-6);
        let tight = Spectrum::new(Family::PeriodicSobolev { m: 2 }, 129).unwrap();
        assert_abs_diff_eq!(smoother_trace(&tight, &sub, 1e-14).unwrap(), 10.0, epsilon = 1e-4);
    }

    #[test]
    fn feature_trace_matches_gram_trace() {
        let spec = periodic(1e-3);
        let xs: Vec<f64> = (0..40).map(|i| ((i * 37) % 40) as f64 / 40.0 + 0.01).collect();
        let sub = sample(xs, vec![0.0; 40]);
        let a = smoother_trace_on(&spec, &sub, 1e-3, SolvePath::ExactGram).unwrap();
        let b = smoother_trace_on(&spec, &sub, 1e-3, SolvePath::TruncatedFeature).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-8);
    }

    #[test]
    fn interpolates_in_the_small_penalty_limit() {
        let spec = Spectrum::new(Family::PeriodicSobolev { m: 2 }, 129).unwrap();
        let xs: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (5.0 * x).sin() + 0.3).collect();
        let sub = sample(xs, ys.clone());
        let fit = krr_fit(&spec, &sub, 1e-10, SolvePath::ExactGram).unwrap();
        let pred = predict(&fit, &spec, &sub.xs).unwrap();
        for (p, y) in pred.iter().zip(&ys) {
            assert!((p - y).abs() < 1e-5, "{p} vs {y}");
        }
    }

    #[test]
    fn rejects_invalid_inputs() {
        let spec = periodic(1e-2);
        let sub = sample(vec![0.5], vec![1.0]);
        assert!(krr_fit(&spec, &sub, 0.0, SolvePath::ExactGram).is_err());
        assert!(Subsample::new(Points::from_scalars(vec![0.1, 0.2]), vec![1.0], 0).is_err());
        let bad = sample(vec![1.5], vec![1.0]);
        assert!(matches!(krr_fit(&spec, &bad, 1e-2, SolvePath::ExactGram), Err(Error::OutOfDomain { .. })));
        let g = gaussian();
        assert!(matches!(krr_fit(&g, &sub, 1e-2, SolvePath::TruncatedFeature), Err(Error::Unsupported { .. })));
        let tp = Spectrum::new(Family::ThinPlate { m: 2, d: 1 }, 10).unwrap();
        assert!(matches!(krr_fit(&tp, &sub, 1e-2, SolvePath::ExactGram), Err(Error::Unsupported { .. })));
    }
}
