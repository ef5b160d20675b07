//! Embedded norm, the Wald-type statistic on the averaged estimator, the
//! plug-in noise variance and the separation rate.

use serde::{Deserialize, Serialize};

use crate::dnc::{predict_bar_direct, Dataset, DncEstimate, Partition};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::normal::inverse_normal_cdf;
use crate::points::Points;
use crate::solver::{cross_gram, predict, smoother_trace_on};
use crate::spectra::{SpectralSums, Spectrum};

/// Grid size per axis for the quadrature fallback (4096 nodes in total).
const QUADRATURE_1D: usize = 4096;
const QUADRATURE_2D: usize = 64;
/// Allowed quadrature error relative to `max(V, 1e-3)`.
const QUADRATURE_TOLERANCE: f64 = 1e-3;

/// `|f|^2 = V(f,f) + lambda |f|_H^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormBreakdown {
    pub v_part: f64,
    pub h_part: f64,
    pub lambda: f64,
    pub total: f64,
    /// Set when `v_part` came from grid quadrature instead of coefficients.
    pub quadrature_error: Option<f64>,
}

impl NormBreakdown {
    /// From Mercer coefficients `c_nu = V(f, phi_nu)`.
    pub fn from_coefficients(spec: &Spectrum, coeffs: &[f64], lambda: f64) -> Self {
        let mut v = 0.0;
        let mut h = 0.0;
        let mut total = 0.0;
        for (c, e) in coeffs.iter().zip(spec.eigenvalues()) {
            let c2 = c * c;
            let inv = e.inverse();
            v += c2;
            h += c2 * inv;
            total += c2 * (1.0 + lambda * inv);
        }
        Self { v_part: v, h_part: h, lambda, total, quadrature_error: None }
    }
}

/// Embedded norm of the averaged estimator. Families without a usable
/// eigenbasis fall back to uniform midpoint quadrature for `V` and to the
/// cross-gram quadratic form for `|f|_H^2`.
pub fn norm_breakdown(est: &DncEstimate) -> Result<NormBreakdown> {
    if let Some(c) = &est.mercer_coeffs {
        return Ok(NormBreakdown::from_coefficients(&est.spec, c, est.lambda));
    }
    let dim = est.spec.dim();
    let (fine, coarse) = match dim {
        1 => (Points::midpoint_grid(1, QUADRATURE_1D), Points::midpoint_grid(1, QUADRATURE_1D / 2)),
        2 => (Points::midpoint_grid(2, QUADRATURE_2D), Points::midpoint_grid(2, QUADRATURE_2D / 2)),
        _ => {
            return Err(Error::Unsupported { family: est.spec.family().to_string(), what: "a quadrature fallback" });
        }
    };
    let mean_sq = |g: &Points| -> Result<f64> {
        let f = predict_bar_direct(est, g)?;
        Ok(f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64)
    };
    let v = mean_sq(&fine)?;
    let err = (v - mean_sq(&coarse)?).abs();
    if err > QUADRATURE_TOLERANCE * v.max(1e-3) {
        return Err(Error::NumericalDegeneracy(format!(
            "quadrature error {err:.3e} for V(f,f) = {v:.3e} exceeds tolerance"
        )));
    }
    let h = rkhs_norm_sq_bar(est)?;
    Ok(NormBreakdown { v_part: v, h_part: h, lambda: est.lambda, total: v + est.lambda * h, quadrature_error: Some(err) })
}

/// `|f_bar|_H^2 = s^-2 sum_{j,k} alpha_j' R(X_j, X_k) alpha_k` for gram fits.
fn rkhs_norm_sq_bar(est: &DncEstimate) -> Result<f64> {
    if est.fits.iter().any(|f| f.coefficients.is_some()) {
        return Err(Error::Unsupported {
            family: est.spec.family().to_string(),
            what: "an RKHS norm for feature-path fits without an eigenbasis",
        });
    }
    let alphas: Vec<Vector> = est.fits.iter().map(|f| Vector::from_column_slice(&f.alpha)).collect();
    let mut total = 0.0;
    for j in 0..est.fits.len() {
        for k in j..est.fits.len() {
            let r = cross_gram(&est.spec, &est.fits[j].anchors, &est.fits[k].anchors);
            let q = alphas[j].dot(&(r * &alphas[k]));
            total += if j == k { q } else { 2.0 * q };
        }
    }
    let s = est.fits.len() as f64;
    Ok(total / (s * s))
}

/// Where the noise variance came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", content = "value", rename_all = "snake_case")]
pub enum Sigma2 {
    Known(f64),
    Plugin(f64),
}

impl Sigma2 {
    pub fn value(self) -> f64 {
        match self {
            Sigma2::Known(v) | Sigma2::Plugin(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    /// `T = |f_bar|^2`.
    pub t: f64,
    /// `sigma^2 / (N h)`.
    pub center: f64,
    /// `sqrt(2 sigma^4 N (N-1) sum w_nu^2) / N^2`.
    pub scale: f64,
    pub z: f64,
    pub alpha: f64,
    pub critical_value: f64,
    pub reject: bool,
    pub sigma2_used: Sigma2,
    pub n_total: usize,
    pub sums: SpectralSums,
}

/// Wald-type test of `f = 0` at level `alpha`. Center and scale share the
/// estimate's truncation.
pub fn test_statistic(est: &DncEstimate, sigma2: Sigma2, alpha: f64) -> Result<TestReport> {
    let s2 = sigma2.value();
    if !(s2 > 0.0) || !s2.is_finite() {
        return Err(Error::InvalidParameter(format!("noise variance must be positive (got {s2})")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("level alpha must lie in (0,1) (got {alpha})")));
    }
    let n_total = est.n_total;
    if n_total < 2 {
        return Err(Error::InvalidParameter(format!(
            "the null scale needs N >= 2 (got N = {n_total})"
        )));
    }
    let sums = est.spec.spectral_sums(est.lambda)?;
    let t = norm_breakdown(est)?.total;
    let n = n_total as f64;
    let center = s2 * sums.h_inv / n;
    let scale = (2.0 * s2 * s2 * n * (n - 1.0) * sums.h_inv2).sqrt() / (n * n);
    let z = (t - center) / scale;
    let critical_value = inverse_normal_cdf(1.0 - alpha / 2.0)?;
    Ok(TestReport {
        t,
        center,
        scale,
        z,
        alpha,
        critical_value,
        reject: z.abs() >= critical_value,
        sigma2_used: sigma2,
        n_total,
        sums,
    })
}

/// Pooled residual variance `sum_j RSS_j / sum_j (n - df_j)`, with `df_j`
/// the smoother trace of machine `j` on its fit's solve path.
pub fn estimate_sigma2(est: &DncEstimate, data: &Dataset, part: &Partition) -> Result<f64> {
    if part.s != est.fits.len() {
        return Err(Error::DimensionMismatch { expected: est.fits.len(), got: part.s });
    }
    let mut rss = 0.0;
    let mut dof = 0.0;
    for (j, fit) in est.fits.iter().enumerate() {
        let sub = part.subsample(data, j);
        let pred = predict(fit, &est.spec, &sub.xs)?;
        rss += sub.ys.iter().zip(&pred).map(|(y, f)| (y - f) * (y - f)).sum::<f64>();
        let df = smoother_trace_on(&est.spec, &sub, est.lambda, fit.solve_path)?;
        dof += sub.len() as f64 - df;
    }
    if !(dof > 0.0) {
        return Err(Error::NumericalDegeneracy(format!("residual degrees of freedom {dof:.3e} are not positive")));
    }
    Ok(rss / dof)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationInput {
    pub lambda: f64,
    pub n_total: f64,
    pub n: f64,
    pub f_norm_h: f64,
    pub a: f64,
    pub b: f64,
    /// Multiplier on the chaining term `b_{N,lambda}` (1 by default).
    pub constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub h: f64,
    pub b_term: f64,
    pub d_term: f64,
    /// `lambda^{1/2} |f|_H`.
    pub bias: f64,
    /// `(N h^{1/2})^{-1/2}`.
    pub sd: f64,
    /// `N^{-1/2}`.
    pub root_n: f64,
    /// `b^{1/2} (N h)^{-1/4}`.
    pub cross: f64,
}

/// `b = (lambda^{1/2}|f|_H + (Nh)^{-1/2}) sqrt(log^b N / (n h^a))` and
/// `d = lambda^{1/2}|f|_H + (N h^{1/2})^{-1/2} + N^{-1/2} + b^{1/2}(Nh)^{-1/4} + b`.
pub fn separation(spec: &Spectrum, input: SeparationInput) -> Result<SeparationReport> {
    let SeparationInput { lambda, n_total, n, f_norm_h, a, b, constant } = input;
    for (name, v) in [("N", n_total), ("n", n), ("a", a), ("b", b), ("constant", constant)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!("separation input {name} must be positive (got {v})")));
        }
    }
    if !(f_norm_h >= 0.0) {
        return Err(Error::InvalidParameter(format!("|f|_H must be nonnegative (got {f_norm_h})")));
    }
    let h = spec.spectral_sums(lambda)?.h();
    let bias = lambda.sqrt() * f_norm_h;
    let b_term = constant * (bias + (n_total * h).powf(-0.5)) * (n_total.ln().powf(b) / (n * h.powf(a))).sqrt();
    let sd = (n_total * h.sqrt()).powf(-0.5);
    let root_n = n_total.powf(-0.5);
    let cross = b_term.sqrt() * (n_total * h).powf(-0.25);
    Ok(SeparationReport { h, b_term, d_term: bias + sd + root_n + cross + b_term, bias, sd, root_n, cross })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::Family;
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_term_breakdown() {
        let spec = Spectrum::new(Family::Explicit { eigenvalues: vec![1.0] }, 1).unwrap();
        let nb = NormBreakdown::from_coefficients(&spec, &[2.0], 0.5);
        assert_eq!((nb.v_part, nb.h_part, nb.total), (4.0, 4.0, 6.0));
        let zero = NormBreakdown::from_coefficients(&spec, &[0.0], 0.5);
        assert_eq!((zero.v_part, zero.h_part, zero.total), (0.0, 0.0, 0.0));
    }

    #[test]
    fn separation_specializes_without_signal() {
        let spec = Spectrum::for_lambda(Family::PeriodicSobolev { m: 2 }, 1e-3).unwrap();
        let r = separation(
            &spec,
            SeparationInput { lambda: 1e-3, n_total: 1000.0, n: 100.0, f_norm_h: 0.0, a: 1.0, b: 1.0, constant: 1.0 },
        )
        .unwrap();
        let h = r.h;
        let b = (1000.0 * h).powf(-0.5) * (1000f64.ln() / (100.0 * h)).sqrt();
        assert_abs_diff_eq!(r.b_term, b, epsilon = 1e-15);
        assert_eq!(r.bias, 0.0);
        for part in [r.bias, r.sd, r.root_n, r.cross, r.b_term] {
            assert!(r.d_term >= part);
        }
        let bad = SeparationInput { lambda: 1e-3, n_total: 0.0, n: 1.0, f_norm_h: 0.0, a: 1.0, b: 1.0, constant: 1.0 };
        assert!(separation(&spec, bad).is_err());
    }
}
