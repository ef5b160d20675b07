//! Mercer data for the supported kernel families.
//!
//! Every family is described by an eigenvalue law and (where available) an
//! orthonormal eigenbasis on `[0,1]^d` under the uniform design. Basis
//! functions are addressed by a zero-based storage index:
//!
//! * `PeriodicSobolev { m }`: index 0 is the constant function (unpenalized,
//!   eigenvalue `+inf`), index `2k-1` is `sqrt(2) sin(2 pi k x)` and index
//!   `2k` is `sqrt(2) cos(2 pi k x)`, both with eigenvalue `(2 pi k)^(-2m)`.
//! * `Additive { m, d }`: index 0 is the global constant; index `i >= 1`
//!   belongs to component `(i-1) % d` and carries the periodic basis function
//!   `p = (i-1)/d + 1` of that coordinate, so components cycle fastest.
//!   [`Spectrum::additive_index`] converts from `(p, k)` coordinates.
//! * `GaussianRkhs { d, c }`: index `i` has eigenvalue `g^(2(i+1)+1)` with
//!   `g = (sqrt(5)-1)/2`; the kernel itself is evaluated in closed form.
//! * `ThinPlate { m, d }`: eigenvalues `(i+1)^(-2m/d)` only.
//! * `Explicit`: a user-supplied finite eigenvalue list on the cosine basis
//!   `1, sqrt(2) cos(pi x), sqrt(2) cos(2 pi x), ...`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::points::Points;

/// Relative tolerance on the truncated tail of `h_inv`.
pub const TAIL_TOLERANCE: f64 = 1e-4;
/// Largest truncation level for families evaluated through eigenfunctions.
pub const MAX_TRUNCATION: usize = 16_384;
/// Largest truncation level for eigenvalue-only families.
pub const MAX_TRUNCATION_SPECTRUM_ONLY: usize = 1 << 26;
/// Fixed truncation for the Gaussian family.
pub const GAUSSIAN_TRUNCATION: usize = 64;
const MIN_TRUNCATION: usize = 64;
const TRUNCATION_SCALE: f64 = 10.0;

/// Golden-ratio conjugate `(sqrt(5) - 1) / 2` governing the Gaussian spectrum.
pub fn gaussian_ratio() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    PeriodicSobolev { m: u32 },
    Additive { m: u32, d: usize },
    GaussianRkhs { d: usize, c: f64 },
    ThinPlate { m: u32, d: usize },
    Explicit { eigenvalues: Vec<f64> },
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::PeriodicSobolev { m } => write!(f, "periodic Sobolev (m={m})"),
            Family::Additive { m, d } => write!(f, "additive Sobolev (m={m}, d={d})"),
            Family::GaussianRkhs { d, c } => write!(f, "Gaussian RKHS (d={d}, c={c})"),
            Family::ThinPlate { m, d } => write!(f, "thin-plate spectrum (m={m}, d={d})"),
            Family::Explicit { eigenvalues } => {
                write!(f, "explicit spectrum ({} eigenvalues)", eigenvalues.len())
            }
        }
    }
}

impl Family {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            Family::PeriodicSobolev { m: 0 } => bad("Sobolev order m must be >= 1".into()),
            Family::Additive { m, d } if m == 0 || d == 0 => {
                bad(format!("additive family needs m >= 1 and d >= 1 (got m={m}, d={d})"))
            }
            Family::GaussianRkhs { d, c } if !(d == 1 || d == 2) || !(c > 0.0) => {
                bad(format!("Gaussian family needs d in {{1,2}} and c > 0 (got d={d}, c={c})"))
            }
            Family::ThinPlate { m, d } if d == 0 || 2 * m as usize <= d => {
                bad(format!("thin-plate spectrum needs 2m > d (got m={m}, d={d})"))
            }
            Family::Explicit { ref eigenvalues } => {
                if eigenvalues.iter().any(|&mu| !(mu > 0.0) || !mu.is_finite()) {
                    return bad("explicit eigenvalues must be finite and positive".into());
                }
                if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
                    return bad("explicit eigenvalues must be nonincreasing".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Input dimension `d` of the domain.
    pub fn dim(&self) -> usize {
        match *self {
            Family::PeriodicSobolev { .. } | Family::Explicit { .. } => 1,
            Family::Additive { d, .. } | Family::GaussianRkhs { d, .. } | Family::ThinPlate { d, .. } => d,
        }
    }

    fn has_constant(&self) -> bool {
        matches!(self, Family::PeriodicSobolev { .. } | Family::Additive { .. })
    }
}

/// Eigenvalue of a single Mercer pair; the constant function of the periodic
/// families is unpenalized and carries `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eigenvalue {
    Unpenalized,
    Finite(f64),
}

impl Eigenvalue {
    /// `1 / (1 + lambda / mu)`.
    pub fn weight(self, lambda: f64) -> f64 {
        match self {
            Eigenvalue::Unpenalized => 1.0,
            Eigenvalue::Finite(mu) => mu / (mu + lambda),
        }
    }

    /// `1 / mu`, zero for the unpenalized pair.
    pub fn inverse(self) -> f64 {
        match self {
            Eigenvalue::Unpenalized => 0.0,
            Eigenvalue::Finite(mu) => 1.0 / mu,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Eigenvalue::Unpenalized => None,
            Eigenvalue::Finite(mu) => Some(mu),
        }
    }
}

/// `h^{-1} = sum 1/(1+lambda/mu)` and `sum 1/(1+lambda/mu)^2` over the
/// retained eigenpairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSums {
    pub h_inv: f64,
    pub h_inv2: f64,
    pub lambda: f64,
    /// Truncation level the sums were taken over.
    pub len: usize,
    /// Upper bound on the omitted part of `h_inv`.
    pub tail_bound: f64,
}

impl SpectralSums {
    /// `h = 1 / h_inv`.
    pub fn h(&self) -> f64 {
        1.0 / self.h_inv
    }
}

/// A kernel family together with its truncation level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    family: Family,
    len: usize,
}

impl Spectrum {
    /// Spectrum with an explicit truncation level (number of retained
    /// eigenpairs, counting the constant where present).
    pub fn new(family: Family, len: usize) -> Result<Self> {
        family.validate()?;
        let cap = match &family {
            Family::Explicit { eigenvalues } => eigenvalues.len(),
            Family::ThinPlate { .. } => MAX_TRUNCATION_SPECTRUM_ONLY,
            _ => MAX_TRUNCATION + 1,
        };
        if len > cap {
            return Err(Error::InvalidParameter(format!(
                "truncation level {len} exceeds the maximum {cap} for {family}"
            )));
        }
        Ok(Self { family, len })
    }

    /// Spectrum truncated by the default rule for penalty `lambda`.
    ///
    /// Spline families start from `max(64, ceil(10 lambda^(-1/(2m))))`
    /// eigenpairs per component and double until the tail bound of `h_inv`
    /// drops below [`TAIL_TOLERANCE`]; the Gaussian family keeps 64 pairs.
    pub fn for_lambda(family: Family, lambda: f64) -> Result<Self> {
        family.validate()?;
        check_lambda(lambda)?;
        let rule = |exponent: f64| {
            let m = (TRUNCATION_SCALE * lambda.powf(-exponent)).ceil();
            if m.is_finite() && m < usize::MAX as f64 {
                (m as usize).max(MIN_TRUNCATION)
            } else {
                usize::MAX
            }
        };
        let (mut len, cap) = match family {
            Family::PeriodicSobolev { m } => {
                let per = rule(1.0 / (2.0 * m as f64)).div_ceil(2).saturating_mul(2);
                (per.saturating_add(1), MAX_TRUNCATION + 1)
            }
            Family::Additive { m, d } => {
                let per = rule(1.0 / (2.0 * m as f64)).div_ceil(2).saturating_mul(2);
                (per.saturating_mul(d).saturating_add(1), MAX_TRUNCATION + 1)
            }
            Family::GaussianRkhs { .. } => (GAUSSIAN_TRUNCATION, GAUSSIAN_TRUNCATION),
            Family::ThinPlate { m, d } => (rule(d as f64 / (2.0 * m as f64)), MAX_TRUNCATION_SPECTRUM_ONLY),
            Family::Explicit { ref eigenvalues } => (eigenvalues.len(), eigenvalues.len()),
        };
        len = len.min(cap);
        loop {
            let spec = Self { family: family.clone(), len };
            let sums = spec.raw_sums(lambda);
            if sums.tail_bound <= TAIL_TOLERANCE * sums.h_inv {
                return Ok(spec);
            }
            if len >= cap {
                return Err(Error::TruncationNotConverged {
                    len,
                    tail: sums.tail_bound,
                    tol: TAIL_TOLERANCE,
                });
            }
            len = match family {
                // keep sin/cos pairs complete in every component
                Family::PeriodicSobolev { .. } => (2 * len - 1).min(cap),
                Family::Additive { d, .. } => {
                    let per = (len - 1) / d;
                    (2 * per * d + 1).min(cap)
                }
                _ => len.saturating_mul(2).min(cap),
            };
        }
    }

    /// Same family, truncated for a different penalty. Explicit spectra are
    /// returned unchanged.
    pub fn retruncated(&self, lambda: f64) -> Result<Self> {
        match self.family {
            Family::Explicit { .. } => Ok(self.clone()),
            _ => Self::for_lambda(self.family.clone(), lambda),
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Truncation level `M`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    /// Whether index 0 is the unpenalized constant function.
    pub fn has_constant(&self) -> bool {
        self.family.has_constant() && self.len > 0
    }

    pub fn supports_eigenfunctions(&self) -> bool {
        match self.family {
            Family::PeriodicSobolev { .. } | Family::Additive { .. } | Family::Explicit { .. } => true,
            Family::GaussianRkhs { d, .. } => d == 1,
            Family::ThinPlate { .. } => false,
        }
    }

    /// Whether fits can use the truncated eigenbasis (the Gaussian Hermite
    /// functions are diagnostic only: they are not orthonormal under the
    /// uniform design).
    pub fn supports_feature_solve(&self) -> bool {
        matches!(
            self.family,
            Family::PeriodicSobolev { .. } | Family::Additive { .. } | Family::Explicit { .. }
        )
    }

    pub fn supports_kernel(&self) -> bool {
        !matches!(self.family, Family::ThinPlate { .. })
    }

    /// Storage index of within-component basis function `p >= 1` of
    /// component `k` (both one-based) for the additive family.
    pub fn additive_index(&self, p: usize, k: usize) -> Result<usize> {
        match self.family {
            Family::Additive { d, .. } if p >= 1 && (1..=d).contains(&k) => {
                let idx = (p - 1) * d + k;
                self.check_index(idx)?;
                Ok(idx)
            }
            Family::Additive { d, .. } => Err(Error::InvalidParameter(format!(
                "additive coordinates need p >= 1 and 1 <= k <= {d} (got p={p}, k={k})"
            ))),
            _ => Err(self.unsupported("additive indexing")),
        }
    }

    fn unsupported(&self, what: &'static str) -> Error {
        Error::Unsupported { family: self.family.to_string(), what }
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.len {
            Err(Error::IndexOutOfRange { index, len: self.len })
        } else {
            Ok(())
        }
    }

    pub fn eigenvalue(&self, index: usize) -> Result<Eigenvalue> {
        self.check_index(index)?;
        Ok(self.eigenvalue_unchecked(index))
    }

    /// Eigenvalue law; valid for any index below the family's cap.
    fn eigenvalue_unchecked(&self, index: usize) -> Eigenvalue {
        match self.family {
            Family::PeriodicSobolev { m } => periodic_eigenvalue(m, index),
            Family::Additive { m, d } => {
                if index == 0 {
                    Eigenvalue::Unpenalized
                } else {
                    periodic_eigenvalue(m, (index - 1) / d + 1)
                }
            }
            Family::GaussianRkhs { .. } => {
                let nu = (index + 1) as f64;
                Eigenvalue::Finite(gaussian_ratio().powf(2.0 * nu + 1.0))
            }
            Family::ThinPlate { m, d } => {
                let nu = (index + 1) as f64;
                Eigenvalue::Finite(nu.powf(-2.0 * m as f64 / d as f64))
            }
            Family::Explicit { ref eigenvalues } => Eigenvalue::Finite(eigenvalues[index]),
        }
    }

    /// All retained eigenvalues in index order.
    pub fn eigenvalues(&self) -> Vec<Eigenvalue> {
        (0..self.len).map(|i| self.eigenvalue_unchecked(i)).collect()
    }

    /// `1/(1+lambda/mu_i)` for every retained index.
    pub fn weights(&self, lambda: f64) -> Vec<f64> {
        (0..self.len).map(|i| self.eigenvalue_unchecked(i).weight(lambda)).collect()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
        let bounded = !matches!(self.family, Family::GaussianRkhs { .. });
        if bounded && x.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::OutOfDomain { point: x.to_vec(), dim: d });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutOfDomain { point: x.to_vec(), dim: d });
        }
        Ok(())
    }

    /// Checks every point of `xs` against the domain.
    pub fn check_points(&self, xs: &Points) -> Result<()> {
        xs.iter().try_for_each(|x| self.check_point(x))
    }

    /// `phi_index(x)`.
    pub fn eigenfunction(&self, index: usize, x: &[f64]) -> Result<f64> {
        if !self.supports_eigenfunctions() {
            return Err(self.unsupported("eigenfunctions"));
        }
        self.check_index(index)?;
        self.check_point(x)?;
        Ok(match self.family {
            Family::PeriodicSobolev { .. } => periodic_basis(index, x[0]),
            Family::Additive { d, .. } => {
                if index == 0 {
                    1.0
                } else {
                    periodic_basis((index - 1) / d + 1, x[(index - 1) % d])
                }
            }
            Family::Explicit { .. } => cosine_basis(index, x[0]),
            Family::GaussianRkhs { .. } => hermite_eigenfunction(index, x[0]),
            Family::ThinPlate { .. } => unreachable!(),
        })
    }

    /// Writes `phi_0(x), ..., phi_{M-1}(x)` into `out` (length `M`). The point
    /// must already be validated.
    pub(crate) fn features_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len);
        match self.family {
            Family::PeriodicSobolev { .. } => periodic_features(x[0], out),
            Family::Additive { d, .. } => {
                if out.is_empty() {
                    return;
                }
                out[0] = 1.0;
                let per = (self.len - 1).div_ceil(d);
                let mut comp = vec![0.0; per + 1];
                for (k, &xk) in x.iter().enumerate().take(d) {
                    periodic_features(xk, &mut comp);
                    for (p, &v) in comp.iter().enumerate().skip(1) {
                        let idx = (p - 1) * d + k + 1;
                        if idx < self.len {
                            out[idx] = v;
                        }
                    }
                }
            }
            Family::Explicit { .. } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = cosine_basis(i, x[0]);
                }
            }
            Family::GaussianRkhs { .. } => hermite_features(x[0], out),
            Family::ThinPlate { .. } => unreachable!("thin-plate spectrum has no eigenfunctions"),
        }
    }

    /// Feature matrix `Phi` with `Phi[(i, nu)] = phi_nu(x_i)`.
    pub fn feature_matrix(&self, xs: &Points) -> Result<Matrix> {
        if !self.supports_eigenfunctions() {
            return Err(self.unsupported("eigenfunctions"));
        }
        self.check_points(xs)?;
        Ok(self.feature_matrix_unchecked(xs))
    }

    pub(crate) fn feature_matrix_unchecked(&self, xs: &Points) -> Matrix {
        let mut phi = Matrix::zeros(xs.len(), self.len);
        let mut row = vec![0.0; self.len];
        for (i, x) in xs.iter().enumerate() {
            self.features_into(x, &mut row);
            for (j, &v) in row.iter().enumerate() {
                phi[(i, j)] = v;
            }
        }
        phi
    }

    /// Reproducing kernel of `H`: `R(x,y) = sum mu phi(x) phi(y)` over the
    /// penalized eigenpairs. The unpenalized constant is not part of `R`; the
    /// solver carries it as a free offset. Gaussian: `exp(-c |x-y|^2)`.
    pub fn kernel_r(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if !self.supports_kernel() {
            return Err(self.unsupported("a kernel"));
        }
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.kernel_r_unchecked(x, y))
    }

    pub(crate) fn kernel_r_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        if let Family::GaussianRkhs { c, .. } = self.family {
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            return (-c * d2).exp();
        }
        let mut fx = vec![0.0; self.len];
        let mut fy = vec![0.0; self.len];
        self.features_into(x, &mut fx);
        self.features_into(y, &mut fy);
        (0..self.len)
            .filter_map(|i| self.eigenvalue_unchecked(i).finite().map(|mu| mu * (fx[i] * fy[i])))
            .sum()
    }

    /// Kernel of the embedded inner product:
    /// `K(x,y) = sum phi(x) phi(y) / (1 + lambda/mu)`.
    pub fn kernel_k(&self, lambda: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        check_lambda(lambda)?;
        if !self.supports_eigenfunctions() {
            return Err(self.unsupported("eigenfunctions for the embedded kernel"));
        }
        self.check_point(x)?;
        self.check_point(y)?;
        let mut fx = vec![0.0; self.len];
        let mut fy = vec![0.0; self.len];
        self.features_into(x, &mut fx);
        self.features_into(y, &mut fy);
        Ok((0..self.len)
            .map(|i| self.eigenvalue_unchecked(i).weight(lambda) * (fx[i] * fy[i]))
            .sum())
    }

    fn raw_sums(&self, lambda: f64) -> SpectralSums {
        let (mut h_inv, mut h_inv2) = (0.0, 0.0);
        for i in 0..self.len {
            let w = self.eigenvalue_unchecked(i).weight(lambda);
            h_inv += w;
            h_inv2 += w * w;
        }
        SpectralSums { h_inv, h_inv2, lambda, len: self.len, tail_bound: self.tail_bound(lambda) }
    }

    /// Upper bound on `sum_{i >= M} 1/(1+lambda/mu_i)`, using `w <= mu/lambda`
    /// and an integral bound on the eigenvalue law.
    pub fn tail_bound(&self, lambda: f64) -> f64 {
        match self.family {
            Family::PeriodicSobolev { m } => {
                let complete = self.len.saturating_sub(1) / 2;
                2.0 * (2.0 * PI).powi(-2 * m as i32) * zeta_tail(2.0 * m as f64, complete) / lambda
            }
            Family::Additive { m, d } => {
                let complete = self.len.saturating_sub(1) / (2 * d);
                d as f64 * 2.0 * (2.0 * PI).powi(-2 * m as i32) * zeta_tail(2.0 * m as f64, complete)
                    / lambda
            }
            Family::GaussianRkhs { .. } => {
                let g = gaussian_ratio();
                g.powf(2.0 * self.len as f64 + 3.0) / ((1.0 - g * g) * lambda)
            }
            Family::ThinPlate { m, d } => zeta_tail(2.0 * m as f64 / d as f64, self.len) / lambda,
            Family::Explicit { .. } => 0.0,
        }
    }

    /// Effective dimension and the squared-weight sum at `lambda`.
    pub fn spectral_sums(&self, lambda: f64) -> Result<SpectralSums> {
        check_lambda(lambda)?;
        let sums = self.raw_sums(lambda);
        if sums.tail_bound > TAIL_TOLERANCE * sums.h_inv {
            return Err(Error::TruncationNotConverged {
                len: self.len,
                tail: sums.tail_bound,
                tol: TAIL_TOLERANCE,
            });
        }
        Ok(sums)
    }

    /// `max_{1<=k<M'} (sum_{nu>k} mu_nu) / (k mu_k)` over the finite
    /// eigenvalues (`M'` of them). Zero when fewer than two are retained.
    pub fn check_tail_sum(&self) -> f64 {
        let mus: Vec<f64> = (0..self.len).filter_map(|i| self.eigenvalue_unchecked(i).finite()).collect();
        if mus.len() < 2 {
            return 0.0;
        }
        let mut suffix = 0.0;
        let mut best: f64 = 0.0;
        for k in (1..mus.len()).rev() {
            // mus[k] is mu_{k+1} in one-based numbering
            suffix += mus[k];
            best = best.max(suffix / (k as f64 * mus[k - 1]));
        }
        best
    }

    /// `h_inv2 / h_inv` for each penalty in `grid`, each taken at that
    /// penalty's own truncation level.
    pub fn check_prop31_ratio(&self, grid: &[f64]) -> Result<Vec<f64>> {
        if grid.is_empty() {
            return Err(Error::InvalidParameter("lambda grid is empty".into()));
        }
        grid.iter()
            .map(|&lambda| {
                let sums = self.retruncated(lambda)?.spectral_sums(lambda)?;
                Ok(if sums.h_inv > 0.0 { sums.h_inv2 / sums.h_inv } else { 0.0 })
            })
            .collect()
    }

    /// Largest `|phi_nu(x)|` over the given points and all retained indices.
    pub fn eigenfunction_sup(&self, xs: &Points) -> Result<f64> {
        let phi = self.feature_matrix(xs)?;
        Ok(phi.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("penalty must be positive and finite (got {lambda})")))
    }
}

fn periodic_eigenvalue(m: u32, index: usize) -> Eigenvalue {
    if index == 0 {
        Eigenvalue::Unpenalized
    } else {
        let k = index.div_ceil(2) as f64;
        Eigenvalue::Finite((2.0 * PI * k).powi(-2 * m as i32))
    }
}

fn periodic_basis(index: usize, x: f64) -> f64 {
    if index == 0 {
        return 1.0;
    }
    let k = index.div_ceil(2) as f64;
    let (s, c) = (2.0 * PI * k * x).sin_cos();
    if index % 2 == 1 {
        SQRT_2 * s
    } else {
        SQRT_2 * c
    }
}

fn periodic_features(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    let mut i = 1;
    let mut k = 1.0;
    while i < out.len() {
        let (s, c) = (2.0 * PI * k * x).sin_cos();
        out[i] = SQRT_2 * s;
        if i + 1 < out.len() {
            out[i + 1] = SQRT_2 * c;
        }
        i += 2;
        k += 1.0;
    }
}

fn cosine_basis(index: usize, x: f64) -> f64 {
    if index == 0 {
        1.0
    } else {
        SQRT_2 * (PI * index as f64 * x).cos()
    }
}

/// Normalized Hermite eigenfunctions of the Gaussian kernel,
/// `(sqrt5/4)^(1/4) (2^(i-1) i!)^(-1/2) exp(-(sqrt5-1) x^2/4) H_i((sqrt5/2)^(1/2) x)`,
/// via the three-term recurrence of `H_i / sqrt(2^i i!)`.
fn hermite_features(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let s5 = 5f64.sqrt();
    let t = (s5 / 2.0).sqrt() * x;
    let scale = (s5 / 4.0).powf(0.25) * SQRT_2 * (-(s5 - 1.0) * x * x / 4.0).exp();
    let mut prev = 0.0;
    let mut cur = 1.0;
    for (i, o) in out.iter_mut().enumerate() {
        *o = scale * cur;
        let next = (2.0 / (i as f64 + 1.0)).sqrt() * t * cur - (i as f64 / (i as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
}

fn hermite_eigenfunction(index: usize, x: f64) -> f64 {
    let mut out = vec![0.0; index + 1];
    hermite_features(x, &mut out);
    out[index]
}

/// Upper bound on `sum_{k > start} k^(-p)` for `p > 1`.
fn zeta_tail(p: f64, start: usize) -> f64 {
    if start == 0 {
        1.0 + 1.0 / (p - 1.0)
    } else {
        (start as f64).powf(1.0 - p) / (p - 1.0)
    }
}
