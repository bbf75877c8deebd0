//! Structured signal priors and their induced corrections.
//!
//! Two classical priors fit the stationary framework as limiting cases. A
//! subspace prior says the signal lives in the range of a tall generator `A`
//! with coefficient covariance `Sigma_d`; its noiseless correction collapses
//! to an oblique projection that does not depend on `Sigma_d` at all. A
//! smoothness prior penalizes spectral content through a positive profile
//! `v(lambda)` and induces the covariance `(rho^2 / n) (V^T V)^-1`, whose
//! correction does not depend on the energy budget `rho`. Both facts are what
//! the cross-route tests pin down.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::sampling::{
    bandlimited_s, spectral_reconstructor, spectral_sampler, ReconstructionOperator,
    SamplingOperator,
};
use crate::spectral::{check_len, SpectralBasis, SpectralKernel};
use crate::stationarity::CovarianceMatrix;
use crate::wiener::{
    predefined_matrix, CorrectionFilter, CorrectionMethod, RecoveryPipeline,
};

/// Signal model `x = A d` with `d` zero-mean, covariance `Sigma_d`.
#[derive(Debug, Clone)]
pub struct SubspacePrior {
    a: DMatrix<f64>,
    sigma_d: DMatrix<f64>,
}

impl SubspacePrior {
    /// Validates a full-column-rank generator and a symmetric positive
    /// definite coefficient covariance.
    pub fn new(a: DMatrix<f64>, sigma_d: DMatrix<f64>) -> Result<Self> {
        let k = a.ncols();
        if a.nrows() < k {
            return Err(Error::InvalidParameter(format!(
                "subspace generator must be tall, got {}x{k}",
                a.nrows()
            )));
        }
        let sv = a.clone().singular_values();
        let max = sv.max();
        let min = sv.min();
        if min <= 1e-12 * max.max(1.0) {
            return Err(Error::InvalidParameter(
                "subspace generator is rank deficient".into(),
            ));
        }
        check_len("coefficient covariance", k, sigma_d.nrows())?;
        check_len("coefficient covariance", k, sigma_d.ncols())?;
        let scale = sigma_d.amax().max(1.0);
        if linalg::asymmetry(&sigma_d) > 1e-10 * scale {
            return Err(Error::InvalidParameter(
                "coefficient covariance is not symmetric".into(),
            ));
        }
        let eigs = sigma_d.symmetric_part().symmetric_eigenvalues();
        if eigs.min() <= 0.0 {
            return Err(Error::InvalidParameter(
                "coefficient covariance must be positive definite".into(),
            ));
        }
        Ok(SubspacePrior { a, sigma_d })
    }

    /// Prior spanned by the `k` lowest-frequency harmonics.
    pub fn from_leading_harmonics(
        basis: &SpectralBasis,
        k: usize,
        sigma_d: DMatrix<f64>,
    ) -> Result<Self> {
        if k == 0 || k > basis.n() {
            return Err(Error::KExceedsN { k, n: basis.n() });
        }
        let a = DMatrix::from_fn(basis.n(), k, |i, j| basis.u()[(i, j)]);
        SubspacePrior::new(a, sigma_d)
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn sigma_d(&self) -> &DMatrix<f64> {
        &self.sigma_d
    }

    /// Induced signal covariance `A Sigma_d A^T`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let m = &self.a * &self.sigma_d * self.a.transpose();
        (&m + m.transpose()) * 0.5
    }
}

/// Correction under a subspace prior with measurement noise: the generic
/// predefined-basis solution evaluated at `Gamma_x = A Sigma_d A^T`.
pub fn subspace_correction(
    prior: &SubspacePrior,
    s: &SamplingOperator,
    w: &ReconstructionOperator,
    gamma_eta: &DMatrix<f64>,
) -> Result<CorrectionFilter> {
    predefined_matrix(s, w, &prior.covariance(), gamma_eta, CorrectionMethod::Subspace)
}

/// Noiseless subspace correction `(W^T W)^-1 W^T A (S^* A)^-1`, an oblique
/// projection. Independent of `Sigma_d`; requires as many measurements as
/// subspace dimensions.
pub fn subspace_correction_noiseless(
    prior: &SubspacePrior,
    s: &SamplingOperator,
    w: &ReconstructionOperator,
) -> Result<CorrectionFilter> {
    check_len("pipeline width n", s.n(), w.n())?;
    check_len("pipeline width k", s.k(), w.k())?;
    check_len("subspace dimension", s.k(), prior.a.ncols())?;
    check_len("subspace generator", s.n(), prior.a.nrows())?;
    let wm = w.matrix();
    let wtw = wm.transpose() * wm;
    let wta = wm.transpose() * &prior.a;
    let sa = s.matrix() * &prior.a;
    let q = linalg::solve_spd(&wtw, &wta, "W^T W")?;
    let ht = linalg::solve_square(&sa.transpose(), &q.transpose(), "S^* A")?;
    let mut h = ht.transpose();
    // one refinement pass against W^T W H (S^* A) = W^T A
    let r = &wta - &wtw * &h * &sa;
    let dq = linalg::solve_spd(&wtw, &r, "W^T W")?;
    let dht = linalg::solve_square(&sa.transpose(), &dq.transpose(), "S^* A")?;
    h += dht.transpose();
    Ok(CorrectionFilter::from_parts(
        h,
        CorrectionMethod::Subspace,
        Some(w.meta()),
    ))
}

/// Smoothness prior: spectral profile `v` (strictly positive on the spectrum)
/// and energy budget `rho`.
#[derive(Debug, Clone)]
pub struct SmoothnessPrior {
    kernel: SpectralKernel,
    rho: f64,
}

impl SmoothnessPrior {
    pub fn new(kernel: SpectralKernel, rho: f64) -> Result<Self> {
        // NaN must fail this check too
        if rho.is_nan() || rho <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "smoothness budget rho must be positive, got {rho}"
            )));
        }
        Ok(SmoothnessPrior { kernel, rho })
    }

    pub fn kernel(&self) -> &SpectralKernel {
        &self.kernel
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

fn positive_profile(prior: &SmoothnessPrior, basis: &SpectralBasis) -> Result<DVector<f64>> {
    let v = prior.kernel.values_on(basis)?;
    for (i, &value) in v.iter().enumerate() {
        if value <= 0.0 {
            return Err(Error::KernelNotPositive {
                name: prior.kernel.name().to_string(),
                lambda: basis.lambda()[i],
                value,
            });
        }
    }
    Ok(v)
}

/// Inverse penalty operator `(V^T V)^-1 = U diag(v^-2) U^T`, shared by the
/// covariance and the correction below.
fn inverse_penalty(basis: &SpectralBasis, v: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = basis.u().clone();
    for (j, value) in v.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / (value * value));
    }
    let m = scaled * basis.u().transpose();
    (&m + m.transpose()) * 0.5
}

/// Covariance induced by the smoothness prior, `(rho^2 / n) (V^T V)^-1`.
pub fn smoothness_covariance(
    prior: &SmoothnessPrior,
    basis: &SpectralBasis,
) -> Result<CovarianceMatrix> {
    let v = positive_profile(prior, basis)?;
    let scale = prior.rho * prior.rho / basis.n() as f64;
    CovarianceMatrix::new(inverse_penalty(basis, &v) * scale)
}

/// Correction induced by the smoothness prior for noiseless measurements:
/// `(W^T W)^-1 W^T P S (S^* P S)^-1` with `P = (V^T V)^-1`. The budget `rho`
/// cancels between the two `P` factors, which is exactly the invariance the
/// tests assert against the generic route.
pub fn smoothness_correction(
    prior: &SmoothnessPrior,
    basis: &SpectralBasis,
    s: &SamplingOperator,
    w: &ReconstructionOperator,
) -> Result<CorrectionFilter> {
    check_len("pipeline width n", s.n(), w.n())?;
    check_len("pipeline width k", s.k(), w.k())?;
    check_len("pipeline width n", s.n(), basis.n())?;
    let v = positive_profile(prior, basis)?;
    let p = inverse_penalty(basis, &v);
    let wm = w.matrix();
    let wtw = wm.transpose() * wm;
    let ps = &p * s.synthesis();
    let wps = wm.transpose() * &ps;
    let sps = s.matrix() * &ps;
    let sps = (&sps + sps.transpose()) * 0.5;
    let q = linalg::solve_spd(&wtw, &wps, "W^T W")?;
    let ht = linalg::solve_spd(&sps, &q.transpose(), "S^* P S")?;
    let mut h = ht.transpose();
    // one refinement pass against W^T W H (S^* P S) = W^T P S
    let r = &wps - &wtw * &h * &sps;
    let dq = linalg::solve_spd(&wtw, &r, "W^T W")?;
    let dht = linalg::solve_spd(&sps, &dq.transpose(), "S^* P S")?;
    h += dht.transpose();
    Ok(CorrectionFilter::from_parts(
        h,
        CorrectionMethod::Smoothness,
        Some(w.meta()),
    ))
}

/// Classical low-pass baseline: ideal band selection in the frequency domain
/// with no correction. Exact on signals from the low band, blind to the rest.
pub fn bandlimited_baseline(
    basis: &SpectralBasis,
    m_ratio: usize,
    u_reduced: Option<&DMatrix<f64>>,
) -> Result<RecoveryPipeline> {
    if m_ratio == 0 {
        return Err(Error::InvalidParameter("fold ratio must be >= 1".into()));
    }
    if !basis.n().is_multiple_of(m_ratio) {
        return Err(Error::NotDivisible {
            n: basis.n(),
            m: m_ratio,
        });
    }
    let k = basis.n() / m_ratio;
    let kernel = bandlimited_s(k);
    let s = spectral_sampler(basis, &kernel, m_ratio, u_reduced)?;
    let w = spectral_reconstructor(basis, &kernel, m_ratio, u_reduced)?;
    RecoveryPipeline::new(s, CorrectionFilter::identity(k), w)
}
