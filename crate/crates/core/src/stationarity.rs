//! Wide-sense stationary processes on graphs.
//!
//! A process is stationary for a basis when its covariance is diagonalized by
//! the Laplacian eigenvectors, i.e. it is fully described by a nonnegative
//! power spectrum over the graph frequencies. This module builds such
//! processes from a spectrum, draws realizations, estimates spectra from
//! batches, and provides the two structural probes used by the theory: the
//! modulation operator with its Hadamard-mask covariance closed form, and the
//! isometric graph translation operator.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg;
use crate::spectral::{check_len, SpectralBasis};

/// Zero-mean stationary process described by a graph power spectrum.
#[derive(Debug, Clone)]
pub struct GwssProcess {
    basis: Arc<SpectralBasis>,
    psd: DVector<f64>,
    mean: f64,
}

impl GwssProcess {
    /// Builds a process from a nonnegative spectrum. Tiny negative roundoff
    /// (above `-1e-12`) is clamped to zero; anything lower is rejected.
    /// The mean is fixed at zero.
    pub fn new(basis: Arc<SpectralBasis>, mut psd: DVector<f64>) -> Result<Self> {
        check_len("psd", basis.n(), psd.len())?;
        for (i, v) in psd.iter_mut().enumerate() {
            if *v < -1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "psd must be nonnegative, got {v} at index {i}"
                )));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(GwssProcess {
            basis,
            psd,
            mean: 0.0,
        })
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn psd(&self) -> &DVector<f64> {
        &self.psd
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }
}

/// White stationary noise with a flat spectrum `sigma2`.
pub fn gwss_noise(basis: Arc<SpectralBasis>, sigma2: f64) -> Result<GwssProcess> {
    if sigma2 < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be nonnegative, got {sigma2}"
        )));
    }
    let n = basis.n();
    GwssProcess::new(basis, DVector::from_element(n, sigma2))
}

/// Symmetric positive semidefinite covariance matrix.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    matrix: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Validates symmetry (within `1e-10` of the largest entry) and positive
    /// semidefiniteness (eigenvalues above `-1e-9` of the trace scale).
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        let scale = matrix.amax().max(1.0);
        let asym = linalg::asymmetry(&matrix);
        if asym > 1e-10 * scale {
            return Err(Error::InvalidParameter(format!(
                "covariance is not symmetric (deviation {asym:.3e})"
            )));
        }
        let eigs = matrix.symmetric_part().symmetric_eigenvalues();
        let floor = -1e-9 * matrix.trace().abs().max(1.0);
        if let Some(bad) = eigs.iter().find(|&&e| e < floor) {
            return Err(Error::InvalidParameter(format!(
                "covariance has negative eigenvalue {bad}"
            )));
        }
        Ok(CovarianceMatrix { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Covariance `U diag(psd) U^T` of a stationary process.
pub fn covariance_from_psd(process: &GwssProcess) -> CovarianceMatrix {
    let basis = process.basis.as_ref();
    let mut scaled = basis.u().clone();
    for (j, v) in process.psd.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*v);
    }
    let m = scaled * basis.u().transpose();
    // exact symmetry despite roundoff in the congruence
    let matrix = (&m + m.transpose()) * 0.5;
    CovarianceMatrix { matrix }
}

/// Relative off-diagonal mass of `U^T Gamma U`; zero iff the basis
/// diagonalizes the covariance.
pub fn diagonalizability_residual(basis: &SpectralBasis, gamma: &DMatrix<f64>) -> f64 {
    let rotated = basis.u().transpose() * gamma * basis.u();
    linalg::off_diagonal_ratio(&rotated)
}

/// Checks stationarity structure: `U^T Gamma U` diagonal within `tol`.
pub fn is_diagonalizable(basis: &SpectralBasis, gamma: &DMatrix<f64>, tol: f64) -> bool {
    diagonalizability_residual(basis, gamma) <= tol
}

/// Normalized commutator `|Gamma L - L Gamma| / (|Gamma| |L|)`; vanishes
/// exactly when the covariance commutes with the Laplacian, which for simple
/// spectra is equivalent to diagonalizability.
pub fn commutation_residual(laplacian: &DMatrix<f64>, gamma: &DMatrix<f64>) -> f64 {
    let scale = laplacian.norm() * gamma.norm();
    if scale == 0.0 {
        return 0.0;
    }
    (gamma * laplacian - laplacian * gamma).norm() / scale
}

/// Spectrum estimate from realizations: mean squared transform coefficient
/// per frequency bin.
pub fn estimate_psd(basis: &SpectralBasis, samples: &[DVector<f64>]) -> Result<DVector<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let mut acc = DVector::zeros(basis.n());
    for x in samples {
        check_len("sample", basis.n(), x.len())?;
        let xhat = basis.u().transpose() * x;
        for i in 0..basis.n() {
            acc[i] += xhat[i] * xhat[i];
        }
    }
    Ok(acc / samples.len() as f64)
}

/// Draws one realization `x = U diag(sqrt(psd)) z` with `z` iid standard
/// normal from a ChaCha stream; bitwise deterministic per seed.
pub fn sample_signal(process: &GwssProcess, seed: u64) -> DVector<f64> {
    let basis = process.basis.as_ref();
    let n = basis.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut zhat = DVector::zeros(n);
    for i in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        zhat[i] = process.psd[i].sqrt() * z;
    }
    basis.u() * zhat + DVector::from_element(n, process.mean)
}

/// Complex modulation mask: entry `(m, k)` is `exp(j 2 pi k / n)`, constant
/// down each column.
pub fn modulation_matrix(n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |_, k| phase(2.0 * std::f64::consts::PI * k as f64 / n as f64))
}

/// Modulates a signal against the harmonic profile at vertex `vertex`:
/// the mask applied to `diag(u_k[vertex]) U^T x`. Every entry of the result
/// carries the same value, a direct consequence of the mask's constant
/// columns.
pub fn modulate(
    basis: &SpectralBasis,
    x: &DVector<f64>,
    vertex: usize,
) -> Result<DVector<Complex64>> {
    let n = basis.n();
    check_len("signal", n, x.len())?;
    if vertex >= n {
        return Err(Error::IndexOutOfRange { index: vertex, n });
    }
    let xhat = basis.u().transpose() * x;
    let mut weighted = DVector::from_element(n, Complex64::new(0.0, 0.0));
    for k in 0..n {
        weighted[k] = Complex64::new(basis.u()[(vertex, k)] * xhat[k], 0.0);
    }
    Ok(modulation_matrix(n) * weighted)
}

/// Hadamard phase mask for modulated covariances: entry `(i, l)` is
/// `exp(-j 2 pi (i - l) / n)`, with a unit diagonal.
pub fn xi_matrix(n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |i, l| {
        phase(-2.0 * std::f64::consts::PI * (i as f64 - l as f64) / n as f64)
    })
}

/// Closed form for the covariance of a modulated process:
/// `U (Gamma_hat o Xi) U^H` with `Gamma_hat = U^T Gamma U`. For stationary
/// covariances the mask is invisible (the unit diagonal multiplies a diagonal
/// spectrum) and the result equals `Gamma` itself.
pub fn modulated_covariance(basis: &SpectralBasis, gamma: &DMatrix<f64>) -> DMatrix<Complex64> {
    let n = basis.n();
    let gamma_hat = basis.u().transpose() * gamma * basis.u();
    let xi = xi_matrix(n);
    let masked = DMatrix::from_fn(n, n, |i, l| xi[(i, l)] * gamma_hat[(i, l)]);
    let uc = complexify(basis.u());
    &uc * masked * uc.adjoint()
}

/// Spectral spread bound of a graph: `max_m sqrt(2 d_m (d_m + dbar_m))`
/// where `dbar_m` is the weighted mean degree around vertex `m`. Dominates
/// the largest Laplacian eigenvalue.
pub fn rho_g(graph: &Graph) -> f64 {
    let degrees = graph.degrees();
    let w = graph.weights();
    let n = graph.n();
    let mut best = 0.0f64;
    for m in 0..n {
        let dm = degrees[m];
        if dm == 0.0 {
            continue;
        }
        let around: f64 = (0..n).map(|j| w[(m, j)] * degrees[j]).sum();
        let dbar = around / dm;
        best = best.max((2.0 * dm * (dm + dbar)).sqrt());
    }
    best
}

/// Isometric graph translation `U exp(j pi sqrt(lambda / rho)) U^H` built on
/// the spread bound `rho = rho_g(graph)`. Unitary, and fixes the constant
/// signal on connected graphs.
pub fn translation_operator(basis: &SpectralBasis, graph: &Graph) -> DMatrix<Complex64> {
    let rho = rho_g(graph);
    let n = basis.n();
    let uc = complexify(basis.u());
    let mut scaled = uc.clone();
    for k in 0..n {
        let ph = phase(std::f64::consts::PI * sqrt_ratio(basis.lambda()[k], rho));
        scaled.column_mut(k).apply(|v| *v *= ph);
    }
    scaled * uc.adjoint()
}

/// Hadamard phase mask for translated covariances: entry `(i, l)` is
/// `exp(j pi (sqrt(lambda_i / rho) - sqrt(lambda_l / rho)))`.
pub fn theta_matrix(basis: &SpectralBasis, rho: f64) -> DMatrix<Complex64> {
    let n = basis.n();
    DMatrix::from_fn(n, n, |i, l| {
        phase(
            std::f64::consts::PI
                * (sqrt_ratio(basis.lambda()[i], rho) - sqrt_ratio(basis.lambda()[l], rho)),
        )
    })
}

fn phase(angle: f64) -> Complex64 {
    Complex64::new(angle.cos(), angle.sin())
}

/// `sqrt(lambda / rho)` with eigenvalues inside solver noise of zero snapped
/// to zero first; the square root would otherwise blow fuzz of order 1e-16
/// up to visible phase errors. Shared by the translation operator and its
/// phase mask so the two stay consistent.
fn sqrt_ratio(lambda: f64, rho: f64) -> f64 {
    let ratio = lambda / rho;
    if ratio < 1e-12 {
        0.0
    } else {
        ratio.sqrt()
    }
}

pub(crate) fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}
