//! Laplacian spectrum and graph Fourier transform.
//!
//! The eigendecomposition `L = U diag(lambda) U^T` fixes the harmonic basis
//! used everywhere else. Order and signs are normalized so that the
//! decomposition of a given Laplacian is reproducible: eigenvalues ascend
//! (ties broken by solver order) and each eigenvector is flipped to make its
//! first significantly-nonzero component positive.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::DegreeLaplacian;

const EIGEN_MAX_ITER: usize = 100_000;

/// Orthonormal Laplacian eigenbasis with its ascending spectrum.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    u: DMatrix<f64>,
    lambda: DVector<f64>,
}

impl SpectralBasis {
    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    /// Eigenvector matrix; column `i` is the harmonic at `lambda[i]`.
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Nonnegative ascending eigenvalues.
    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda[self.lambda.len() - 1]
    }
}

/// Diagonalizes a Laplacian. Fails with [`Error::ConvergenceFailure`] if the
/// iterative solver stalls; for a fixed input the output is bitwise
/// reproducible.
pub fn eigendecompose(laplacian: &DegreeLaplacian) -> Result<SpectralBasis> {
    let eig = laplacian
        .matrix()
        .clone()
        .try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::ConvergenceFailure)?;
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut u = DMatrix::zeros(n, n);
    let mut lambda = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        lambda[dst] = eig.eigenvalues[src];
        u.set_column(dst, &eig.eigenvectors.column(src));
    }
    // A PSD Laplacian can come back with roundoff fuzz in its null space.
    // Negative fuzz is clamped generously (the matrix cannot have genuine
    // negative eigenvalues); positive fuzz only within a much tighter window,
    // since small positive eigenvalues can be real. Keeps lambda_0 of a
    // connected graph exactly zero, which downstream kernels rely on.
    let scale = lambda[n - 1].abs().max(1.0);
    for v in lambda.iter_mut() {
        if (*v < 0.0 && *v > -1e-9 * scale) || (*v >= 0.0 && *v < 1e-12 * scale) {
            *v = 0.0;
        }
    }
    for j in 0..n {
        let col_max = u.column(j).amax();
        let pivot = (0..n).find(|&i| u[(i, j)].abs() > 1e-12 * col_max);
        if let Some(i) = pivot {
            if u[(i, j)] < 0.0 {
                let negated = -u.column(j);
                u.set_column(j, &negated);
            }
        }
    }
    Ok(SpectralBasis { u, lambda })
}

/// Graph Fourier transform `xhat = U^T x`.
pub fn gft(basis: &SpectralBasis, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("signal", basis.n(), x.len())?;
    Ok(basis.u.transpose() * x)
}

/// Inverse graph Fourier transform `x = U xhat`.
pub fn igft(basis: &SpectralBasis, xhat: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("spectrum", basis.n(), xhat.len())?;
    Ok(&basis.u * xhat)
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

/// Scalar response defined over the graph spectrum. Kernels receive both the
/// eigenvalue index and its value: most responses are functions of lambda,
/// but ideal band selectors act on the index.
#[derive(Clone)]
pub struct SpectralKernel {
    name: String,
    eval: Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>,
}

impl SpectralKernel {
    pub fn new<F>(name: impl Into<String>, eval: F) -> Self
    where
        F: Fn(usize, f64) -> f64 + Send + Sync + 'static,
    {
        SpectralKernel {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn constant(value: f64) -> Self {
        SpectralKernel::new("const", move |_, _| value)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, index: usize, lambda: f64) -> f64 {
        (self.eval)(index, lambda)
    }

    /// Evaluates the kernel over a whole spectrum, rejecting NaN/inf values.
    pub fn values_on(&self, basis: &SpectralBasis) -> Result<DVector<f64>> {
        let mut values = DVector::zeros(basis.n());
        for i in 0..basis.n() {
            let v = self.eval(i, basis.lambda[i]);
            if !v.is_finite() {
                return Err(Error::NonFiniteKernelValue {
                    name: self.name.clone(),
                    index: i,
                    lambda: basis.lambda[i],
                });
            }
            values[i] = v;
        }
        Ok(values)
    }
}

impl fmt::Debug for SpectralKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralKernel")
            .field("name", &self.name)
            .finish()
    }
}

/// Vertex-domain filter matrix `U diag(g(lambda)) U^T` for a spectral kernel.
pub fn kernel_filter_matrix(basis: &SpectralBasis, kernel: &SpectralKernel) -> Result<DMatrix<f64>> {
    let values = kernel.values_on(basis)?;
    let mut scaled = basis.u.clone();
    for (j, v) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*v);
    }
    Ok(scaled * basis.u.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_grid2d, gen_sensor_knn, laplacian, Graph};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn basis_of(weights: &[f64], n: usize) -> SpectralBasis {
        let g = Graph::from_weights(DMatrix::from_row_slice(n, n, weights)).unwrap();
        eigendecompose(&laplacian(&g)).unwrap()
    }

    fn path3_basis() -> SpectralBasis {
        basis_of(&[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0], 3)
    }

    /// Ring of n vertices with unit weights.
    pub(crate) fn cycle_graph(n: usize) -> Graph {
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            let j = (i + 1) % n;
            w[(i, j)] = 1.0;
            w[(j, i)] = 1.0;
        }
        Graph::from_weights(w).unwrap()
    }

    #[test]
    fn path3_spectrum_matches_characteristic_polynomial() {
        // det(L - t I) for the path Laplacian [[1,-1,0],[-1,2,-1],[0,-1,1]]
        // expands to -t^3 + 4 t^2 - 3 t = -t (t - 1)(t - 3).
        let poly = |t: f64| -t * t * t + 4.0 * t * t - 3.0 * t;
        for root in [0.0, 1.0, 3.0] {
            assert_eq!(poly(root), 0.0);
        }
        let basis = path3_basis();
        let expect = [0.0, 1.0, 3.0];
        for (got, want) in basis.lambda().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "eigenvalue {got} vs {want}");
        }
        assert_eq!(basis.lambda_max(), basis.lambda()[2]);
    }

    #[test]
    fn cycle8_spectrum_matches_closed_form() {
        // Ring Laplacian eigenvalues are 2 - 2 cos(2 pi k / n).
        let basis = eigendecompose(&laplacian(&cycle_graph(8))).unwrap();
        let mut expect: Vec<f64> = (0..8)
            .map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / 8.0).cos())
            .collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in basis.lambda().iter().zip(expect) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn connected_graph_has_constant_first_harmonic() {
        let basis = path3_basis();
        let c = 1.0 / 3.0f64.sqrt();
        for i in 0..3 {
            assert!((basis.u()[(i, 0)] - c).abs() < 1e-12);
        }
        assert!(basis.lambda()[0].abs() < 1e-12);
    }

    #[test]
    fn eigenvectors_are_orthonormal() {
        let g = gen_sensor_knn(48, 6, 21).unwrap();
        let basis = eigendecompose(&laplacian(&g)).unwrap();
        let gram = basis.u().transpose() * basis.u();
        let resid = (&gram - DMatrix::identity(48, 48)).norm();
        assert!(resid <= 1e-9 * (48f64).sqrt(), "orthonormality residual {resid}");
    }

    #[test]
    fn eigendecompose_is_reproducible() {
        let g = gen_grid2d(5, 5).unwrap();
        let dl = laplacian(&g);
        let a = eigendecompose(&dl).unwrap();
        let b = eigendecompose(&dl).unwrap();
        assert_eq!(a.u(), b.u());
        assert_eq!(a.lambda(), b.lambda());
    }

    #[test]
    fn parseval_holds_on_random_vectors() {
        let g = gen_sensor_knn(32, 5, 13).unwrap();
        let basis = eigendecompose(&laplacian(&g)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let x = DVector::from_fn(32, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let xhat = gft(&basis, &x).unwrap();
            assert!((x.norm() - xhat.norm()).abs() <= 1e-10 * x.norm().max(1.0));
            let back = igft(&basis, &xhat).unwrap();
            assert!((back - &x).norm() <= 1e-10 * x.norm().max(1.0));
        }
    }

    #[test]
    fn igft_of_flat_spectrum_is_row_sum() {
        let basis = path3_basis();
        let ones = DVector::from_element(3, 1.0);
        let x = igft(&basis, &ones).unwrap();
        for i in 0..3 {
            let row_sum: f64 = basis.u().row(i).sum();
            assert!((x[i] - row_sum).abs() < 1e-14);
        }
    }

    #[test]
    fn gft_rejects_wrong_length() {
        let basis = path3_basis();
        let x = DVector::zeros(4);
        assert!(matches!(
            gft(&basis, &x),
            Err(Error::DimensionMismatch { expected: 3, got: 4, .. })
        ));
    }

    #[test]
    fn constant_kernel_gives_identity_filter() {
        let basis = path3_basis();
        let g = kernel_filter_matrix(&basis, &SpectralKernel::constant(1.0)).unwrap();
        assert!((g - DMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn spectral_filters_commute() {
        let g = gen_sensor_knn(24, 4, 5).unwrap();
        let basis = eigendecompose(&laplacian(&g)).unwrap();
        let a = kernel_filter_matrix(
            &basis,
            &SpectralKernel::new("poly", |_, l| 1.0 + 0.5 * l),
        )
        .unwrap();
        let b = kernel_filter_matrix(
            &basis,
            &SpectralKernel::new("decay", |_, l| (-l).exp()),
        )
        .unwrap();
        let resid = (&a * &b - &b * &a).norm();
        assert!(resid <= 1e-10 * a.norm() * b.norm());
    }

    #[test]
    fn non_finite_kernel_is_rejected() {
        let basis = path3_basis();
        let bad = SpectralKernel::new("inv", |_, l| 1.0 / l);
        match bad.values_on(&basis) {
            Err(Error::NonFiniteKernelValue { index: 0, .. }) => {}
            other => panic!("expected NonFiniteKernelValue, got {other:?}"),
        }
    }
}
