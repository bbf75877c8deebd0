//! Generalized sampling operators in two domains.
//!
//! Vertex-domain sampling applies a spectral prefilter and keeps a subset of
//! vertices. Frequency-domain sampling folds the graph spectrum modulo the
//! reduced size after a kernel weighting, then maps the result through an
//! optional orthonormal reduced basis. Both produce a `K x N` analysis
//! matrix; reconstructions are their `N x K` synthesis counterparts.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::spectral::{check_len, kernel_filter_matrix, SpectralBasis, SpectralKernel};

/// Domain a sampling or reconstruction operator acts in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingDomain {
    Vertex,
    Spectral,
}

/// Construction record carried by operators: enough to rebuild or label them.
#[derive(Debug, Clone)]
pub struct OperatorMeta {
    pub domain: SamplingDomain,
    pub vertex_set: Option<Vec<usize>>,
    pub fold_ratio: Option<usize>,
    pub kernel: Option<String>,
}

/// Analysis operator mapping length-`N` signals to `K` measurements.
#[derive(Debug, Clone)]
pub struct SamplingOperator {
    s_star: DMatrix<f64>,
    meta: OperatorMeta,
    gram_condition: f64,
}

impl SamplingOperator {
    pub(crate) fn from_parts(s_star: DMatrix<f64>, meta: OperatorMeta) -> Self {
        let gram = &s_star * s_star.transpose();
        let gram_condition = linalg::sym_condition(&gram);
        SamplingOperator {
            s_star,
            meta,
            gram_condition,
        }
    }

    /// The `K x N` analysis matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s_star
    }

    /// Synthesis form `S = (S^*)^T`.
    pub fn synthesis(&self) -> DMatrix<f64> {
        self.s_star.transpose()
    }

    pub fn k(&self) -> usize {
        self.s_star.nrows()
    }

    pub fn n(&self) -> usize {
        self.s_star.ncols()
    }

    pub fn meta(&self) -> &OperatorMeta {
        &self.meta
    }

    /// Condition number of `S^* S`; finite iff the measurements are a frame
    /// for their span.
    pub fn gram_condition(&self) -> f64 {
        self.gram_condition
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("signal", self.n(), x.len())?;
        Ok(&self.s_star * x)
    }
}

/// Synthesis operator mapping `K` coefficients back to length-`N` signals.
#[derive(Debug, Clone)]
pub struct ReconstructionOperator {
    w: DMatrix<f64>,
    meta: OperatorMeta,
    gram_condition: f64,
}

impl ReconstructionOperator {
    pub(crate) fn from_parts(w: DMatrix<f64>, meta: OperatorMeta) -> Self {
        let gram = w.transpose() * &w;
        let gram_condition = linalg::sym_condition(&gram);
        ReconstructionOperator {
            w,
            meta,
            gram_condition,
        }
    }

    /// The `N x K` synthesis matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn k(&self) -> usize {
        self.w.ncols()
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn meta(&self) -> &OperatorMeta {
        &self.meta
    }

    /// Condition number of `W^T W`; finite iff the basis is Riesz.
    pub fn gram_condition(&self) -> f64 {
        self.gram_condition
    }

    pub fn apply(&self, c: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("coefficients", self.k(), c.len())?;
        Ok(&self.w * c)
    }
}

// --- kernel catalog -------------------------------------------------------

/// Full-band measurement response: linear rolloff `2 - 2 lambda / lambda_max`
/// below the half band, flat 1 above it.
pub fn fullband_s(lambda_max: f64) -> SpectralKernel {
    SpectralKernel::new("fullband", move |_, l| {
        if 2.0 * l >= lambda_max {
            1.0
        } else {
            2.0 - 2.0 * l / lambda_max
        }
    })
}

/// Ideal low-pass selector over the first `k` frequency indices.
pub fn bandlimited_s(k: usize) -> SpectralKernel {
    SpectralKernel::new("bandlimited", move |i, _| if i < k { 1.0 } else { 0.0 })
}

/// Smooth interpolation response `cos(pi lambda / (2 lambda_max))`.
pub fn cosine_w(lambda_max: f64) -> SpectralKernel {
    SpectralKernel::new("cosine", move |_, l| {
        (std::f64::consts::FRAC_PI_2 * l / lambda_max).cos()
    })
}

/// High-pass penalty profile `lambda / lambda_max + eps` used by the
/// smoothness prior; `eps > 0` keeps it invertible at dc.
pub fn smoothness_v(lambda_max: f64, eps: f64) -> SpectralKernel {
    SpectralKernel::new("smoothness", move |_, l| l / lambda_max + eps)
}

/// Band-centered power spectrum `exp(-((2 lambda - lambda_max)^2 / lambda_max))`,
/// peaking at 1 in the middle of the band.
pub fn gaussian_psd(lambda_max: f64) -> SpectralKernel {
    SpectralKernel::new("gaussian", move |_, l| {
        let t = (2.0 * l - lambda_max) / lambda_max.sqrt();
        (-t * t).exp()
    })
}

/// Looks a catalog kernel up by name. `k` feeds the band-limited selector and
/// `eps` the smoothness profile; the others only need `lambda_max`.
pub fn kernel_by_name(name: &str, lambda_max: f64, k: usize, eps: f64) -> Result<SpectralKernel> {
    match name {
        "fullband" => Ok(fullband_s(lambda_max)),
        "bandlimited" => Ok(bandlimited_s(k)),
        "cosine" => Ok(cosine_w(lambda_max)),
        "smoothness" => Ok(smoothness_v(lambda_max, eps)),
        "gaussian" => Ok(gaussian_psd(lambda_max)),
        "identity" => Ok(SpectralKernel::constant(1.0)),
        other => Err(Error::UnknownKernel(other.into())),
    }
}

// --- vertex domain ---------------------------------------------------------

/// Draws `k` distinct vertices uniformly, returned ascending; deterministic
/// per seed.
pub fn random_vertex_set(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::KExceedsN { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = rand::seq::index::sample(&mut rng, n, k).into_vec();
    set.sort_unstable();
    Ok(set)
}

fn validate_vertex_set(n: usize, set: &[usize]) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    if set.len() > n {
        return Err(Error::KExceedsN { k: set.len(), n });
    }
    let mut seen = vec![false; n];
    for &v in set {
        if v >= n {
            return Err(Error::IndexOutOfRange { index: v, n });
        }
        if seen[v] {
            return Err(Error::DuplicateVertex { index: v });
        }
        seen[v] = true;
    }
    Ok(())
}

/// Vertex-domain sampler: spectral prefilter (identity when `None`) followed
/// by selection of `vertex_set` rows.
pub fn vertex_sampler(
    basis: &SpectralBasis,
    prefilter: Option<&SpectralKernel>,
    vertex_set: &[usize],
) -> Result<SamplingOperator> {
    let n = basis.n();
    validate_vertex_set(n, vertex_set)?;
    let s_star = match prefilter {
        Some(kernel) => {
            let g = kernel_filter_matrix(basis, kernel)?;
            select_rows(&g, vertex_set)
        }
        None => {
            let mut rows = DMatrix::zeros(vertex_set.len(), n);
            for (row, &v) in vertex_set.iter().enumerate() {
                rows[(row, v)] = 1.0;
            }
            rows
        }
    };
    let meta = OperatorMeta {
        domain: SamplingDomain::Vertex,
        vertex_set: Some(vertex_set.to_vec()),
        fold_ratio: None,
        kernel: prefilter.map(|k| k.name().to_string()),
    };
    Ok(SamplingOperator::from_parts(s_star, meta))
}

/// Vertex-domain synthesis: columns of a spectral filter (identity when
/// `None`) at the sampled vertices, the mirror image of [`vertex_sampler`].
pub fn vertex_reconstructor(
    basis: &SpectralBasis,
    kernel: Option<&SpectralKernel>,
    vertex_set: &[usize],
) -> Result<ReconstructionOperator> {
    let n = basis.n();
    validate_vertex_set(n, vertex_set)?;
    let w = match kernel {
        Some(kernel) => {
            let g = kernel_filter_matrix(basis, kernel)?;
            g.select_columns(vertex_set.iter())
        }
        None => {
            let mut cols = DMatrix::zeros(n, vertex_set.len());
            for (col, &v) in vertex_set.iter().enumerate() {
                cols[(v, col)] = 1.0;
            }
            cols
        }
    };
    let meta = OperatorMeta {
        domain: SamplingDomain::Vertex,
        vertex_set: Some(vertex_set.to_vec()),
        fold_ratio: None,
        kernel: kernel.map(|k| k.name().to_string()),
    };
    Ok(ReconstructionOperator::from_parts(w, meta))
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows.len(), m.ncols());
    for (dst, &src) in rows.iter().enumerate() {
        out.set_row(dst, &m.row(src));
    }
    out
}

// --- spectral domain -------------------------------------------------------

fn reduced_size(n: usize, m_ratio: usize) -> Result<usize> {
    if m_ratio == 0 {
        return Err(Error::InvalidParameter("fold ratio must be >= 1".into()));
    }
    if !n.is_multiple_of(m_ratio) {
        return Err(Error::NotDivisible { n, m: m_ratio });
    }
    Ok(n / m_ratio)
}

fn validate_reduced_basis(u_reduced: Option<&DMatrix<f64>>, k: usize) -> Result<()> {
    if let Some(ur) = u_reduced {
        if ur.nrows() != k || ur.ncols() != k {
            return Err(Error::DimensionMismatch {
                what: "reduced basis",
                expected: k,
                got: ur.nrows().max(ur.ncols()),
            });
        }
        let residual = (ur.transpose() * ur - DMatrix::identity(k, k)).norm();
        if residual > 1e-9 * (k as f64).sqrt() {
            return Err(Error::NonUnitaryReduced { residual });
        }
    }
    Ok(())
}

/// Folds a weighted spectrum modulo `K = N / m_ratio`:
/// `out[i] = sum_l s(i + K l) xhat[i + K l]`.
pub fn spectral_fold(
    basis: &SpectralBasis,
    kernel: &SpectralKernel,
    m_ratio: usize,
    xhat: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = basis.n();
    check_len("spectrum", n, xhat.len())?;
    let k = reduced_size(n, m_ratio)?;
    let s = kernel.values_on(basis)?;
    let mut out = DVector::zeros(k);
    for i in 0..k {
        let mut acc = 0.0;
        for l in 0..m_ratio {
            let idx = i + k * l;
            acc += s[idx] * xhat[idx];
        }
        out[i] = acc;
    }
    Ok(out)
}

/// Builds the `K x N` fold matrix `[I_K I_K ...]`.
fn fold_matrix(k: usize, m_ratio: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(k, k * m_ratio);
    for l in 0..m_ratio {
        for i in 0..k {
            d[(i, i + k * l)] = 1.0;
        }
    }
    d
}

/// Frequency-domain sampler `U_red D S(Lambda) U^T`: transform, weight by the
/// kernel, fold modulo `K`, and express in the reduced basis (identity when
/// `None`).
pub fn spectral_sampler(
    basis: &SpectralBasis,
    kernel: &SpectralKernel,
    m_ratio: usize,
    u_reduced: Option<&DMatrix<f64>>,
) -> Result<SamplingOperator> {
    let n = basis.n();
    let k = reduced_size(n, m_ratio)?;
    validate_reduced_basis(u_reduced, k)?;
    let s = kernel.values_on(basis)?;
    let mut weighted = basis.u().transpose();
    for (i, v) in s.iter().enumerate() {
        weighted.row_mut(i).scale_mut(*v);
    }
    let folded = fold_matrix(k, m_ratio) * weighted;
    let s_star = match u_reduced {
        Some(ur) => ur * folded,
        None => folded,
    };
    let meta = OperatorMeta {
        domain: SamplingDomain::Spectral,
        vertex_set: None,
        fold_ratio: Some(m_ratio),
        kernel: Some(kernel.name().to_string()),
    };
    let op = SamplingOperator::from_parts(s_star, meta);
    #[cfg(debug_assertions)]
    {
        // the matrix must act exactly like the fold formula
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(0x0f01d);
        for _ in 0..2 {
            let x = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
            let via_matrix = op.apply(&x).unwrap();
            let folded = spectral_fold(basis, kernel, m_ratio, &(basis.u().transpose() * &x)).unwrap();
            let via_fold = match u_reduced {
                Some(ur) => ur * folded,
                None => folded,
            };
            debug_assert!((via_matrix - via_fold).norm() <= 1e-10 * x.norm().max(1.0));
        }
    }
    Ok(op)
}

/// Frequency-domain synthesis `U W(Lambda) D^T U_red^T`: lift the reduced
/// coefficients periodically across the spectrum, weight by the kernel, and
/// inverse transform.
pub fn spectral_reconstructor(
    basis: &SpectralBasis,
    kernel: &SpectralKernel,
    m_ratio: usize,
    u_reduced: Option<&DMatrix<f64>>,
) -> Result<ReconstructionOperator> {
    let n = basis.n();
    let k = reduced_size(n, m_ratio)?;
    validate_reduced_basis(u_reduced, k)?;
    let wvals = kernel.values_on(basis)?;
    let mut lifted = basis.u().clone();
    for (j, v) in wvals.iter().enumerate() {
        lifted.column_mut(j).scale_mut(*v);
    }
    let spread = lifted * fold_matrix(k, m_ratio).transpose();
    let w = match u_reduced {
        Some(ur) => spread * ur.transpose(),
        None => spread,
    };
    let meta = OperatorMeta {
        domain: SamplingDomain::Spectral,
        vertex_set: None,
        fold_ratio: Some(m_ratio),
        kernel: Some(kernel.name().to_string()),
    };
    Ok(ReconstructionOperator::from_parts(w, meta))
}
