//! Shared fixtures for the integration suites.
// compiled once per test binary; not every binary uses every item
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;

use gwsamp::bench::{Band, CellContext, Domain};
use gwsamp::graph::{gen_erdos_renyi, gen_grid2d, gen_sensor_knn, laplacian, Graph};
use gwsamp::sampling::{gaussian_psd, random_vertex_set};
use gwsamp::spectral::{eigendecompose, SpectralBasis};
use gwsamp::stationarity::{covariance_from_psd, GwssProcess};

/// One fully prepared recovery setting.
pub struct Instance {
    pub label: String,
    pub ctx: CellContext,
    pub vertex_set: Option<Vec<usize>>,
}

pub fn basis_of(graph: &Graph) -> Arc<SpectralBasis> {
    Arc::new(eigendecompose(&laplacian(graph)).expect("eigendecomposition"))
}

/// A deterministic mix of graph kinds, sampling domains, noise levels, and
/// bands at fixed size `n` (divisible by 4). Index `i` selects the variant.
pub fn instance(i: usize, n: usize) -> Instance {
    let graph = match i % 3 {
        0 => gen_sensor_knn(n, 6, 1000 + i as u64).expect("sensor graph"),
        1 => gen_erdos_renyi(n, 0.3, 2000 + i as u64).expect("er graph"),
        _ => gen_grid2d(4, n / 4).expect("grid graph"),
    };
    let basis = basis_of(&graph);
    let psd = gaussian_psd(basis.lambda_max())
        .values_on(&basis)
        .expect("psd values");
    let process = GwssProcess::new(basis.clone(), psd).expect("process");
    let gamma_x = covariance_from_psd(&process).into_matrix();
    let domain = if i.is_multiple_of(2) {
        Domain::Vertex
    } else {
        Domain::Spectral
    };
    let sigma2 = [0.3, 0.1, 0.0][i % 3];
    // ideal low-pass acquisition shows up only on noisy instances; noiseless
    // ones keep the invertible full-band front end
    let band = if sigma2 > 0.0 && i.is_multiple_of(5) {
        Band::Bandlimited
    } else {
        Band::Fullband
    };
    let ctx = CellContext {
        basis: basis.clone(),
        gamma_x,
        m_ratio: 4,
        sigma2,
        band,
        domain,
        smoothness_eps: 0.1,
        regularization: 0.0,
    };
    let vertex_set = (domain == Domain::Vertex)
        .then(|| random_vertex_set(n, n / 4, 3000 + i as u64).expect("vertex set"));
    Instance {
        label: format!(
            "#{i} {} {:?} {:?} sigma2={sigma2}",
            ["sensor", "er", "grid"][i % 3],
            domain,
            band
        ),
        ctx,
        vertex_set,
    }
}

pub fn instances(count: usize, n: usize) -> Vec<Instance> {
    (0..count).map(|i| instance(i, n)).collect()
}

/// Frobenius mass of the off-diagonal part relative to the whole matrix.
pub fn off_diag_ratio(m: &DMatrix<f64>) -> f64 {
    let total = m.norm();
    if total == 0.0 {
        return 0.0;
    }
    let mut off = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j {
                off += m[(i, j)] * m[(i, j)];
            }
        }
    }
    off.sqrt() / total
}
