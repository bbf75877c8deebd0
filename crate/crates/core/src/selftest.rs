//! Built-in consistency checks, exposed through the CLI.
//!
//! Each check exercises one identity the library is supposed to satisfy on
//! small fixed instances: frozen spectra, optimality of the corrections,
//! agreement between matrix and per-frequency routes, prior equivalences,
//! and determinism of the benchmark harness. Everything is seeded, so a
//! check either always passes or always fails for a given build.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bench::{self, Band, CellContext, Domain, ExperimentConfig, Method};
use crate::error::Result;
use crate::graph::{gen_erdos_renyi, gen_grid2d, gen_sensor_knn, laplacian, Graph};
use crate::priors::{
    smoothness_correction, smoothness_covariance, subspace_correction_noiseless, SmoothnessPrior,
    SubspacePrior,
};
use crate::sampling::{
    cosine_w, fullband_s, gaussian_psd, random_vertex_set, smoothness_v, spectral_reconstructor,
    spectral_sampler, vertex_reconstructor, vertex_sampler,
};
use crate::spectral::{eigendecompose, SpectralBasis};
use crate::stationarity::{
    covariance_from_psd, diagonalizability_residual, rho_g, sample_signal, translation_operator,
    GwssProcess,
};
use crate::wiener::{
    analytic_mse, correction_predefined, correction_unconstrained, mse_gradient, noise_covariance,
    spectral_response_pre, spectral_response_unc, CorrectionFilter, RecoveryPipeline,
};

/// Result of one named check.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn all_passed(reports: &[CheckReport]) -> bool {
    reports.iter().all(|r| r.passed)
}

/// Runs every check and returns the reports in a fixed order.
pub fn run_selftest() -> Vec<CheckReport> {
    vec![
        check("laplacian-spectrum", laplacian_spectrum),
        check("gft-parseval", gft_parseval),
        check("stationary-diagonalizable", stationary_diagonalizable),
        check("translation-operator", translation_checks),
        check("correction-optimality", correction_optimality),
        check("free-basis-dominance", free_basis_dominance),
        check("spectral-response-match", spectral_response_match),
        check("subspace-prior", subspace_prior_checks),
        check("smoothness-prior", smoothness_prior_checks),
        check("analytic-vs-empirical", analytic_vs_empirical),
        check("benchmark-determinism", benchmark_determinism),
    ]
}

fn check(name: &'static str, run: fn() -> Result<(bool, String)>) -> CheckReport {
    match run() {
        Ok((passed, detail)) => CheckReport {
            name,
            passed,
            detail,
        },
        Err(e) => CheckReport {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn basis_of(graph: &Graph) -> Result<Arc<SpectralBasis>> {
    Ok(Arc::new(eigendecompose(&laplacian(graph))?))
}

/// Standard noisy test cell: 4x4 grid, gaussian spectrum, fullband
/// acquisition, one quarter of the vertices kept.
fn grid_cell(domain: Domain) -> Result<(CellContext, GwssProcess)> {
    let basis = basis_of(&gen_grid2d(4, 4)?)?;
    let psd = gaussian_psd(basis.lambda_max()).values_on(&basis)?;
    let process = GwssProcess::new(basis.clone(), psd)?;
    let gamma_x = covariance_from_psd(&process).into_matrix();
    Ok((
        CellContext {
            basis,
            gamma_x,
            m_ratio: 4,
            sigma2: 0.3,
            band: Band::Fullband,
            domain,
            smoothness_eps: 0.1,
            regularization: 0.0,
        },
        process,
    ))
}

fn laplacian_spectrum() -> Result<(bool, String)> {
    // path on 3 vertices: spectrum {0, 1, 3}
    let graph = Graph::from_weights(DMatrix::from_row_slice(
        3,
        3,
        &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
    ))?;
    let basis = eigendecompose(&laplacian(&graph))?;
    let expected = [0.0, 1.0, 3.0];
    let worst = basis
        .lambda()
        .iter()
        .zip(expected)
        .map(|(got, want)| (got - want).abs())
        .fold(0.0f64, f64::max);
    Ok((worst <= 1e-9, format!("max eigenvalue error {worst:.2e}")))
}

fn gft_parseval() -> Result<(bool, String)> {
    let basis = basis_of(&gen_grid2d(4, 4)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let x = DVector::from_fn(basis.n(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let xhat = crate::spectral::gft(&basis, &x)?;
        worst = worst.max((xhat.norm() - x.norm()).abs() / x.norm());
    }
    Ok((worst <= 1e-10, format!("max relative norm drift {worst:.2e}")))
}

fn stationary_diagonalizable() -> Result<(bool, String)> {
    let basis = basis_of(&gen_sensor_knn(16, 4, 0xfeed)?)?;
    let psd = gaussian_psd(basis.lambda_max()).values_on(&basis)?;
    let process = GwssProcess::new(basis.clone(), psd)?;
    let gamma = covariance_from_psd(&process).into_matrix();
    let residual = diagonalizability_residual(&basis, &gamma);
    Ok((residual <= 1e-10, format!("off-diagonal ratio {residual:.2e}")))
}

fn translation_checks() -> Result<(bool, String)> {
    let graph = gen_erdos_renyi(12, 0.4, 0xabcd)?;
    let basis = basis_of(&graph)?;
    let t = translation_operator(&basis, &graph);
    let n = basis.n();
    let unitary = {
        let gram = t.adjoint() * &t;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)].re - want).abs().max(gram[(i, j)].im.abs()));
            }
        }
        worst
    };
    let ones = DVector::from_element(n, Complex64::new(1.0, 0.0));
    let t_ones = &t * ones;
    let fixed = (0..n)
        .map(|i| ((t_ones[i].re - 1.0).abs()).max(t_ones[i].im.abs()))
        .fold(0.0f64, f64::max);
    let rho = rho_g(&graph);
    let bound_ok = rho >= basis.lambda_max() - 1e-12;
    let passed = unitary <= 1e-9 && fixed <= 1e-9 && bound_ok;
    Ok((
        passed,
        format!("unitarity {unitary:.2e}, constant drift {fixed:.2e}, rho-bound {bound_ok}"),
    ))
}

fn correction_optimality() -> Result<(bool, String)> {
    let (ctx, _) = grid_cell(Domain::Vertex)?;
    let set = random_vertex_set(ctx.basis.n(), ctx.k()?, 0x91)?;
    let pipeline = ctx.build_pipeline(Method::Pre, Some(&set))?;
    let gamma_eta = noise_covariance(pipeline.k(), ctx.sigma2);
    let grad = mse_gradient(&pipeline, &ctx.gamma_x, &gamma_eta)?;
    let scale = 1.0 + ctx.gamma_x.norm();
    let grad_norm = grad.norm() / scale;
    let base = analytic_mse(&pipeline, &ctx.gamma_x, &gamma_eta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x09f7);
    let mut best_gain = 0.0f64;
    let k = pipeline.k();
    for _ in 0..40 {
        let mut dir = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        dir /= dir.norm();
        for t in [1e-3, 1e-2] {
            let h = pipeline.correction().matrix() + dir.clone() * t;
            let perturbed = RecoveryPipeline::new(
                pipeline.sampler().clone(),
                CorrectionFilter::from_parts(h, pipeline.correction().method(), None),
                pipeline.reconstructor().clone(),
            )?;
            let mse = analytic_mse(&perturbed, &ctx.gamma_x, &gamma_eta)?;
            best_gain = best_gain.max(base - mse);
        }
    }
    let passed = grad_norm <= 1e-9 && best_gain <= 1e-12;
    Ok((
        passed,
        format!("normalized gradient {grad_norm:.2e}, best perturbation gain {best_gain:.2e}"),
    ))
}

fn free_basis_dominance() -> Result<(bool, String)> {
    let mut worst_margin = f64::NEG_INFINITY;
    for domain in [Domain::Vertex, Domain::Spectral] {
        let (ctx, _) = grid_cell(domain)?;
        let set = random_vertex_set(ctx.basis.n(), ctx.k()?, 0x7a)?;
        let vs = (domain == Domain::Vertex).then_some(set.as_slice());
        let gamma_eta = noise_covariance(ctx.k()?, ctx.sigma2);
        let pre = ctx.build_pipeline(Method::Pre, vs)?;
        let unc = ctx.build_pipeline(Method::Unc, vs)?;
        let mse_pre = analytic_mse(&pre, &ctx.gamma_x, &gamma_eta)?;
        let mse_unc = analytic_mse(&unc, &ctx.gamma_x, &gamma_eta)?;
        worst_margin = worst_margin.max(mse_unc - mse_pre);
    }
    Ok((
        worst_margin <= 1e-12,
        format!("max (free - predefined) MSE gap {worst_margin:.2e}"),
    ))
}

fn spectral_response_match() -> Result<(bool, String)> {
    let basis = basis_of(&gen_sensor_knn(16, 4, 0xbead)?)?;
    let m = 4;
    let k = basis.n() / m;
    let psd = gaussian_psd(basis.lambda_max()).values_on(&basis)?;
    let process = GwssProcess::new(basis.clone(), psd.clone())?;
    let gamma_x = covariance_from_psd(&process).into_matrix();
    let s_kernel = fullband_s(basis.lambda_max());
    let w_kernel = cosine_w(basis.lambda_max());
    let s = spectral_sampler(&basis, &s_kernel, m, None)?;
    let w = spectral_reconstructor(&basis, &w_kernel, m, None)?;
    let sigma2 = 0.3;
    let gamma_eta = noise_covariance(k, sigma2);
    let psd_eta = DVector::from_element(k, sigma2);

    let pre = correction_predefined(&s, &w, &gamma_x, &gamma_eta)?;
    let pre_response = spectral_response_pre(&basis, &s_kernel, &w_kernel, &psd, &psd_eta, m)?;
    let (unc, _) = correction_unconstrained(&s, &gamma_x, &gamma_eta)?;
    let (unc_response, _) = spectral_response_unc(&basis, &s_kernel, &psd, &psd_eta, m)?;

    let check_one = |filter: &CorrectionFilter, closed: &DVector<f64>| -> f64 {
        match filter.spectral_response() {
            Some(diag) => (diag - closed).amax(),
            None => f64::INFINITY,
        }
    };
    let worst = check_one(&pre, &pre_response).max(check_one(&unc, &unc_response));
    Ok((
        worst <= 1e-9,
        format!("max |matrix - closed form| response gap {worst:.2e}"),
    ))
}

fn subspace_prior_checks() -> Result<(bool, String)> {
    let basis = basis_of(&gen_sensor_knn(16, 4, 0xdead)?)?;
    let k = 4;
    let set = random_vertex_set(basis.n(), k, 0x33)?;
    let s = vertex_sampler(&basis, None, &set)?;
    let w = vertex_reconstructor(&basis, Some(&cosine_w(basis.lambda_max())), &set)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x51);
    let mut random_spd = || {
        let b = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        &b * b.transpose() + DMatrix::identity(k, k)
    };
    let prior_a = SubspacePrior::from_leading_harmonics(&basis, k, random_spd())?;
    let prior_b = SubspacePrior::from_leading_harmonics(&basis, k, random_spd())?;
    let h_a = subspace_correction_noiseless(&prior_a, &s, &w)?;
    let h_b = subspace_correction_noiseless(&prior_b, &s, &w)?;
    let invariance = (h_a.matrix() - h_b.matrix()).amax();

    // noiseless recovery reproduces the synthesis-side projection of any
    // signal drawn from the subspace
    let pipeline = RecoveryPipeline::new(s.clone(), h_a, w.clone())?;
    let coeffs = DVector::from_fn(k, |i, _| (i + 1) as f64);
    let x = prior_a.generator() * &coeffs;
    let recovered = pipeline.apply(&x, None)?;
    let wm = w.matrix();
    let rhs = DMatrix::from_column_slice(wm.ncols(), 1, (wm.transpose() * &x).as_slice());
    let coeff = crate::linalg::solve_spd(&(wm.transpose() * wm), &rhs, "W^T W")?;
    let projected: DVector<f64> = (wm * coeff).column(0).into_owned();
    let projection_gap = (recovered - projected).amax();

    let passed = invariance <= 1e-9 && projection_gap <= 1e-8;
    Ok((
        passed,
        format!("coefficient-covariance dependence {invariance:.2e}, projection gap {projection_gap:.2e}"),
    ))
}

fn smoothness_prior_checks() -> Result<(bool, String)> {
    let basis = basis_of(&gen_sensor_knn(16, 4, 0xcafe)?)?;
    let k = 4;
    let set = random_vertex_set(basis.n(), k, 0x44)?;
    let s = vertex_sampler(&basis, Some(&fullband_s(basis.lambda_max())), &set)?;
    let w = vertex_reconstructor(&basis, Some(&cosine_w(basis.lambda_max())), &set)?;
    let kernel = || smoothness_v(basis.lambda_max(), 0.1);

    let h_half = smoothness_correction(&SmoothnessPrior::new(kernel(), 0.5)?, &basis, &s, &w)?;
    let h_two = smoothness_correction(&SmoothnessPrior::new(kernel(), 2.0)?, &basis, &s, &w)?;
    let rho_dependence = (h_half.matrix() - h_two.matrix()).amax();

    let prior = SmoothnessPrior::new(kernel(), 1.0)?;
    let cov = smoothness_covariance(&prior, &basis)?;
    let generic = correction_predefined(&s, &w, cov.matrix(), &noise_covariance(k, 0.0))?;
    let generic_gap = (h_half.matrix() - generic.matrix()).amax();

    let passed = rho_dependence <= 1e-10 && generic_gap <= 1e-8;
    Ok((
        passed,
        format!("rho dependence {rho_dependence:.2e}, generic-route gap {generic_gap:.2e}"),
    ))
}

fn analytic_vs_empirical() -> Result<(bool, String)> {
    let basis = basis_of(&gen_erdos_renyi(8, 0.5, 0x1234)?)?;
    let psd = gaussian_psd(basis.lambda_max()).values_on(&basis)?;
    let process = GwssProcess::new(basis.clone(), psd)?;
    let ctx = CellContext {
        basis: basis.clone(),
        gamma_x: covariance_from_psd(&process).into_matrix(),
        m_ratio: 2,
        sigma2: 0.3,
        band: Band::Fullband,
        domain: Domain::Spectral,
        smoothness_eps: 0.1,
        regularization: 0.0,
    };
    let pipeline = ctx.build_pipeline(Method::Unc, None)?;
    let gamma_eta = noise_covariance(pipeline.k(), ctx.sigma2);
    let predicted = analytic_mse(&pipeline, &ctx.gamma_x, &gamma_eta)?;
    let trials = 3000u64;
    let mut sq = Vec::with_capacity(trials as usize);
    for t in 0..trials {
        let x = sample_signal(&process, bench::trial_seed(0xe11e, t, bench::SeedRole::Signal));
        let eta = {
            let mut rng =
                ChaCha8Rng::seed_from_u64(bench::trial_seed(0xe11e, t, bench::SeedRole::Noise));
            DVector::from_fn(pipeline.k(), |_, _| {
                ctx.sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal)
            })
        };
        let recovered = pipeline.apply(&x, Some(&eta))?;
        sq.push((recovered - x).norm_squared());
    }
    let mean = sq.iter().sum::<f64>() / trials as f64;
    let var = sq.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (trials - 1) as f64;
    let stderr = (var / trials as f64).sqrt();
    let gap = (mean - predicted).abs();
    let passed = gap <= 4.0 * stderr + 1e-12;
    Ok((
        passed,
        format!("empirical {mean:.5} vs analytic {predicted:.5}, gap {gap:.2e} <= 4 stderr {:.2e}", 4.0 * stderr),
    ))
}

fn benchmark_determinism() -> Result<(bool, String)> {
    let config = ExperimentConfig::from_toml_str(
        r#"
        trials = 3
        base_seed = 99
        m_ratio = 4
        noise_sigma2 = [0.3]
        bands = ["fullband"]
        domains = ["vertex"]
        methods = ["unc", "pre"]

        [[graphs]]
        kind = "grid"
        rows = 4
        cols = 4
        "#,
    )?;
    let serial = bench::run_experiment_with_threads(&config, 1)?.to_csv();
    let threaded = bench::run_experiment_with_threads(&config, 4)?.to_csv();
    let passed = serial == threaded;
    Ok((
        passed,
        if passed {
            format!("{} result bytes identical across worker counts", serial.len())
        } else {
            "serial and threaded runs disagree".to_string()
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        let reports = run_selftest();
        for report in &reports {
            assert!(report.passed, "{} failed: {}", report.name, report.detail);
        }
        assert!(all_passed(&reports));
        assert_eq!(reports.len(), 11);
    }
}
