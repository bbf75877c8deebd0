//! Seeded Monte-Carlo benchmark harness.
//!
//! A TOML config describes a grid of cells: graph family x noise level x
//! measurement band x sampling domain. Every cell runs the configured
//! recovery methods on shared realizations: per trial, one signal and one
//! noise vector are drawn from seeds derived as `mix(base_seed, trial, role)`
//! and every method sees the same data. Vertex-domain cells draw a fresh
//! vertex set per trial; frequency-domain cells have no sampling randomness,
//! so their spread comes from the signal and noise draws alone.
//!
//! Trials are pure functions of `(config, trial index)`, and aggregation
//! walks them in index order, so the resulting CSV is byte-identical across
//! runs and across worker-thread counts.

use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::graph::{gen_erdos_renyi, gen_grid2d, gen_sensor_knn, laplacian, Graph};
use crate::priors::{bandlimited_baseline, smoothness_correction, SmoothnessPrior};
use crate::sampling::{
    bandlimited_s, cosine_w, fullband_s, gaussian_psd, random_vertex_set, smoothness_v,
    spectral_reconstructor, spectral_sampler, vertex_reconstructor, vertex_sampler,
};
use crate::seed;
use crate::spectral::{eigendecompose, SpectralBasis, SpectralKernel};
use crate::stationarity::{covariance_from_psd, sample_signal, GwssProcess};
use crate::wiener::{
    analytic_mse, correction_predefined, correction_unconstrained, noise_covariance,
    CorrectionFilter, RecoveryPipeline,
};

/// Default nearest-neighbor count for sensor graphs.
pub const DEFAULT_SENSOR_KNN: usize = 6;
/// Default dc offset of the smoothness profile.
pub const DEFAULT_SMOOTHNESS_EPS: f64 = 0.1;

/// Measurement band of the sampling prefilter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Band {
    Fullband,
    Bandlimited,
}

impl Band {
    pub fn label(self) -> &'static str {
        match self {
            Band::Fullband => "fullband",
            Band::Bandlimited => "bandlimited",
        }
    }
}

impl FromStr for Band {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fullband" => Ok(Band::Fullband),
            "bandlimited" => Ok(Band::Bandlimited),
            other => Err(Error::Parse(format!("unknown band: {other}"))),
        }
    }
}

/// Domain the sampling operator acts in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Vertex,
    Spectral,
}

impl Domain {
    pub fn label(self) -> &'static str {
        match self {
            Domain::Vertex => "vertex",
            Domain::Spectral => "spectral",
        }
    }
}

impl FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vertex" => Ok(Domain::Vertex),
            "spectral" => Ok(Domain::Spectral),
            other => Err(Error::Parse(format!("unknown domain: {other}"))),
        }
    }
}

/// Recovery method run inside a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Free synthesis basis with the jointly optimal correction.
    Unc,
    /// Cosine synthesis basis with the optimal correction for it.
    Pre,
    /// Cosine synthesis basis, correction induced by the smoothness prior.
    SmoothPre,
    /// Free basis built from the smoothness-prior covariance.
    SmoothUnc,
    /// Ideal low-pass sampling and synthesis, no correction.
    BlBaseline,
    /// Full sampling, no correction; a sanity anchor.
    Identity,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Unc => "unc",
            Method::Pre => "pre",
            Method::SmoothPre => "smooth-pre",
            Method::SmoothUnc => "smooth-unc",
            Method::BlBaseline => "bl-baseline",
            Method::Identity => "identity",
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unc" => Ok(Method::Unc),
            "pre" => Ok(Method::Pre),
            "smooth-pre" => Ok(Method::SmoothPre),
            "smooth-unc" => Ok(Method::SmoothUnc),
            "bl-baseline" => Ok(Method::BlBaseline),
            "identity" => Ok(Method::Identity),
            other => Err(Error::Parse(format!("unknown method: {other}"))),
        }
    }
}

/// Shape of the signal power spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsdKind {
    Gaussian,
    Flat,
}

impl PsdKind {
    pub fn kernel(self, lambda_max: f64) -> SpectralKernel {
        match self {
            PsdKind::Gaussian => gaussian_psd(lambda_max),
            PsdKind::Flat => SpectralKernel::constant(1.0),
        }
    }
}

/// One graph family entry of the experiment grid.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GraphSpec {
    Sensor {
        n: usize,
        #[serde(default = "default_knn")]
        k: usize,
        seed: u64,
    },
    Er {
        n: usize,
        p: f64,
        seed: u64,
    },
    Grid {
        rows: usize,
        cols: usize,
    },
}

fn default_knn() -> usize {
    DEFAULT_SENSOR_KNN
}

fn default_smoothness_eps() -> f64 {
    DEFAULT_SMOOTHNESS_EPS
}

fn default_psd() -> PsdKind {
    PsdKind::Gaussian
}

impl GraphSpec {
    pub fn label(&self) -> &'static str {
        match self {
            GraphSpec::Sensor { .. } => "sensor",
            GraphSpec::Er { .. } => "er",
            GraphSpec::Grid { .. } => "grid",
        }
    }

    pub fn build(&self) -> Result<Graph> {
        match *self {
            GraphSpec::Sensor { n, k, seed } => gen_sensor_knn(n, k, seed),
            GraphSpec::Er { n, p, seed } => gen_erdos_renyi(n, p, seed),
            GraphSpec::Grid { rows, cols } => gen_grid2d(rows, cols),
        }
    }
}

/// Full experiment description, usually read from a TOML file.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub base_seed: u64,
    pub m_ratio: usize,
    pub noise_sigma2: Vec<f64>,
    pub bands: Vec<Band>,
    pub domains: Vec<Domain>,
    pub methods: Vec<Method>,
    #[serde(default = "default_psd")]
    pub psd: PsdKind,
    #[serde(default = "default_smoothness_eps")]
    pub smoothness_eps: f64,
    /// Extra diagonal mass added to every correction gram; a rescue knob for
    /// noiseless setups that go numerically singular. Off by default.
    #[serde(default)]
    pub regularization: f64,
    pub graphs: Vec<GraphSpec>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if self.m_ratio == 0 {
            return Err(Error::InvalidParameter("m_ratio must be >= 1".into()));
        }
        for list_name in [
            ("noise_sigma2", self.noise_sigma2.is_empty()),
            ("bands", self.bands.is_empty()),
            ("domains", self.domains.is_empty()),
            ("methods", self.methods.is_empty()),
            ("graphs", self.graphs.is_empty()),
        ] {
            if list_name.1 {
                return Err(Error::InvalidParameter(format!(
                    "{} must not be empty",
                    list_name.0
                )));
            }
        }
        if let Some(bad) = self.noise_sigma2.iter().find(|&&s| s < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be nonnegative, got {bad}"
            )));
        }
        if self.regularization < 0.0 {
            return Err(Error::InvalidParameter(
                "regularization must be nonnegative".into(),
            ));
        }
        // NaN must fail this check too
        if self.smoothness_eps.is_nan() || self.smoothness_eps <= 0.0 {
            return Err(Error::InvalidParameter(
                "smoothness_eps must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Stream roles for per-trial seed derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedRole {
    Signal,
    Noise,
    VertexSet,
}

/// Derives the seed for one role of one trial; distinct roles and trials
/// never collide on a stream.
pub fn trial_seed(base_seed: u64, trial: u64, role: SeedRole) -> u64 {
    let tag = match role {
        SeedRole::Signal => 1,
        SeedRole::Noise => 2,
        SeedRole::VertexSet => 3,
    };
    seed::mix(base_seed, trial, tag)
}

/// Everything a single grid cell needs to build its pipelines.
#[derive(Debug, Clone)]
pub struct CellContext {
    pub basis: Arc<SpectralBasis>,
    pub gamma_x: DMatrix<f64>,
    pub m_ratio: usize,
    pub sigma2: f64,
    pub band: Band,
    pub domain: Domain,
    pub smoothness_eps: f64,
    pub regularization: f64,
}

impl CellContext {
    /// Reduced dimension `K = N / m_ratio`.
    pub fn k(&self) -> Result<usize> {
        let n = self.basis.n();
        if self.m_ratio == 0 {
            return Err(Error::InvalidParameter("fold ratio must be >= 1".into()));
        }
        if !n.is_multiple_of(self.m_ratio) {
            return Err(Error::NotDivisible {
                n,
                m: self.m_ratio,
            });
        }
        Ok(n / self.m_ratio)
    }

    fn band_kernel(&self, k: usize) -> SpectralKernel {
        match self.band {
            Band::Fullband => fullband_s(self.basis.lambda_max()),
            Band::Bandlimited => bandlimited_s(k),
        }
    }

    /// Assembles the recovery pipeline for one method. Vertex-domain methods
    /// that sample vertices need `vertex_set`; the baseline and identity
    /// methods ignore it.
    pub fn build_pipeline(
        &self,
        method: Method,
        vertex_set: Option<&[usize]>,
    ) -> Result<RecoveryPipeline> {
        let basis = self.basis.as_ref();
        let n = basis.n();
        let k = self.k()?;
        match method {
            Method::Identity => {
                let all: Vec<usize> = (0..n).collect();
                let s = vertex_sampler(basis, None, &all)?;
                let w = vertex_reconstructor(basis, None, &all)?;
                return RecoveryPipeline::new(s, CorrectionFilter::identity(n), w);
            }
            Method::BlBaseline => return bandlimited_baseline(basis, self.m_ratio, None),
            _ => {}
        }

        let band = self.band_kernel(k);
        let cosine = cosine_w(basis.lambda_max());
        let (s, w_pre) = match self.domain {
            Domain::Spectral => (
                spectral_sampler(basis, &band, self.m_ratio, None)?,
                spectral_reconstructor(basis, &cosine, self.m_ratio, None)?,
            ),
            Domain::Vertex => {
                let set = vertex_set.ok_or(Error::EmptySampleSet)?;
                (
                    vertex_sampler(basis, Some(&band), set)?,
                    vertex_reconstructor(basis, Some(&cosine), set)?,
                )
            }
        };
        let gamma_eta = noise_covariance(k, self.sigma2 + self.regularization);
        match method {
            Method::Unc => {
                let (h, w) = correction_unconstrained(&s, &self.gamma_x, &gamma_eta)?;
                RecoveryPipeline::new(s, h, w)
            }
            Method::Pre => {
                let h = correction_predefined(&s, &w_pre, &self.gamma_x, &gamma_eta)?;
                RecoveryPipeline::new(s, h, w_pre)
            }
            Method::SmoothPre => {
                let prior =
                    SmoothnessPrior::new(smoothness_v(basis.lambda_max(), self.smoothness_eps), 1.0)?;
                let h = smoothness_correction(&prior, basis, &s, &w_pre)?;
                RecoveryPipeline::new(s, h, w_pre)
            }
            Method::SmoothUnc => {
                // prior model replaces the true covariance; measurements stay
                // noisy, the model just does not know it
                let prior =
                    SmoothnessPrior::new(smoothness_v(basis.lambda_max(), self.smoothness_eps), 1.0)?;
                let cov = crate::priors::smoothness_covariance(&prior, basis)?;
                let model_eta = noise_covariance(k, self.regularization);
                let (h, w) = correction_unconstrained(&s, cov.matrix(), &model_eta)?;
                RecoveryPipeline::new(s, h, w)
            }
            Method::BlBaseline | Method::Identity => unreachable!("handled above"),
        }
    }
}

/// Outcome of one method on one trial.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub method: Method,
    pub result: std::result::Result<TrialMetrics, String>,
}

/// Per-trial error metrics of a successful recovery.
#[derive(Debug, Clone, Copy)]
pub struct TrialMetrics {
    pub squared_error: f64,
    pub analytic_mse: f64,
}

/// Draws the white measurement-noise vector a trial uses; exposed so single
/// recoveries can replay exactly what the harness fed a given trial.
pub fn draw_noise(n: usize, sigma2: f64, noise_seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let scale = sigma2.sqrt();
    DVector::from_fn(n, |_, _| {
        let z: f64 = rng.sample(StandardNormal);
        scale * z
    })
}

/// Runs one trial of one cell: draws the shared `(x, eta)` pair from derived
/// seeds, then applies every method to it. The noise vector is drawn at full
/// length and each pipeline consumes its first `K` entries, so methods with
/// different measurement counts still share the stream. Per-method failures
/// (typically singular grams) are captured, not propagated.
pub fn run_trial(
    ctx: &CellContext,
    process: &GwssProcess,
    methods: &[Method],
    base_seed: u64,
    trial: u64,
) -> Result<Vec<TrialOutcome>> {
    let n = ctx.basis.n();
    check_same_size(ctx, process)?;
    let k = ctx.k()?;
    let x = sample_signal(process, trial_seed(base_seed, trial, SeedRole::Signal));
    let eta_full = draw_noise(n, ctx.sigma2, trial_seed(base_seed, trial, SeedRole::Noise));
    let vertex_set = if ctx.domain == Domain::Vertex {
        Some(random_vertex_set(
            n,
            k,
            trial_seed(base_seed, trial, SeedRole::VertexSet),
        )?)
    } else {
        None
    };
    let mut outcomes = Vec::with_capacity(methods.len());
    for &method in methods {
        let result = ctx
            .build_pipeline(method, vertex_set.as_deref())
            .and_then(|pipeline| {
                let kp = pipeline.k();
                let eta = DVector::from_fn(kp, |i, _| eta_full[i]);
                let recovered = pipeline.apply(&x, Some(&eta))?;
                let analytic =
                    analytic_mse(&pipeline, &ctx.gamma_x, &noise_covariance(kp, ctx.sigma2))?;
                Ok(TrialMetrics {
                    squared_error: (recovered - &x).norm_squared(),
                    analytic_mse: analytic,
                })
            })
            .map_err(|e| e.to_string());
        outcomes.push(TrialOutcome { method, result });
    }
    Ok(outcomes)
}

fn check_same_size(ctx: &CellContext, process: &GwssProcess) -> Result<()> {
    if ctx.basis.n() != process.basis().n() || ctx.gamma_x.nrows() != ctx.basis.n() {
        return Err(Error::DimensionMismatch {
            what: "cell context",
            expected: ctx.basis.n(),
            got: process.basis().n().min(ctx.gamma_x.nrows()),
        });
    }
    Ok(())
}

/// One aggregated row of the result table, keyed by
/// `(graph, noise, band, domain, method)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub graph: String,
    pub noise: f64,
    pub band: String,
    pub domain: String,
    pub method: String,
    /// `10 log10(mean ||xt - x||^2 / n)` over successful trials.
    pub mse_db: f64,
    /// Sample standard deviation of the per-trial dB values.
    pub std_db: f64,
    /// Successful trials.
    pub trials: usize,
    /// Trials dropped because the method failed on them.
    pub failed: usize,
    pub mean_sq: f64,
    pub std_sq: f64,
    pub mean_analytic: f64,
    pub n_vertices: usize,
}

/// Aggregated benchmark results.
#[derive(Debug, Clone, PartialEq)]
pub struct MseTable {
    pub rows: Vec<MseRow>,
}

impl MseTable {
    pub fn find(
        &self,
        graph: &str,
        noise: f64,
        band: &str,
        domain: &str,
        method: &str,
    ) -> Option<&MseRow> {
        self.rows.iter().find(|r| {
            r.graph == graph
                && r.noise == noise
                && r.band == band
                && r.domain == domain
                && r.method == method
        })
    }

    /// Fixed-schema CSV with 4-significant-digit dB columns; byte-stable for
    /// a given table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("graph,noise,band,domain,method,mse_db,std_db,trials\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                csv_field(&r.graph),
                fmt_plain(r.noise),
                csv_field(&r.band),
                csv_field(&r.domain),
                csv_field(&r.method),
                fmt_sig(r.mse_db, 4),
                fmt_sig(r.std_db, 4),
                r.trials
            ));
        }
        out
    }
}

/// Runs the whole experiment grid single-threaded.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MseTable> {
    run_experiment_with_threads(config, 1)
}

/// Runs the experiment grid with trials spread over `threads` workers.
/// Results are merged in trial order, so the output does not depend on the
/// worker count.
pub fn run_experiment_with_threads(config: &ExperimentConfig, threads: usize) -> Result<MseTable> {
    config.validate()?;
    let mut rows = Vec::new();
    for spec in &config.graphs {
        let graph = spec.build()?;
        let basis = Arc::new(eigendecompose(&laplacian(&graph))?);
        let psd = config.psd.kernel(basis.lambda_max()).values_on(&basis)?;
        let process = GwssProcess::new(basis.clone(), psd)?;
        let gamma_x = covariance_from_psd(&process).into_matrix();
        for &sigma2 in &config.noise_sigma2 {
            for &band in &config.bands {
                for &domain in &config.domains {
                    let ctx = CellContext {
                        basis: basis.clone(),
                        gamma_x: gamma_x.clone(),
                        m_ratio: config.m_ratio,
                        sigma2,
                        band,
                        domain,
                        smoothness_eps: config.smoothness_eps,
                        regularization: config.regularization,
                    };
                    ctx.k()?;
                    let per_trial = run_cell_trials(&ctx, &process, config, threads)?;
                    aggregate_cell(spec.label(), &ctx, config, per_trial, &mut rows)?;
                }
            }
        }
    }
    Ok(MseTable { rows })
}

fn run_cell_trials(
    ctx: &CellContext,
    process: &GwssProcess,
    config: &ExperimentConfig,
    threads: usize,
) -> Result<Vec<Vec<TrialOutcome>>> {
    let trials = config.trials;
    let workers = threads.max(1).min(trials);
    if workers <= 1 {
        return (0..trials)
            .map(|t| run_trial(ctx, process, &config.methods, config.base_seed, t as u64))
            .collect();
    }
    let mut merged: Vec<Option<Result<Vec<TrialOutcome>>>> = Vec::new();
    merged.resize_with(trials, || None);
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(workers);
        for worker in 0..workers {
            handles.push(scope.spawn(move || {
                let mut out = Vec::new();
                let mut t = worker;
                while t < trials {
                    out.push((
                        t,
                        run_trial(ctx, process, &config.methods, config.base_seed, t as u64),
                    ));
                    t += workers;
                }
                out
            }));
        }
        for handle in handles {
            for (t, result) in handle.join().expect("benchmark worker panicked") {
                merged[t] = Some(result);
            }
        }
    });
    merged
        .into_iter()
        .map(|slot| slot.expect("every trial index is covered"))
        .collect()
}

const DB_FLOOR: f64 = 1e-300;

fn aggregate_cell(
    graph_label: &str,
    ctx: &CellContext,
    config: &ExperimentConfig,
    per_trial: Vec<Vec<TrialOutcome>>,
    rows: &mut Vec<MseRow>,
) -> Result<()> {
    let n = ctx.basis.n();
    for (mi, &method) in config.methods.iter().enumerate() {
        let mut sq = Vec::new();
        let mut analytic = Vec::new();
        let mut failed = 0usize;
        let mut last_error = String::new();
        for trial in &per_trial {
            match &trial[mi].result {
                Ok(metrics) => {
                    sq.push(metrics.squared_error);
                    analytic.push(metrics.analytic_mse);
                }
                Err(message) => {
                    failed += 1;
                    last_error = message.clone();
                }
            }
        }
        if sq.is_empty() {
            return Err(Error::AllTrialsFailed {
                method: method.label().to_string(),
                trials: config.trials,
                last_error,
            });
        }
        let per_db: Vec<f64> = sq
            .iter()
            .map(|&s| 10.0 * (s / n as f64).max(DB_FLOOR).log10())
            .collect();
        let mean_sq = mean(&sq);
        let row = MseRow {
            graph: graph_label.to_string(),
            noise: ctx.sigma2,
            band: ctx.band.label().to_string(),
            domain: ctx.domain.label().to_string(),
            method: method.label().to_string(),
            mse_db: 10.0 * (mean_sq / n as f64).max(DB_FLOOR).log10(),
            std_db: sample_std(&per_db),
            trials: sq.len(),
            failed,
            mean_sq,
            std_sq: sample_std(&sq),
            mean_analytic: mean(&analytic),
            n_vertices: n,
        };
        rows.push(row);
    }
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

// --- CSV -------------------------------------------------------------------

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Shortest exact decimal form, used for the noise column.
fn fmt_plain(x: f64) -> String {
    format!("{x}")
}

/// Fixed significant digits without exponent notation; dB values live well
/// inside the range where this stays compact.
fn fmt_sig(x: f64, digits: i32) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return format!("{:.*}", (digits - 1) as usize, 0.0);
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (digits - 1 - magnitude).max(0) as usize;
    let rounded = format!("{x:.decimals$}");
    // rounding can carry into the next decade ("9.9999" -> "10.000"); redo
    // with the post-rounding magnitude so the digit count stays fixed
    let r: f64 = rounded.parse().unwrap_or(x);
    if r != 0.0 {
        let new_magnitude = r.abs().log10().floor() as i32;
        if new_magnitude != magnitude {
            let decimals = (digits - 1 - new_magnitude).max(0) as usize;
            return format!("{x:.decimals$}");
        }
    }
    rounded
}

/// One parsed CSV record.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub graph: String,
    pub noise: f64,
    pub band: String,
    pub domain: String,
    pub method: String,
    pub mse_db: f64,
    pub std_db: f64,
    pub trials: usize,
}

const CSV_HEADER: &str = "graph,noise,band,domain,method,mse_db,std_db,trials";

/// Parses a table produced by [`MseTable::to_csv`], undoing field quoting.
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == CSV_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "bad csv header: {other:?}, expected {CSV_HEADER:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields = split_csv_line(line)
            .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 2)))?;
        if fields.len() != 8 {
            return Err(Error::Parse(format!(
                "line {}: expected 8 fields, got {}",
                idx + 2,
                fields.len()
            )));
        }
        let num = |field: &str, what: &str| -> Result<f64> {
            field
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad {what}: {field:?}", idx + 2)))
        };
        rows.push(CsvRow {
            graph: fields[0].clone(),
            noise: num(&fields[1], "noise")?,
            band: fields[2].clone(),
            domain: fields[3].clone(),
            method: fields[4].clone(),
            mse_db: num(&fields[5], "mse_db")?,
            std_db: num(&fields[6], "std_db")?,
            trials: fields[7]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad trials", idx + 2)))?,
        });
    }
    Ok(rows)
}

fn split_csv_line(line: &str) -> std::result::Result<Vec<String>, String> {
    let mut fields = Vec::new();
    let mut current = String::new();
    let mut chars = line.chars().peekable();
    let mut quoted = false;
    while let Some(c) = chars.next() {
        if quoted {
            match c {
                '"' => {
                    if chars.peek() == Some(&'"') {
                        chars.next();
                        current.push('"');
                    } else {
                        quoted = false;
                    }
                }
                _ => current.push(c),
            }
        } else {
            match c {
                '"' if current.is_empty() => quoted = true,
                ',' => fields.push(std::mem::take(&mut current)),
                _ => current.push(c),
            }
        }
    }
    if quoted {
        return Err("unterminated quote".into());
    }
    fields.push(current);
    Ok(fields)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig::from_toml_str(
            r#"
            trials = 4
            base_seed = 7
            m_ratio = 4
            noise_sigma2 = [0.3]
            bands = ["fullband"]
            domains = ["vertex", "spectral"]
            methods = ["unc", "pre", "bl-baseline"]

            [[graphs]]
            kind = "sensor"
            n = 16
            k = 4
            seed = 5
            "#,
        )
        .unwrap()
    }

    #[test]
    fn config_parses_with_defaults() {
        let config = tiny_config();
        assert_eq!(config.psd, PsdKind::Gaussian);
        assert_eq!(config.smoothness_eps, DEFAULT_SMOOTHNESS_EPS);
        assert_eq!(config.regularization, 0.0);
        match &config.graphs[0] {
            GraphSpec::Sensor { n: 16, k: 4, seed: 5 } => {}
            other => panic!("unexpected graph spec {other:?}"),
        }
    }

    #[test]
    fn config_rejects_unknown_and_invalid_fields() {
        assert!(matches!(
            ExperimentConfig::from_toml_str("nonsense = 1"),
            Err(Error::Parse(_))
        ));
        let mut config = tiny_config();
        config.trials = 0;
        assert!(config.validate().is_err());
        config = tiny_config();
        config.methods.clear();
        assert!(config.validate().is_err());
        config = tiny_config();
        config.noise_sigma2 = vec![-0.1];
        assert!(config.validate().is_err());
    }

    #[test]
    fn method_and_band_names_round_trip() {
        for m in [
            Method::Unc,
            Method::Pre,
            Method::SmoothPre,
            Method::SmoothUnc,
            Method::BlBaseline,
            Method::Identity,
        ] {
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
        }
        assert!("nope".parse::<Method>().is_err());
        for b in [Band::Fullband, Band::Bandlimited] {
            assert_eq!(b.label().parse::<Band>().unwrap(), b);
        }
        for d in [Domain::Vertex, Domain::Spectral] {
            assert_eq!(d.label().parse::<Domain>().unwrap(), d);
        }
    }

    #[test]
    fn seeds_are_distinct_per_role_and_trial() {
        let mut seen = std::collections::HashSet::new();
        for trial in 0..100u64 {
            for role in [SeedRole::Signal, SeedRole::Noise, SeedRole::VertexSet] {
                assert!(seen.insert(trial_seed(42, trial, role)));
            }
        }
    }

    #[test]
    fn trials_are_reproducible() {
        let config = tiny_config();
        let table_a = run_experiment(&config).unwrap();
        let table_b = run_experiment(&config).unwrap();
        assert_eq!(table_a.to_csv(), table_b.to_csv());
        for (a, b) in table_a.rows.iter().zip(&table_b.rows) {
            assert_eq!(a.mean_sq.to_bits(), b.mean_sq.to_bits());
        }
    }

    #[test]
    fn worker_count_does_not_change_bytes() {
        let config = tiny_config();
        let one = run_experiment_with_threads(&config, 1).unwrap();
        let three = run_experiment_with_threads(&config, 3).unwrap();
        let many = run_experiment_with_threads(&config, 16).unwrap();
        assert_eq!(one.to_csv(), three.to_csv());
        assert_eq!(one.to_csv(), many.to_csv());
    }

    #[test]
    fn identity_method_recovers_exactly_without_noise() {
        let config = ExperimentConfig::from_toml_str(
            r#"
            trials = 2
            base_seed = 1
            m_ratio = 4
            noise_sigma2 = [0.0]
            bands = ["fullband"]
            domains = ["vertex"]
            methods = ["identity"]

            [[graphs]]
            kind = "grid"
            rows = 4
            cols = 4
            "#,
        )
        .unwrap();
        let table = run_experiment(&config).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].mean_sq, 0.0);
        assert_eq!(table.rows[0].failed, 0);
        assert_eq!(table.rows[0].mean_analytic, 0.0);
    }

    #[test]
    fn table_rows_cover_the_grid() {
        let config = tiny_config();
        let table = run_experiment(&config).unwrap();
        // 1 graph x 1 noise x 1 band x 2 domains x 3 methods
        assert_eq!(table.rows.len(), 6);
        assert!(table.find("sensor", 0.3, "fullband", "vertex", "unc").is_some());
        assert!(table.find("sensor", 0.3, "fullband", "spectral", "bl-baseline").is_some());
        assert!(table.find("sensor", 0.3, "fullband", "vertex", "nope").is_none());
        for row in &table.rows {
            assert!(row.mse_db.is_finite() && row.std_db.is_finite());
            assert!(row.trials + row.failed == config.trials);
            assert!(row.mean_analytic > 0.0);
        }
    }

    #[test]
    fn single_trial_has_zero_spread() {
        let mut config = tiny_config();
        config.trials = 1;
        let table = run_experiment(&config).unwrap();
        for row in &table.rows {
            assert_eq!(row.std_db, 0.0);
            assert_eq!(row.trials, 1);
        }
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(-11.9345, 4), "-11.93");
        assert_eq!(fmt_sig(0.0345678, 4), "0.03457");
        assert_eq!(fmt_sig(443.21, 4), "443.2");
        assert_eq!(fmt_sig(0.0, 4), "0.000");
        assert_eq!(fmt_sig(9.9999, 4), "10.00");
        assert_eq!(fmt_plain(0.3), "0.3");
        assert_eq!(fmt_plain(0.0), "0");
    }

    #[test]
    fn csv_round_trips_including_quoting() {
        let table = MseTable {
            rows: vec![MseRow {
                graph: "weird,name\"x".into(),
                noise: 0.3,
                band: "fullband".into(),
                domain: "vertex".into(),
                method: "unc".into(),
                mse_db: -12.3456,
                std_db: 1.0456,
                trials: 20,
                failed: 0,
                mean_sq: 1.0,
                std_sq: 0.1,
                mean_analytic: 1.0,
                n_vertices: 64,
            }],
        };
        let csv = table.to_csv();
        let rows = parse_csv(&csv).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].graph, "weird,name\"x");
        assert_eq!(rows[0].mse_db, -12.35);
        assert_eq!(rows[0].trials, 20);
        assert!(matches!(parse_csv("bogus\n1,2"), Err(Error::Parse(_))));
    }

    #[test]
    fn aggregation_counts_failures_and_rejects_total_loss() {
        let ctx_methods = [Method::Unc];
        let make = |ok: bool| TrialOutcome {
            method: Method::Unc,
            result: if ok {
                Ok(TrialMetrics {
                    squared_error: 4.0,
                    analytic_mse: 4.0,
                })
            } else {
                Err("singular".into())
            },
        };
        let config = tiny_config();
        let mut probe_config = config.clone();
        probe_config.methods = ctx_methods.to_vec();
        let graph = probe_config.graphs[0].build().unwrap();
        let basis = Arc::new(eigendecompose(&laplacian(&graph)).unwrap());
        let psd = probe_config.psd.kernel(basis.lambda_max()).values_on(&basis).unwrap();
        let process = GwssProcess::new(basis.clone(), psd).unwrap();
        let gamma_x = covariance_from_psd(&process).into_matrix();
        let ctx = CellContext {
            basis,
            gamma_x,
            m_ratio: 4,
            sigma2: 0.3,
            band: Band::Fullband,
            domain: Domain::Vertex,
            smoothness_eps: 0.1,
            regularization: 0.0,
        };
        probe_config.trials = 3;
        let mut rows = Vec::new();
        aggregate_cell(
            "sensor",
            &ctx,
            &probe_config,
            vec![vec![make(true)], vec![make(false)], vec![make(true)]],
            &mut rows,
        )
        .unwrap();
        assert_eq!(rows[0].trials, 2);
        assert_eq!(rows[0].failed, 1);
        let err = aggregate_cell(
            "sensor",
            &ctx,
            &probe_config,
            vec![vec![make(false)], vec![make(false)], vec![make(false)]],
            &mut Vec::new(),
        );
        assert!(matches!(err, Err(Error::AllTrialsFailed { .. })));
    }
}
