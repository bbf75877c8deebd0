//! `gwsamp` — sampling, recovery, and benchmarks for stationary graph
//! signals.
//!
//! Exit codes: 0 on success, 2 for usage-class problems (bad arguments,
//! malformed configs, missing files), 3 for numerical failures (singular
//! grams, exhausted retries, degenerate spectra).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use gwsamp::bench::{
    draw_noise, run_experiment_with_threads, trial_seed, Band, CellContext, Domain,
    ExperimentConfig, Method, PsdKind, SeedRole,
};
use gwsamp::graph::{gen_erdos_renyi, gen_grid2d, gen_sensor_knn, laplacian, Graph};
use gwsamp::sampling::{kernel_by_name, random_vertex_set};
use gwsamp::selftest::{all_passed, run_selftest};
use gwsamp::spectral::eigendecompose;
use gwsamp::stationarity::{covariance_from_psd, sample_signal, GwssProcess};
use gwsamp::wiener::{analytic_mse, noise_covariance};
use gwsamp::{Error, Result};

#[derive(Parser)]
#[command(
    name = "gwsamp",
    version,
    about = "Generalized sampling and minimum-MSE recovery of stationary graph signals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GraphOpts {
    /// Graph family: sensor | er | grid
    #[arg(long)]
    graph: String,
    /// Vertex count (sensor, er)
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Neighbors per vertex (sensor)
    #[arg(long, default_value_t = 6)]
    knn: usize,
    /// Edge probability (er)
    #[arg(long, default_value_t = 0.3)]
    p: f64,
    /// Grid rows (grid)
    #[arg(long)]
    rows: Option<usize>,
    /// Grid columns (grid)
    #[arg(long)]
    cols: Option<usize>,
    /// Graph construction seed (sensor, er)
    #[arg(long, default_value_t = 0)]
    graph_seed: u64,
}

impl GraphOpts {
    fn build(&self) -> Result<Graph> {
        match self.graph.as_str() {
            "sensor" => gen_sensor_knn(self.n, self.knn, self.graph_seed),
            "er" => gen_erdos_renyi(self.n, self.p, self.graph_seed),
            "grid" => {
                let rows = self
                    .rows
                    .ok_or_else(|| Error::InvalidParameter("grid needs --rows".into()))?;
                let cols = self
                    .cols
                    .ok_or_else(|| Error::InvalidParameter("grid needs --cols".into()))?;
                gen_grid2d(rows, cols)
            }
            other => Err(Error::InvalidParameter(format!(
                "unknown graph family: {other} (expected sensor, er, or grid)"
            ))),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph and print it as an edge list
    GraphGen {
        #[command(flatten)]
        graph: GraphOpts,
        /// Write to a file instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a named kernel on a graph's spectrum (CSV: index,lambda,value)
    KernelsDump {
        #[command(flatten)]
        graph: GraphOpts,
        /// Kernel name: fullband | bandlimited | cosine | smoothness | gaussian | identity
        #[arg(long)]
        kernel: String,
        /// Fold ratio fixing the reduced size for band-limited kernels
        #[arg(long, default_value_t = 4)]
        m_ratio: usize,
        /// Offset of the smoothness profile
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample, corrupt, and recover one signal realization
    Recover {
        #[command(flatten)]
        graph: GraphOpts,
        /// Recovery method: unc | pre | smooth-pre | smooth-unc | bl-baseline | identity
        #[arg(long)]
        method: String,
        /// Sampling domain: vertex | spectral
        #[arg(long, default_value_t = String::from("vertex"))]
        domain: String,
        /// Acquisition band: fullband | bandlimited
        #[arg(long, default_value_t = String::from("fullband"))]
        band: String,
        /// Signal spectrum: gaussian | flat
        #[arg(long, default_value_t = String::from("gaussian"))]
        psd: String,
        /// Fold ratio N/K
        #[arg(long, default_value_t = 4)]
        m_ratio: usize,
        /// Measurement noise variance
        #[arg(long, default_value_t = 0.3)]
        noise: f64,
        /// Base seed shared with the experiment harness
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trial index within the seed's stream
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Extra diagonal regularization for noiseless grams
        #[arg(long, default_value_t = 0.0)]
        regularization: f64,
        /// Write per-vertex results (CSV: index,x,xtilde,y)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark grid from a TOML config and print the CSV table
    Experiment {
        /// Config file path
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (the result does not depend on this)
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in consistency checks
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if matches!(cli.command, Command::Selftest) {
        return selftest_command();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_class(&e))
        }
    }
}

fn selftest_command() -> ExitCode {
    let reports = run_selftest();
    for report in &reports {
        let tag = if report.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {}: {}", report.name, report.detail);
    }
    if all_passed(&reports) {
        println!("all {} checks passed", reports.len());
        ExitCode::SUCCESS
    } else {
        eprintln!("error: one or more consistency checks failed");
        ExitCode::from(3)
    }
}

/// 2 for problems a caller can fix in the invocation, 3 for numerical
/// breakdowns inside an otherwise valid computation.
fn exit_class(e: &Error) -> u8 {
    match e {
        Error::NotSquare { .. }
        | Error::NonSymmetric { .. }
        | Error::NegativeWeight { .. }
        | Error::SelfLoop { .. }
        | Error::InvalidParameter(_)
        | Error::DimensionMismatch { .. }
        | Error::NonFiniteKernelValue { .. }
        | Error::KernelNotPositive { .. }
        | Error::UnknownKernel(_)
        | Error::IndexOutOfRange { .. }
        | Error::DuplicateVertex { .. }
        | Error::KExceedsN { .. }
        | Error::NotDivisible { .. }
        | Error::EmptySampleSet
        | Error::Parse(_)
        | Error::Io(_) => 2,
        Error::DisconnectedAfterRetries { .. }
        | Error::ConvergenceFailure
        | Error::NonUnitaryReduced { .. }
        | Error::SingularGram { .. }
        | Error::SingularCrossGram { .. }
        | Error::ZeroDenominator { .. }
        | Error::AllTrialsFailed { .. } => 3,
    }
}

fn emit(out: Option<&PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content).map_err(Error::from),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GraphGen { graph, out } => {
            let g = graph.build()?;
            emit(out.as_ref(), &g.to_edge_list())
        }
        Command::KernelsDump {
            graph,
            kernel,
            m_ratio,
            eps,
            out,
        } => {
            let g = graph.build()?;
            let basis = eigendecompose(&laplacian(&g))?;
            if m_ratio == 0 || basis.n() % m_ratio != 0 {
                return Err(Error::NotDivisible {
                    n: basis.n(),
                    m: m_ratio.max(1),
                });
            }
            let k = basis.n() / m_ratio;
            let values = kernel_by_name(&kernel, basis.lambda_max(), k, eps)?.values_on(&basis)?;
            let mut csv = String::from("index,lambda,value\n");
            for i in 0..basis.n() {
                csv.push_str(&format!("{i},{},{}\n", basis.lambda()[i], values[i]));
            }
            emit(out.as_ref(), &csv)
        }
        Command::Recover {
            graph,
            method,
            domain,
            band,
            psd,
            m_ratio,
            noise,
            seed,
            trial,
            regularization,
            out,
        } => {
            let method: Method = method.parse()?;
            let domain: Domain = domain.parse()?;
            let band: Band = band.parse()?;
            let psd_kind = match psd.as_str() {
                "gaussian" => PsdKind::Gaussian,
                "flat" => PsdKind::Flat,
                other => return Err(Error::Parse(format!("unknown psd: {other}"))),
            };
            if noise < 0.0 {
                return Err(Error::InvalidParameter(
                    "noise variance must be nonnegative".into(),
                ));
            }

            let g = graph.build()?;
            let basis = Arc::new(eigendecompose(&laplacian(&g))?);
            let n = basis.n();
            let psd_values = psd_kind.kernel(basis.lambda_max()).values_on(&basis)?;
            let process = GwssProcess::new(basis.clone(), psd_values)?;
            let gamma_x = covariance_from_psd(&process).into_matrix();
            let ctx = CellContext {
                basis,
                gamma_x,
                m_ratio,
                sigma2: noise,
                band,
                domain,
                smoothness_eps: 0.1,
                regularization,
            };
            let k = ctx.k()?;
            let vertex_set = match domain {
                Domain::Vertex => Some(random_vertex_set(
                    n,
                    k,
                    trial_seed(seed, trial, SeedRole::VertexSet),
                )?),
                Domain::Spectral => None,
            };
            let pipeline = ctx.build_pipeline(method, vertex_set.as_deref())?;

            let x = sample_signal(&process, trial_seed(seed, trial, SeedRole::Signal));
            let eta_full = draw_noise(n, noise, trial_seed(seed, trial, SeedRole::Noise));
            let kp = pipeline.k();
            let eta = DVector::from_fn(kp, |i, _| eta_full[i]);
            let y = pipeline.sampler().apply(&x)? + &eta;
            let recovered = pipeline.apply(&x, Some(&eta))?;
            let empirical = (&recovered - &x).norm_squared();
            let analytic = analytic_mse(&pipeline, &ctx.gamma_x, &noise_covariance(kp, noise))?;

            println!(
                "graph={} n={n} k={kp} method={} domain={} band={} sigma2={noise} seed={seed} trial={trial}",
                graph.graph,
                method.label(),
                domain.label(),
                band.label()
            );
            if let Some(set) = &vertex_set {
                let list: Vec<String> = set.iter().map(|v| v.to_string()).collect();
                println!("vertex_set={}", list.join(" "));
            }
            println!("empirical_sq_error={empirical:.12e}");
            println!("analytic_mse={analytic:.12e}");

            if out.is_some() {
                let mut csv = String::from("index,x,xtilde,y\n");
                for i in 0..n {
                    if i < kp {
                        csv.push_str(&format!("{i},{},{},{}\n", x[i], recovered[i], y[i]));
                    } else {
                        csv.push_str(&format!("{i},{},{},\n", x[i], recovered[i]));
                    }
                }
                emit(out.as_ref(), &csv)?;
            }
            Ok(())
        }
        Command::Experiment {
            config,
            threads,
            out,
        } => {
            if threads == 0 {
                return Err(Error::InvalidParameter("threads must be >= 1".into()));
            }
            let text = fs::read_to_string(&config)?;
            let config = ExperimentConfig::from_toml_str(&text)?;
            let table = run_experiment_with_threads(&config, threads)?;
            let dropped: usize = table.rows.iter().map(|r| r.failed).sum();
            if dropped > 0 {
                eprintln!(
                    "warning: {dropped} trial runs dropped for numerical reasons; \
                     affected rows average fewer trials"
                );
            }
            emit(out.as_ref(), &table.to_csv())
        }
        // handled in main so it can report its own exit status
        Command::Selftest => Ok(()),
    }
}
