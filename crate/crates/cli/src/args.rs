//! Command-line grammar and its validated form.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sparsereg::admm::{InnerSolver, SolverConfig};
use sparsereg::estimators::{GridOptions, PrecisionMethod, ScreenOptions};
use sparsereg::io::ResponseColumn;
use sparsereg::model::Method;
use sparsereg::path::{PathOptions, DEFAULT_STAGES};
use sparsereg::simulate::BenchMethod;

#[derive(Debug, Parser)]
#[command(name = "sparsereg", version, about = "Sparse regression and precision matrix estimation by ADMM")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a regression path and write its coefficients.
    Regress(RegressArgs),
    /// Estimate a sparse precision matrix path.
    Precision(PrecisionArgs),
    /// Generate a synthetic AR(1) Gaussian data set.
    Simulate(SimulateArgs),
    /// Time full path solves on synthetic data.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegressionMethod {
    Lad,
    Sqrt,
    Lq,
    Dantzig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionKind {
    Tiger,
    Clime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchKind {
    Lad,
    Sqrt,
    Lq,
    Dantzig,
    Tiger,
    Clime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimulateKind {
    Regression,
    Precision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Inner {
    Linearized,
    Cd,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("'{s}' is not a positive integer"))?;
    if v > 0 {
        Ok(v)
    } else {
        Err("must be at least 1".into())
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// ADMM penalty parameter.
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub rho: f64,
    /// Primal and dual residual tolerance.
    #[arg(long, default_value_t = 1e-5, value_parser = positive_f64)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000, value_parser = positive_usize)]
    pub max_iter: usize,
    /// Inner β-update.
    #[arg(long, value_enum, default_value_t = Inner::Linearized)]
    pub inner: Inner,
    /// Report raw ADMM iterates without exact refinement.
    #[arg(long)]
    pub no_refine: bool,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            rho: self.rho,
            tol: self.tol,
            max_iter: self.max_iter,
            inner: match self.inner {
                Inner::Linearized => InnerSolver::Linearized,
                Inner::Cd => InnerSolver::CoordinateDescent,
            },
            ..SolverConfig::default()
        }
    }

    pub fn path_options(&self) -> PathOptions {
        PathOptions {
            refine: !self.no_refine,
            ..PathOptions::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Number of λ values.
    #[arg(long, value_parser = positive_usize, conflicts_with = "lambdas")]
    pub nlambda: Option<usize>,
    /// Smallest λ as a fraction of λ_max.
    #[arg(long, value_parser = positive_f64, conflicts_with_all = ["lambda_min_value", "lambdas"])]
    pub lambda_min_ratio: Option<f64>,
    /// Smallest λ.
    #[arg(long, value_parser = positive_f64, conflicts_with = "lambdas")]
    pub lambda_min_value: Option<f64>,
    /// Explicit strictly decreasing λ values.
    #[arg(long, value_delimiter = ',', value_parser = positive_f64)]
    pub lambdas: Option<Vec<f64>>,
}

impl GridArgs {
    pub fn options(&self) -> GridOptions {
        GridOptions {
            nlambda: self.nlambda,
            min_ratio: self.lambda_min_ratio,
            min_value: self.lambda_min_value,
            values: self.lambdas.clone(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ScreenArgs {
    /// Solve on the full coordinate set only.
    #[arg(long)]
    pub no_screen: bool,
    /// Number of screening stages.
    #[arg(long, default_value_t = DEFAULT_STAGES, value_parser = positive_usize)]
    pub stages: usize,
}

impl ScreenArgs {
    pub fn options(&self) -> ScreenOptions {
        ScreenOptions {
            enabled: !self.no_screen,
            stages: self.stages,
            sizes: None,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RegressArgs {
    #[arg(long, value_enum)]
    pub method: RegressionMethod,
    /// Loss exponent for `--method lq`, in [1, 2].
    #[arg(long)]
    pub q: Option<f64>,
    /// CSV with predictors and the response.
    #[arg(long)]
    pub input: PathBuf,
    /// Coefficient path CSV.
    #[arg(long)]
    pub output: PathBuf,
    /// Response column: a header name or a 1-based index; defaults to the last column.
    #[arg(long)]
    pub response: Option<String>,
    /// Do not center predictors and response.
    #[arg(long)]
    pub no_center: bool,
    /// Scale predictors to unit variance.
    #[arg(long)]
    pub scale: bool,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub screen: ScreenArgs,
}

impl RegressArgs {
    pub fn method(&self) -> Result<Method, String> {
        match (self.method, self.q) {
            (RegressionMethod::Lq, Some(q)) => Method::lq(q).map_err(|e| format!("--q: {e}")),
            (RegressionMethod::Lq, None) => Err("--q is required with --method lq".into()),
            (_, Some(_)) => Err("--q applies only to --method lq".into()),
            (RegressionMethod::Lad, None) => Ok(Method::LAD),
            (RegressionMethod::Sqrt, None) => Ok(Method::SQRT),
            (RegressionMethod::Dantzig, None) => Ok(Method::Dantzig),
        }
    }

    pub fn response(&self) -> Result<ResponseColumn, String> {
        Ok(match &self.response {
            None => ResponseColumn::Last,
            Some(s) => match s.parse::<usize>() {
                Ok(0) => return Err("--response: indices are 1-based".into()),
                Ok(k) => ResponseColumn::Index(k - 1),
                Err(_) => ResponseColumn::Name(s.clone()),
            },
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct PrecisionArgs {
    #[arg(long, value_enum)]
    pub method: PrecisionKind,
    /// CSV whose columns are the variables.
    #[arg(long)]
    pub input: PathBuf,
    /// Precision triplet CSV.
    #[arg(long)]
    pub output: PathBuf,
    /// CLIME on the correlation matrix instead of the covariance.
    #[arg(long)]
    pub correlation: bool,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub screen: ScreenArgs,
}

impl PrecisionArgs {
    pub fn method(&self) -> PrecisionMethod {
        match self.method {
            PrecisionKind::Tiger => PrecisionMethod::Tiger,
            PrecisionKind::Clime => PrecisionMethod::Clime,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub kind: SimulateKind,
    #[arg(long, value_parser = positive_usize)]
    pub n: usize,
    #[arg(long, value_parser = positive_usize)]
    pub d: usize,
    /// Autocorrelation of adjacent predictors.
    #[arg(long, default_value_t = 0.5)]
    pub rho_corr: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the true precision matrix (precision kind only).
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub method: BenchKind,
    #[arg(long)]
    pub q: Option<f64>,
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',', required = true, value_parser = positive_usize)]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 100, value_parser = positive_usize)]
    pub n: usize,
    #[arg(long, default_value_t = 100, value_parser = positive_usize)]
    pub replications: usize,
    #[arg(long, default_value_t = 20, value_parser = positive_usize)]
    pub nlambda: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rho_corr: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Report CSV; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

impl BenchArgs {
    pub fn method(&self) -> Result<BenchMethod, String> {
        let regression = |m| Ok(BenchMethod::Regression(m));
        match (self.method, self.q) {
            (BenchKind::Lq, Some(q)) => regression(Method::lq(q).map_err(|e| format!("--q: {e}"))?),
            (BenchKind::Lq, None) => Err("--q is required with --method lq".into()),
            (_, Some(_)) => Err("--q applies only to --method lq".into()),
            (BenchKind::Lad, None) => regression(Method::LAD),
            (BenchKind::Sqrt, None) => regression(Method::SQRT),
            (BenchKind::Dantzig, None) => regression(Method::Dantzig),
            (BenchKind::Tiger, None) => Ok(BenchMethod::Tiger),
            (BenchKind::Clime, None) => Ok(BenchMethod::Clime),
        }
    }
}
