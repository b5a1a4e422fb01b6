//! Synthetic AR(1) Gaussian designs and the path-timing harness.
//!
//! Samples come from ChaCha8 seeded with `seed`; replication `k` of a benchmark uses
//! ChaCha stream `k`, so replications are independent and individually reproducible.
//! Normal variates are drawn by inverting the normal CDF at open-interval uniforms.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimators::{fit_clime, fit_regression, fit_tiger, GridOptions, PrecisionOptions, RegressionOptions};
use crate::model::{DesignData, Method};
use crate::admm::SolverConfig;
use crate::path::PathOptions;
use crate::sparse::SymmetricTriplets;

/// Rows iid `N(0, Σ)` with `Σ_jk = ρ^{|j−k|}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Design {
    pub n: usize,
    pub d: usize,
    pub rho_corr: f64,
    pub seed: u64,
    /// ChaCha stream index; distinct streams give independent samples for one seed.
    pub stream: u64,
}

impl Ar1Design {
    pub fn new(n: usize, d: usize, rho_corr: f64, seed: u64) -> Self {
        Self {
            n,
            d,
            rho_corr,
            seed,
            stream: 0,
        }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    fn validate(&self, min_d: usize) -> Result<()> {
        if !(self.rho_corr.abs() < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "autocorrelation must lie in (-1, 1), got {}",
                self.rho_corr
            )));
        }
        if self.d < min_d {
            return Err(Error::DimensionTooSmall(self.d, min_d));
        }
        if self.n < 2 {
            return Err(Error::Dimension(format!("need n >= 2, got {}", self.n)));
        }
        Ok(())
    }
}

/// Standard normal source by CDF inversion.
pub struct NormalStream {
    rng: ChaCha8Rng,
    dist: Normal,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            rng,
            dist: Normal::standard(),
        }
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn next(&mut self) -> f64 {
        let u = self.uniform();
        self.dist.inverse_cdf(u)
    }
}

fn ar1_matrix(design: &Ar1Design, normals: &mut NormalStream) -> DMatrix<f64> {
    let (n, d, rho) = (design.n, design.d, design.rho_corr);
    let innov = (1.0 - rho * rho).sqrt();
    let mut x = DMatrix::zeros(n, d);
    // row by row so a prefix of columns does not depend on d
    for i in 0..n {
        let mut prev = normals.next();
        x[(i, 0)] = prev;
        for j in 1..d {
            prev = rho * prev + innov * normals.next();
            x[(i, j)] = prev;
        }
    }
    x
}

/// `y_i = 3 X_{i1} + 2 X_{i2} + 1.5 X_{i4} + ε_i` with `ε_i ~ N(0, 1)`.
pub fn gen_regression(design: &Ar1Design) -> Result<DesignData> {
    design.validate(4)?;
    let mut normals = NormalStream::new(design.seed, design.stream);
    let x = ar1_matrix(design, &mut normals);
    let y: Vec<f64> = (0..design.n)
        .map(|i| 3.0 * x[(i, 0)] + 2.0 * x[(i, 1)] + 1.5 * x[(i, 3)] + normals.next())
        .collect();
    DesignData::new(x, Some(y))
}

/// Coefficients of the generating model of [`gen_regression`] (0-based indices).
pub const TRUE_SUPPORT: [usize; 3] = [0, 1, 3];

/// AR(1) data without response, and the exact precision matrix `Σ^{-1}`.
///
/// The inverse is tridiagonal: off-diagonal `−ρ/(1−ρ²)`, diagonal `1/(1−ρ²)` at the
/// two ends and `(1+ρ²)/(1−ρ²)` in the interior.
pub fn gen_precision(design: &Ar1Design) -> Result<(DesignData, SymmetricTriplets)> {
    design.validate(2)?;
    let mut normals = NormalStream::new(design.seed, design.stream);
    let x = ar1_matrix(design, &mut normals);
    Ok((DesignData::new(x, None)?, ar1_precision(design.d, design.rho_corr)))
}

pub fn ar1_covariance(d: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |j, k| rho.powi((j as i32 - k as i32).abs()))
}

pub fn ar1_precision(d: usize, rho: f64) -> SymmetricTriplets {
    let s = 1.0 - rho * rho;
    let mut entries = Vec::with_capacity(2 * d);
    for j in 0..d {
        let diag = if d == 1 {
            1.0
        } else if j == 0 || j == d - 1 {
            1.0 / s
        } else {
            (1.0 + rho * rho) / s
        };
        entries.push((j, j, diag));
        if j + 1 < d {
            entries.push((j, j + 1, -rho / s));
        }
    }
    SymmetricTriplets::from_upper(d, entries)
}

/// What a benchmark times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BenchMethod {
    Regression(Method),
    Tiger,
    Clime,
}

impl BenchMethod {
    pub fn name(&self) -> String {
        match self {
            BenchMethod::Regression(m) => m.name(),
            BenchMethod::Tiger => "tiger".into(),
            BenchMethod::Clime => "clime".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub method: BenchMethod,
    pub n: usize,
    pub dims: Vec<usize>,
    pub replications: usize,
    pub nlambda: usize,
    pub rho_corr: f64,
    pub seed: u64,
    pub path: PathOptions,
}

impl BenchSpec {
    pub fn new(method: BenchMethod, dims: Vec<usize>) -> Self {
        Self {
            method,
            n: 100,
            dims,
            replications: 100,
            nlambda: 20,
            rho_corr: 0.5,
            seed: 1,
            path: PathOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub d: usize,
    pub mean_seconds: f64,
    pub sd_seconds: f64,
    /// Total ADMM iterations per replication.
    pub iterations: Vec<usize>,
    /// Replications with at least one unconverged path point.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub method: String,
    pub replications: usize,
    pub nlambda: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// CSV with columns `method,d,mean_s,sd_s,replications,nlambda`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,d,mean_s,sd_s,replications,nlambda\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:.6},{:.6},{},{}\n",
                self.method, r.d, r.mean_seconds, r.sd_seconds, self.replications, self.nlambda
            ));
        }
        s
    }
}

/// Times full path solves (excluding data generation) over fresh data per replication.
pub fn run_bench(spec: &BenchSpec, config: &SolverConfig) -> Result<BenchReport> {
    if spec.dims.is_empty() {
        return Err(Error::InvalidConfig("no dimensions to benchmark".into()));
    }
    if spec.replications < 1 {
        return Err(Error::InvalidConfig("replications must be at least 1".into()));
    }
    let grid = GridOptions {
        nlambda: Some(spec.nlambda),
        ..GridOptions::default()
    };
    let mut rows = Vec::with_capacity(spec.dims.len());
    for &d in &spec.dims {
        let mut times = Vec::with_capacity(spec.replications);
        let mut iterations = Vec::with_capacity(spec.replications);
        let mut failures = 0;
        for rep in 0..spec.replications {
            let design = Ar1Design::new(spec.n, d, spec.rho_corr, spec.seed).with_stream(rep as u64);
            let (elapsed, iters, ok) = match spec.method {
                BenchMethod::Regression(method) => {
                    let data = gen_regression(&design)?;
                    let opts = RegressionOptions {
                        grid: grid.clone(),
                        solver: config.clone(),
                        path: spec.path,
                        ..RegressionOptions::default()
                    };
                    let start = Instant::now();
                    let fit = fit_regression(&data, method, &opts)?;
                    let el = start.elapsed().as_secs_f64();
                    (el, fit.path.iterations.iter().sum(), fit.path.all_converged())
                }
                BenchMethod::Tiger | BenchMethod::Clime => {
                    let (data, _) = gen_precision(&design)?;
                    let opts = PrecisionOptions {
                        grid: grid.clone(),
                        solver: config.clone(),
                        path: spec.path,
                        ..PrecisionOptions::default()
                    };
                    let start = Instant::now();
                    let fit = if spec.method == BenchMethod::Tiger {
                        fit_tiger(&data, &opts)?
                    } else {
                        fit_clime(&data, &opts)?
                    };
                    let el = start.elapsed().as_secs_f64();
                    (el, fit.total_iterations(), fit.all_converged())
                }
            };
            times.push(elapsed);
            iterations.push(iters);
            if !ok {
                failures += 1;
            }
        }
        let k = times.len() as f64;
        let mean = times.iter().sum::<f64>() / k;
        let sd = if times.len() > 1 {
            (times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        rows.push(BenchRow {
            d,
            mean_seconds: mean,
            sd_seconds: sd,
            iterations,
            failures,
        });
    }
    Ok(BenchReport {
        method: spec.method.name(),
        replications: spec.replications,
        nlambda: spec.nlambda,
        rows,
    })
}
