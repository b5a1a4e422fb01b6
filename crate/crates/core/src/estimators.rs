//! Regression estimators over a λ path, and TIGER / CLIME precision matrix estimators
//! assembled column by column.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::admm::SolverConfig;
use crate::error::{Error, Result};
use crate::linalg::{col, norm2};
use crate::model::{
    pairwise_moments, standardize, DesignData, LinearOperator, Method, ProblemSpec, MAX_DENSE_DIM,
};
use crate::path::{
    default_stage_sizes, lambda_max, make_grid, screen_plan, solve_path_with,
    solve_spec_path, LambdaGrid, PathOptions, RawPath, ScreenPlan, SolutionPath, DEFAULT_NLAMBDA,
    DEFAULT_STAGES,
};
use crate::sparse::{SparseVector, SymmetricTriplets};

/// How the λ grid is chosen. `values` overrides everything else; otherwise a
/// log-uniform grid of `nlambda` points is built down from the estimator's `λ_max`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridOptions {
    /// `None` selects the estimator default: [`DEFAULT_NLAMBDA`] points, or for TIGER
    /// the single value `√(log d / n)`.
    pub nlambda: Option<usize>,
    pub min_ratio: Option<f64>,
    pub min_value: Option<f64>,
    pub values: Option<Vec<f64>>,
}

impl GridOptions {
    pub fn with_nlambda(nlambda: usize) -> Self {
        Self {
            nlambda: Some(nlambda),
            ..Self::default()
        }
    }

    pub fn with_values(values: Vec<f64>) -> Self {
        Self {
            values: Some(values),
            ..Self::default()
        }
    }

    fn build(&self, top: f64) -> Result<LambdaGrid> {
        match &self.values {
            Some(v) => LambdaGrid::from_values(v.clone()),
            None => make_grid(
                top,
                self.nlambda.unwrap_or(DEFAULT_NLAMBDA),
                self.min_ratio,
                self.min_value,
            ),
        }
    }

    fn is_default(&self) -> bool {
        self.values.is_none()
            && self.nlambda.is_none()
            && self.min_ratio.is_none()
            && self.min_value.is_none()
    }
}

/// Screening configuration shared by regression and precision estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenOptions {
    pub enabled: bool,
    pub stages: usize,
    /// Explicit nested stage sizes; the last must equal the dimension.
    pub sizes: Option<Vec<usize>>,
}

impl Default for ScreenOptions {
    fn default() -> Self {
        Self {
            enabled: true,
            stages: DEFAULT_STAGES,
            sizes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionOptions {
    pub grid: GridOptions,
    pub solver: SolverConfig,
    pub screen: ScreenOptions,
    pub path: PathOptions,
    pub center: bool,
    pub scale: bool,
}

impl Default for RegressionOptions {
    fn default() -> Self {
        Self {
            grid: GridOptions::default(),
            solver: SolverConfig::default(),
            screen: ScreenOptions::default(),
            path: PathOptions::default(),
            center: true,
            scale: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataSummary {
    pub n: usize,
    pub d: usize,
    pub centered: bool,
    pub scaled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub method: Method,
    pub path: SolutionPath,
    pub summary: DataSummary,
}

impl RegressionFit {
    pub fn all_converged(&self) -> bool {
        self.path.all_converged()
    }
}

/// Fits `method` over a λ path. The intercept is recovered on the original scale when
/// the data are centered.
pub fn fit_regression(
    data: &DesignData,
    method: Method,
    options: &RegressionOptions,
) -> Result<RegressionFit> {
    method.validate()?;
    if data.y().is_none() {
        return Err(Error::MissingResponse);
    }
    let working = standardize(data, options.center, options.scale)?;
    let grid = match &options.grid.values {
        Some(v) => LambdaGrid::from_values(v.clone())?,
        None => options.grid.build(lambda_max(&working, method)?)?,
    };
    let plan = if options.screen.enabled {
        screen_plan(&working, options.screen.stages, options.screen.sizes.as_deref())?
    } else {
        ScreenPlan::full(working.d())
    };
    let path = solve_path_with(&working, method, &grid, &options.solver, &plan, &options.path)?;
    Ok(RegressionFit {
        method,
        path,
        summary: DataSummary {
            n: data.n(),
            d: data.d(),
            centered: options.center,
            scaled: options.scale,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecisionMethod {
    Tiger,
    Clime,
}

impl PrecisionMethod {
    pub fn name(&self) -> &'static str {
        match self {
            PrecisionMethod::Tiger => "tiger",
            PrecisionMethod::Clime => "clime",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionOptions {
    pub grid: GridOptions,
    pub solver: SolverConfig,
    pub screen: ScreenOptions,
    pub path: PathOptions,
    /// CLIME only: use the sample correlation instead of the covariance.
    pub correlation: bool,
}

impl Default for PrecisionOptions {
    fn default() -> Self {
        Self {
            grid: GridOptions::default(),
            solver: SolverConfig::default(),
            screen: ScreenOptions::default(),
            path: PathOptions::default(),
            correlation: false,
        }
    }
}

/// Per-column solver records, one entry per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnDiagnostics {
    pub column: usize,
    pub iterations: Vec<usize>,
    pub kkt_residuals: Vec<f64>,
    pub converged: Vec<bool>,
    /// Per grid point: why the column was left out of that matrix, if it was.
    pub errors: Vec<Option<Error>>,
}

impl ColumnDiagnostics {
    fn failed(column: usize, len: usize, err: Error) -> Self {
        Self {
            column,
            iterations: vec![0; len],
            kkt_residuals: vec![f64::NAN; len],
            converged: vec![false; len],
            errors: vec![Some(err); len],
        }
    }

    fn from_raw(column: usize, raw: &RawPath, kkt_tol: f64) -> Self {
        Self {
            column,
            iterations: raw.iterations.clone(),
            kkt_residuals: raw.kkt_residuals.clone(),
            converged: (0..raw.betas.len())
                .map(|k| raw.status[k].converged() && raw.kkt_residuals[k] <= kkt_tol)
                .collect(),
            errors: raw.status.iter().map(|s| s.error.clone()).collect(),
        }
    }

    pub fn ok(&self) -> bool {
        self.converged.iter().all(|&c| c) && self.errors.iter().all(|e| e.is_none())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsePrecision {
    pub method: PrecisionMethod,
    pub grid: LambdaGrid,
    /// One symmetric estimate per grid point.
    pub matrices: Vec<SymmetricTriplets>,
    pub column_diagnostics: Vec<ColumnDiagnostics>,
}

impl SparsePrecision {
    pub fn dim(&self) -> usize {
        self.column_diagnostics.len()
    }

    pub fn total_iterations(&self) -> usize {
        self.column_diagnostics
            .iter()
            .map(|c| c.iterations.iter().sum::<usize>())
            .sum()
    }

    pub fn all_converged(&self) -> bool {
        self.column_diagnostics.iter().all(|c| c.ok())
    }

    /// Columns with a failed or unverified grid point.
    pub fn failed_columns(&self) -> Vec<usize> {
        self.column_diagnostics
            .iter()
            .filter(|c| !c.ok())
            .map(|c| c.column)
            .collect()
    }
}

pub fn fit_precision(
    data: &DesignData,
    method: PrecisionMethod,
    options: &PrecisionOptions,
) -> Result<SparsePrecision> {
    match method {
        PrecisionMethod::Tiger => fit_tiger(data, options),
        PrecisionMethod::Clime => fit_clime(data, options),
    }
}

fn check_samples(data: &DesignData) -> Result<()> {
    if data.n() < 2 {
        return Err(Error::Dimension(format!("need n >= 2, got {}", data.n())));
    }
    Ok(())
}

fn max_off_diagonal(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    let mut top = 0.0f64;
    for j in 0..d {
        for i in 0..d {
            if i != j {
                top = top.max(m[(i, j)].abs());
            }
        }
    }
    top
}

fn column_plan(scores: Vec<f64>, n: usize, screen: &ScreenOptions) -> Result<ScreenPlan> {
    let d = scores.len();
    if !screen.enabled {
        return Ok(ScreenPlan::full(d));
    }
    let sizes = match &screen.sizes {
        Some(s) => s.clone(),
        None => default_stage_sizes(n, d, screen.stages),
    };
    ScreenPlan::from_scores(scores, &sizes)
}

/// Per-column estimates before symmetrization, on the output scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSolutions {
    pub grid: LambdaGrid,
    /// `columns[j][k]` estimates column `j` of Ω at grid point `k`; `None` when that
    /// point failed and the column is left out of the assembled matrix.
    pub columns: Vec<Vec<Option<SparseVector>>>,
    pub diagnostics: Vec<ColumnDiagnostics>,
}

impl ColumnSolutions {
    /// Symmetric matrices whose off-diagonal entries combine `ω_ij` (column `j`) and
    /// `ω_ji` (column `i`) with `combine`; a pair with one side missing keeps the other.
    fn assemble(&self, combine: fn(f64, f64) -> f64) -> Vec<SymmetricTriplets> {
        let d = self.columns.len();
        (0..self.grid.len())
            .map(|k| {
                let dense: Vec<Option<Vec<f64>>> = self
                    .columns
                    .iter()
                    .map(|c| c[k].as_ref().map(|v| v.to_dense()))
                    .collect();
                let mut entries = Vec::new();
                for j in 0..d {
                    if let Some(cj) = &dense[j] {
                        entries.push((j, j, cj[j]));
                    }
                    for i in 0..j {
                        let v = match (&dense[j], &dense[i]) {
                            (Some(cj), Some(ci)) => combine(cj[i], ci[j]),
                            (Some(cj), None) => cj[i],
                            (None, Some(ci)) => ci[j],
                            (None, None) => 0.0,
                        };
                        entries.push((i, j, v));
                    }
                }
                SymmetricTriplets::from_upper(d, entries)
            })
            .collect()
    }

    pub fn into_precision(self, method: PrecisionMethod, combine: fn(f64, f64) -> f64) -> SparsePrecision {
        let matrices = self.assemble(combine);
        SparsePrecision {
            method,
            grid: self.grid,
            matrices,
            column_diagnostics: self.diagnostics,
        }
    }
}

/// TIGER: SQRT Lasso of each standardized column on the others, then
/// `Ω_jj = τ_j⁻²`, `Ω_{−j,j} = −τ_j⁻² β_j` with `τ_j = ‖Z_j − Z_{−j}β_j‖₂ / √n`, mapped
/// back to the covariance scale and symmetrized by averaging.
pub fn fit_tiger(data: &DesignData, options: &PrecisionOptions) -> Result<SparsePrecision> {
    Ok(tiger_columns(data, options)?.into_precision(PrecisionMethod::Tiger, |a, b| 0.5 * (a + b)))
}

/// The unsymmetrized TIGER columns of [`fit_tiger`].
pub fn tiger_columns(data: &DesignData, options: &PrecisionOptions) -> Result<ColumnSolutions> {
    if data.has_missing() {
        return Err(Error::MissingNotSupported("tiger"));
    }
    check_samples(data)?;
    let data = data.without_response();
    let n = data.n();
    let d = data.d();
    let sds = data.column_sds().to_vec();
    let z = standardize(&data, true, true)?;
    let zx = z.x();
    let corr = zx.tr_mul(zx) / n as f64;

    let grid = if options.grid.is_default() {
        let default = ((d as f64).ln() / n as f64).sqrt();
        LambdaGrid::from_values(vec![if default > 0.0 { default } else { 1.0 }])?
    } else {
        let top = match max_off_diagonal(&corr) {
            t if t > 0.0 => t,
            _ => 1.0,
        };
        options.grid.build(top)?
    };
    let len = grid.len();

    if d == 1 {
        let inv = SparseVector::from_dense(&[1.0 / (sds[0] * sds[0])]);
        return Ok(ColumnSolutions {
            grid,
            columns: vec![vec![Some(inv); len]],
            diagnostics: vec![ColumnDiagnostics {
                column: 0,
                iterations: vec![0; len],
                kkt_residuals: vec![0.0; len],
                converged: vec![true; len],
                errors: vec![None; len],
            }],
        });
    }

    let solved: Vec<(Vec<Option<SparseVector>>, ColumnDiagnostics)> = (0..d)
        .into_par_iter()
        .map(|j| tiger_column(zx, &corr, &sds, j, &grid, options))
        .collect();
    let (columns, diagnostics) = solved.into_iter().unzip();
    Ok(ColumnSolutions {
        grid,
        columns,
        diagnostics,
    })
}

fn tiger_column(
    zx: &DMatrix<f64>,
    corr: &DMatrix<f64>,
    sds: &[f64],
    j: usize,
    grid: &LambdaGrid,
    options: &PrecisionOptions,
) -> (Vec<Option<SparseVector>>, ColumnDiagnostics) {
    let (n, d) = zx.shape();
    let len = grid.len();
    let others: Vec<usize> = (0..d).filter(|&k| k != j).collect();
    let mut rest = DMatrix::<f64>::zeros(n, d - 1);
    for (c, &k) in others.iter().enumerate() {
        rest.column_mut(c).copy_from_slice(col(zx, k));
    }
    let target = col(zx, j).to_vec();
    let solved = ProblemSpec::from_parts(
        Method::SQRT,
        LinearOperator::Matrix(Arc::new(rest)),
        target.clone(),
        grid.lambda_max(),
    )
    .and_then(|spec| {
        let scores: Vec<f64> = others.iter().map(|&k| corr[(k, j)].abs()).collect();
        let plan = column_plan(scores, n, &options.screen)?;
        let raw = solve_spec_path(&spec, grid, &options.solver, &plan, &options.path)?;
        Ok((spec, raw))
    });
    let (spec, raw) = match solved {
        Ok(v) => v,
        Err(e) => return (vec![None; len], ColumnDiagnostics::failed(j, len, e)),
    };
    let mut diag = ColumnDiagnostics::from_raw(j, &raw, options.path.kkt_tol);
    let mut out = Vec::with_capacity(len);
    for (k, beta) in raw.betas.iter().enumerate() {
        let mut fitted = vec![0.0; n];
        spec.op().apply(beta, &mut fitted);
        let e: Vec<f64> = target.iter().zip(&fitted).map(|(t, f)| t - f).collect();
        let tau = norm2(&e) / (n as f64).sqrt();
        if !(tau > 1e-12) {
            diag.errors[k] = Some(Error::DegenerateResidual(j));
            diag.converged[k] = false;
            out.push(None);
            continue;
        }
        let inv = 1.0 / (tau * tau);
        // Ω_ij = Ω^Z_ij / (sd_i sd_j)
        let mut pairs = vec![(j, inv / (sds[j] * sds[j]))];
        for (c, &i) in others.iter().enumerate() {
            if beta[c] != 0.0 {
                pairs.push((i, -inv * beta[c] / (sds[i] * sds[j])));
            }
        }
        out.push(SparseVector::from_pairs(d, pairs));
    }
    (out, diag)
}

/// CLIME: the Dantzig problem `min ‖β‖₁ s.t. ‖Σ̂β − e_j‖_∞ ≤ λ` per column, symmetrized by
/// keeping the smaller-magnitude of each mirrored pair. The grid starts at the largest
/// off-diagonal `|Σ̂_jk|`.
pub fn fit_clime(data: &DesignData, options: &PrecisionOptions) -> Result<SparsePrecision> {
    Ok(clime_columns(data, options)?.into_precision(PrecisionMethod::Clime, min_magnitude))
}

/// The unsymmetrized CLIME columns of [`fit_clime`].
pub fn clime_columns(data: &DesignData, options: &PrecisionOptions) -> Result<ColumnSolutions> {
    check_samples(data)?;
    let d = data.d();
    if d > MAX_DENSE_DIM {
        return Err(Error::ProblemTooLarge(format!(
            "CLIME materializes a {d} x {d} covariance; the limit is {MAX_DENSE_DIM}"
        )));
    }
    let data = data.without_response();
    let moments = pairwise_moments(&data)?;
    let sigma = Arc::new(if options.correlation {
        moments.corr
    } else {
        moments.cov
    });
    let top = match max_off_diagonal(&sigma) {
        t if t > 0.0 => t,
        _ => 1.0,
    };
    let grid = options.grid.build(top)?;
    let n = data.n();
    let solved: Vec<(Vec<Option<SparseVector>>, ColumnDiagnostics)> = (0..d)
        .into_par_iter()
        .map(|j| clime_column(&sigma, j, n, &grid, options))
        .collect();
    let (columns, diagnostics) = solved.into_iter().unzip();
    Ok(ColumnSolutions {
        grid,
        columns,
        diagnostics,
    })
}

/// `a` when `|a| ≤ |b|`, else `b`.
pub fn min_magnitude(a: f64, b: f64) -> f64 {
    if a.abs() <= b.abs() {
        a
    } else {
        b
    }
}

fn clime_column(
    sigma: &Arc<DMatrix<f64>>,
    j: usize,
    n: usize,
    grid: &LambdaGrid,
    options: &PrecisionOptions,
) -> (Vec<Option<SparseVector>>, ColumnDiagnostics) {
    let d = sigma.nrows();
    let mut unit = vec![0.0; d];
    unit[j] = 1.0;
    let solved = ProblemSpec::from_parts(
        Method::Dantzig,
        LinearOperator::Matrix(Arc::clone(sigma)),
        unit,
        grid.lambda_max(),
    )
    .and_then(|spec| {
        let scores: Vec<f64> = (0..d).map(|i| sigma[(i, j)].abs()).collect();
        let plan = column_plan(scores, n, &options.screen)?;
        solve_spec_path(&spec, grid, &options.solver, &plan, &options.path)
    });
    match solved {
        Ok(raw) => {
            let diag = ColumnDiagnostics::from_raw(j, &raw, options.path.kkt_tol);
            let cols = raw
                .betas
                .iter()
                .map(|b| Some(SparseVector::from_dense(b)))
                .collect();
            (cols, diag)
        }
        Err(e) => (vec![None; grid.len()], ColumnDiagnostics::failed(j, grid.len(), e)),
    }
}
