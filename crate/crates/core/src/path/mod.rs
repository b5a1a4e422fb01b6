//! Regularization paths: λ grids, marginal-correlation screening, warm-started sweeps
//! and per-λ verification.

pub mod kkt;
pub mod refine;

use std::collections::HashMap;
use std::time::Instant;

use crate::admm::{solve_monitored, solve_restricted, AdmmState, InnerSolver, SolverConfig, Termination};
use crate::error::{Error, Result};
use crate::linalg::norm_inf;
use crate::model::{build_problem, DesignData, Method, ProblemSpec, Transform};
use crate::sparse::SparseVector;

pub use kkt::{certificate, Certificate, KKT_TOL};

/// Default number of grid points.
pub const DEFAULT_NLAMBDA: usize = 40;
/// Default `λ_min / λ_max`.
pub const DEFAULT_MIN_RATIO: f64 = 0.25;
/// Default number of screening stages.
pub const DEFAULT_STAGES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    LogUniform,
    Custom,
}

/// Strictly decreasing positive λ values.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid {
    values: Vec<f64>,
    spacing: Spacing,
}

impl LambdaGrid {
    /// A user-supplied grid; must be strictly decreasing and positive.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidGrid("grid values must be positive and finite".into()));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidGrid("grid must be strictly decreasing".into()));
        }
        Ok(Self {
            values,
            spacing: Spacing::Custom,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lambda_max(&self) -> f64 {
        self.values[0]
    }

    pub fn lambda_min(&self) -> f64 {
        *self.values.last().expect("grid is nonempty")
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }
}

/// `nlambda` log-uniform values from `lambda_max` down to `min_value` or
/// `min_ratio · lambda_max` (default ratio [`DEFAULT_MIN_RATIO`]). Endpoints are exact.
pub fn make_grid(
    lambda_max: f64,
    nlambda: usize,
    min_ratio: Option<f64>,
    min_value: Option<f64>,
) -> Result<LambdaGrid> {
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(Error::InvalidGrid(format!("lambda_max must be positive, got {lambda_max}")));
    }
    if nlambda < 1 {
        return Err(Error::InvalidGrid("nlambda must be at least 1".into()));
    }
    let lambda_min = match (min_ratio, min_value) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidGrid(
                "give at most one of min_ratio and min_value".into(),
            ))
        }
        (Some(r), None) => {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::InvalidGrid(format!("min_ratio must lie in (0, 1), got {r}")));
            }
            r * lambda_max
        }
        (None, Some(v)) => {
            if !(v > 0.0 && v < lambda_max) {
                return Err(Error::InvalidGrid(format!(
                    "min_value {v} must lie in (0, lambda_max = {lambda_max})"
                )));
            }
            v
        }
        (None, None) => DEFAULT_MIN_RATIO * lambda_max,
    };
    let values = if nlambda == 1 {
        vec![lambda_max]
    } else {
        let log_ratio = (lambda_min / lambda_max).ln();
        let last = (nlambda - 1) as f64;
        let mut v: Vec<f64> = (0..nlambda)
            .map(|k| lambda_max * (log_ratio * k as f64 / last).exp())
            .collect();
        v[0] = lambda_max;
        v[nlambda - 1] = lambda_min;
        v
    };
    Ok(LambdaGrid {
        values,
        spacing: Spacing::LogUniform,
    })
}

/// Smallest λ at which `β = 0` is optimal for `spec`'s operator and right-hand side.
pub fn spec_lambda_max(spec: &ProblemSpec) -> Result<f64> {
    let r = spec.r();
    if norm_inf(r) == 0.0 {
        return Err(Error::ZeroResponse);
    }
    Ok(match spec.method() {
        Method::Lq { q } => {
            let w = kkt::norm_gradient(r, q);
            norm_inf(&spec.op().apply_transpose(&w)) / (spec.samples() as f64).powf(1.0 / q)
        }
        Method::Dantzig => norm_inf(r),
    })
}

/// `λ_max` for `method` on `data` as given (no standardization is applied here).
pub fn lambda_max(data: &DesignData, method: Method) -> Result<f64> {
    let spec = build_problem(data, method, 1.0)?;
    spec_lambda_max(&spec)
}

/// Nested coordinate subsets ranked by a per-coordinate score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenPlan {
    /// Ascending index lists, each a superset of the previous; the last is `0..d`.
    stages: Vec<Vec<usize>>,
    scores: Vec<f64>,
    /// `rank[j]` is the position of `j` in descending score order.
    rank: Vec<usize>,
}

impl ScreenPlan {
    /// A single stage holding every coordinate.
    pub fn full(d: usize) -> Self {
        Self::from_scores(vec![0.0; d], &[d]).expect("one full stage is valid")
    }

    /// Stages are the top-`s_i` coordinates by score, ties to the lower index. `sizes`
    /// must be strictly increasing; it is capped at `d` and completed with `d`.
    pub fn from_scores(scores: Vec<f64>, sizes: &[usize]) -> Result<Self> {
        let d = scores.len();
        if sizes.windows(2).any(|w| w[1] <= w[0]) || sizes.first() == Some(&0) {
            return Err(Error::InvalidConfig(
                "stage sizes must be positive and strictly increasing".into(),
            ));
        }
        let mut sizes: Vec<usize> = sizes.iter().map(|&s| s.min(d)).collect();
        sizes.dedup();
        if sizes.last() != Some(&d) {
            sizes.push(d);
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let mut rank = vec![0; d];
        for (pos, &j) in order.iter().enumerate() {
            rank[j] = pos;
        }
        let stages = sizes
            .iter()
            .map(|&s| {
                let mut idx = order[..s].to_vec();
                idx.sort_unstable();
                idx
            })
            .collect();
        Ok(Self {
            stages,
            scores,
            rank,
        })
    }

    pub fn stages(&self) -> &[Vec<usize>] {
        &self.stages
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn dim(&self) -> usize {
        self.scores.len()
    }

    /// Smallest stage index whose set contains every index in `idx`.
    pub fn stage_containing(&self, idx: &[usize]) -> usize {
        let worst = idx.iter().map(|&j| self.rank[j]).max();
        match worst {
            None => 0,
            Some(r) => self
                .stages
                .iter()
                .position(|s| s.len() > r)
                .expect("last stage is complete"),
        }
    }
}

/// Stage sizes `⌈n/2⌉, 4n, 32n, …` for `k` stages, the last being `d`.
pub fn default_stage_sizes(n: usize, d: usize, k: usize) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(k);
    for i in 1..k {
        let s = if i == 1 {
            n.div_ceil(2)
        } else {
            4 * n * 8usize.pow((i - 2) as u32)
        };
        sizes.push(s.min(d));
    }
    sizes.push(d);
    sizes.dedup();
    sizes
}

/// `|corr(X_j, y)|` over rows where both are observed; zero for constant columns.
pub fn marginal_correlations(data: &DesignData) -> Result<Vec<f64>> {
    let y = data.y().ok_or(Error::MissingResponse)?;
    let x = data.x();
    let mask = data.missing_mask();
    let y_mask = data.response_mask();
    let n = data.n();
    let scores = (0..data.d())
        .map(|j| {
            let rows: Vec<usize> = (0..n)
                .filter(|&i| {
                    !mask.is_some_and(|m| m[(i, j)]) && !y_mask.is_some_and(|m| m[i])
                })
                .collect();
            if rows.len() < 2 {
                return 0.0;
            }
            let k = rows.len() as f64;
            let mx = rows.iter().map(|&i| x[(i, j)]).sum::<f64>() / k;
            let my = rows.iter().map(|&i| y[i]).sum::<f64>() / k;
            let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
            for &i in &rows {
                let a = x[(i, j)] - mx;
                let b = y[i] - my;
                sxy += a * b;
                sxx += a * a;
                syy += b * b;
            }
            if sxx > 0.0 && syy > 0.0 {
                (sxy / (sxx * syy).sqrt()).abs()
            } else {
                0.0
            }
        })
        .collect();
    Ok(scores)
}

/// Marginal-correlation plan with `k` stages; `sizes` overrides [`default_stage_sizes`].
pub fn screen_plan(data: &DesignData, k: usize, sizes: Option<&[usize]>) -> Result<ScreenPlan> {
    if k < 1 {
        return Err(Error::InvalidConfig("screening needs at least one stage".into()));
    }
    let d = data.d();
    if k == 1 {
        return Ok(ScreenPlan::full(d));
    }
    let scores = marginal_correlations(data)?;
    let sizes = match sizes {
        Some(s) => s.to_vec(),
        None => default_stage_sizes(data.n(), d, k),
    };
    ScreenPlan::from_scores(scores, &sizes)
}

/// Path-level verification and refinement settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions {
    pub kkt_tol: f64,
    /// Polish ADMM output with the exact local solves of [`refine`].
    pub refine: bool,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            kkt_tol: KKT_TOL,
            refine: true,
        }
    }
}

/// Diagnostics of one path point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointStatus {
    pub termination: Termination,
    /// The refined candidate replaced the ADMM iterate.
    pub refined: bool,
    /// Index of the screening stage the accepted solution was computed on.
    pub stage: usize,
    /// Solved exactly at `β = 0` because `λ ≥ λ_max`.
    pub at_lambda_max: bool,
    /// Set when the certificate could not be evaluated.
    pub error: Option<Error>,
}

impl PointStatus {
    /// ADMM met its tolerance, or the point was certified exactly.
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged || self.refined || self.at_lambda_max
    }
}

/// Solutions along a decreasing λ grid on the working (centered/scaled) problem,
/// together with original-scale coefficients and intercepts.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath {
    pub grid: LambdaGrid,
    /// Working-scale coefficients, as solved.
    pub working: Vec<SparseVector>,
    /// Original-scale coefficients.
    pub coefficients: Vec<SparseVector>,
    pub intercepts: Vec<f64>,
    pub kkt_residuals: Vec<f64>,
    pub iterations: Vec<usize>,
    pub wall_times: Vec<f64>,
    pub status: Vec<PointStatus>,
}

impl SolutionPath {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn all_converged(&self) -> bool {
        self.status.iter().all(|s| s.converged())
    }

    /// Points that failed to converge or to pass the check at `tol`.
    pub fn failures(&self, tol: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| !self.status[k].converged() || !(self.kkt_residuals[k] <= tol))
            .collect()
    }
}

/// Solves `method` on `data` over `grid` with default [`PathOptions`].
pub fn solve_path(
    data: &DesignData,
    method: Method,
    grid: &LambdaGrid,
    config: &SolverConfig,
    plan: &ScreenPlan,
) -> Result<SolutionPath> {
    solve_path_with(data, method, grid, config, plan, &PathOptions::default())
}

pub fn solve_path_with(
    data: &DesignData,
    method: Method,
    grid: &LambdaGrid,
    config: &SolverConfig,
    plan: &ScreenPlan,
    options: &PathOptions,
) -> Result<SolutionPath> {
    let spec = build_problem(data, method, grid.lambda_max())?;
    let raw = solve_spec_path(&spec, grid, config, plan, options)?;
    Ok(raw.into_solution_path(grid.clone(), data.transform()))
}

/// Per-point results on the working scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPath {
    pub betas: Vec<Vec<f64>>,
    pub kkt_residuals: Vec<f64>,
    pub iterations: Vec<usize>,
    pub wall_times: Vec<f64>,
    pub status: Vec<PointStatus>,
}

impl RawPath {
    fn into_solution_path(self, grid: LambdaGrid, transform: &Transform) -> SolutionPath {
        let mut coefficients = Vec::with_capacity(self.betas.len());
        let mut intercepts = Vec::with_capacity(self.betas.len());
        let mut working = Vec::with_capacity(self.betas.len());
        for b in &self.betas {
            let (coef, icpt) = transform.back_transform(b);
            coefficients.push(SparseVector::from_dense(&coef));
            intercepts.push(icpt);
            working.push(SparseVector::from_dense(b));
        }
        SolutionPath {
            grid,
            working,
            coefficients,
            intercepts,
            kkt_residuals: self.kkt_residuals,
            iterations: self.iterations,
            wall_times: self.wall_times,
            status: self.status,
        }
    }
}

/// Multiplier `u` matching an exact solution: `ρu = loss_scale · w` for ℓq, `ρu = μ`
/// for Dantzig.
fn dual_from_certificate(spec: &ProblemSpec, cert: &Certificate, rho: f64) -> Vec<f64> {
    let scale = match spec.method() {
        Method::Lq { .. } => spec.loss_scale(),
        Method::Dantzig => 1.0,
    };
    cert.multiplier.iter().map(|m| scale * m / rho).collect()
}

/// Certificate values at or below this count as exact; refined candidates reaching it
/// are preferred over ADMM iterates.
const EXACT_TOL: f64 = 1e-10;

/// Relative slack on off-stage scores before a coordinate counts as a violator.
const VIOLATION_SLACK: f64 = 1e-7;

/// Path over `grid` for the operator and right-hand side of `template`.
pub fn solve_spec_path(
    template: &ProblemSpec,
    grid: &LambdaGrid,
    config: &SolverConfig,
    plan: &ScreenPlan,
    options: &PathOptions,
) -> Result<RawPath> {
    config.validate()?;
    let d = template.dim();
    if plan.dim() != d {
        return Err(Error::Dimension(format!(
            "screening plan covers {} coordinates, problem has {d}",
            plan.dim()
        )));
    }
    let lam_max = spec_lambda_max(template)?;
    let last_stage = plan.stages().len() - 1;
    let mut bounds: HashMap<usize, f64> = HashMap::new();
    let mut out = RawPath {
        betas: Vec::with_capacity(grid.len()),
        kkt_residuals: Vec::with_capacity(grid.len()),
        iterations: Vec::with_capacity(grid.len()),
        wall_times: Vec::with_capacity(grid.len()),
        status: Vec::with_capacity(grid.len()),
    };
    let mut warm: Option<AdmmState> = None;
    let mut prev_lambda = f64::NAN;

    for &lambda in grid.values() {
        let start = Instant::now();
        let spec = template.with_lambda(lambda)?;

        if lambda >= lam_max {
            let beta = vec![0.0; d];
            let alpha = spec.r().to_vec();
            let u = match spec.method() {
                Method::Lq { q } => kkt::norm_gradient(spec.r(), q)
                    .iter()
                    .map(|w| spec.loss_scale() * w / config.rho)
                    .collect(),
                Method::Dantzig => vec![0.0; spec.alpha_len()],
            };
            let (value, error) = match certificate(&spec, &beta) {
                Ok(c) => (c.value, None),
                Err(e) => (f64::NAN, Some(e)),
            };
            let mut state = AdmmState::zeros(&spec, config.rho);
            state.alpha = alpha;
            state.u = u;
            state.termination = Termination::Converged;
            warm = Some(state);
            prev_lambda = lambda;
            out.betas.push(beta);
            out.kkt_residuals.push(value);
            out.iterations.push(0);
            out.wall_times.push(start.elapsed().as_secs_f64());
            out.status.push(PointStatus {
                termination: Termination::Converged,
                refined: false,
                stage: 0,
                at_lambda_max: true,
                error,
            });
            continue;
        }

        if let (Some(w), Method::Lq { .. }) = (warm.as_mut(), spec.method()) {
            // ρu = loss_scale · w and loss_scale ∝ 1/λ
            let factor = prev_lambda / lambda;
            w.u.iter_mut().for_each(|u| *u *= factor);
        }

        let warm_support: Vec<usize> = warm
            .as_ref()
            .map(|w| kkt::support(&w.beta))
            .unwrap_or_default();
        let mut stage = plan.stage_containing(&warm_support);
        let mut iterations = 0;
        let mut tightened = false;
        let mut local_config = config.clone();
        let (state, beta, cert, refined, error) = loop {
            let cols = &plan.stages()[stage];
            let bound = match config.inner {
                InnerSolver::Linearized => Some(
                    *bounds
                        .entry(stage)
                        .or_insert_with(|| spec.op().spectral_bound(cols)),
                ),
                InnerSolver::CoordinateDescent => None,
            };
            let mut certified: Option<(Vec<f64>, Certificate)> = None;
            let state = if options.refine {
                let primal_tol = local_config.tol;
                let mut monitor = |s: &AdmmState| -> bool {
                    if s.primal_residual > primal_tol {
                        return false;
                    }
                    match refined_candidate(&spec, &s.beta) {
                        Some((cand, c)) if c.value <= EXACT_TOL => {
                            certified = Some((cand, c));
                            true
                        }
                        _ => false,
                    }
                };
                solve_monitored(&spec, &local_config, warm.as_ref(), cols, bound, &mut monitor)?
            } else {
                solve_restricted(&spec, &local_config, warm.as_ref(), cols, bound)?
            };
            iterations += state.iter;
            let (beta, cert, refined) = match certified {
                Some((cand, c)) => (cand, Ok(c), true),
                None => {
                    let cert = certificate(&spec, &state.beta);
                    let candidate = if options.refine {
                        refined_candidate(&spec, &state.beta)
                    } else {
                        None
                    };
                    match (candidate, cert) {
                        (Some((cand, c2)), Ok(c)) if c2.value < c.value.max(EXACT_TOL) => {
                            (cand, Ok(c2), true)
                        }
                        (Some((cand, c2)), Err(_)) => (cand, Ok(c2), true),
                        (_, cert) => (state.beta.clone(), cert, false),
                    }
                }
            };
            let cert = match cert {
                Ok(c) => c,
                Err(e) => break (state, beta, None, refined, Some(e)),
            };
            // an exact certificate is global; no stage can improve on it
            if stage < last_stage && cert.value > EXACT_TOL {
                let in_stage = &plan.stages()[stage];
                let violators: Vec<usize> = cert
                    .violators(VIOLATION_SLACK)
                    .into_iter()
                    .filter(|j| in_stage.binary_search(j).is_err())
                    .collect();
                let infeasible = spec.method().is_dantzig()
                    && norm_inf(&kkt::residual(&spec, &beta)) > lambda * (1.0 + 1e-9);
                let outside: Vec<usize> = kkt::support(&beta)
                    .into_iter()
                    .filter(|j| in_stage.binary_search(j).is_err())
                    .collect();
                if !violators.is_empty() || !outside.is_empty() || infeasible || cert.value > options.kkt_tol {
                    let mut need: Vec<usize> = violators;
                    need.extend(outside);
                    let next = plan.stage_containing(&need).max(stage + 1).min(last_stage);
                    stage = if infeasible || cert.value > options.kkt_tol && need.is_empty() {
                        (stage + 1).max(next)
                    } else {
                        next
                    };
                    warm = Some(with_beta(&state, &beta));
                    continue;
                }
            }
            // nothing left to expand; retry once at a tighter tolerance if inexact
            if !refined && cert.value > options.kkt_tol && !tightened {
                tightened = true;
                local_config.tol = config.tol * 1e-2;
                warm = Some(state.clone());
                continue;
            }
            break (state, beta, Some(cert), refined, None);
        };

        let value = cert.as_ref().map_or(f64::NAN, |c| c.value);
        let mut next_warm = with_beta(&state, &beta);
        if refined {
            if let Some(c) = &cert {
                next_warm.alpha = kkt::residual(&spec, &beta);
                next_warm.u = dual_from_certificate(&spec, c, config.rho);
            }
        }
        warm = Some(next_warm);
        prev_lambda = lambda;
        out.betas.push(beta);
        out.kkt_residuals.push(value);
        out.iterations.push(iterations);
        out.wall_times.push(start.elapsed().as_secs_f64());
        out.status.push(PointStatus {
            termination: state.termination,
            refined,
            stage,
            at_lambda_max: false,
            error,
        });
    }
    Ok(out)
}

/// Refined candidate with its certificate, if refinement and the check both succeed.
fn refined_candidate(spec: &ProblemSpec, beta: &[f64]) -> Option<(Vec<f64>, Certificate)> {
    let cand = refine::refine(spec, beta)?;
    let cert = certificate(spec, &cand).ok()?;
    Some((cand, cert))
}

fn with_beta(state: &AdmmState, beta: &[f64]) -> AdmmState {
    let mut s = state.clone();
    s.beta = beta.to_vec();
    s
}

/// Check value of `beta` at `lambda` for `method` on `data`.
///
/// Errors with [`Error::ExactInterpolation`] when an ℓq residual vanishes.
pub fn kkt_check(data: &DesignData, method: Method, lambda: f64, beta: &SparseVector) -> Result<f64> {
    let spec = build_problem(data, method, lambda)?;
    Ok(certificate(&spec, &beta.to_dense())?.value)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{gen_regression, Ar1Design};
    use nalgebra::DMatrix;

    #[test]
    fn grid_tail_honors_min_value_exactly() {
        let min = (200f64.ln() / 120.0).sqrt();
        let g = make_grid(1.3, 40, None, Some(min)).unwrap();
        assert_eq!(g.len(), 40);
        assert_eq!(g.lambda_max(), 1.3);
        assert_eq!(g.lambda_min(), min);
        assert!((min - 0.210125).abs() < 1e-6);
        let literal = make_grid(1.3, 40, None, Some(0.21019)).unwrap();
        assert_eq!(literal.lambda_min(), 0.21019);
    }

    #[test]
    fn grid_small_examples() {
        assert_eq!(make_grid(1.0, 2, Some(0.1), None).unwrap().values(), &[1.0, 0.1]);
        let g = make_grid(1.0, 3, Some(0.01), None).unwrap();
        assert_eq!(g.values()[0], 1.0);
        assert!((g.values()[1] - 0.1).abs() < 1e-15);
        assert_eq!(g.values()[2], 0.01);
    }

    #[test]
    fn grid_rejects_bad_overrides() {
        assert!(matches!(make_grid(1.0, 5, Some(0.1), Some(0.2)), Err(Error::InvalidGrid(_))));
        assert!(matches!(make_grid(1.0, 5, None, Some(1.0)), Err(Error::InvalidGrid(_))));
        assert!(matches!(make_grid(1.0, 0, None, None), Err(Error::InvalidGrid(_))));
        assert!(matches!(LambdaGrid::from_values(vec![1.0, 1.0]), Err(Error::InvalidGrid(_))));
        assert!(matches!(LambdaGrid::from_values(vec![]), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn lambda_max_hand_examples() {
        let x = DMatrix::<f64>::identity(2, 2);
        let data = DesignData::new(x, Some(vec![2.0, -4.0])).unwrap();
        assert!((lambda_max(&data, Method::Dantzig).unwrap() - 2.0).abs() < 1e-15);

        let ones = DesignData::new(DMatrix::from_element(4, 1, 1.0), Some(vec![1.0; 4])).unwrap();
        assert!((lambda_max(&ones, Method::LAD).unwrap() - 1.0).abs() < 1e-15);

        let zero = DesignData::new(DMatrix::from_element(4, 1, 1.0), Some(vec![0.0; 4])).unwrap();
        assert_eq!(lambda_max(&zero, Method::SQRT), Err(Error::ZeroResponse));
    }

    #[test]
    fn single_stage_plan_and_perfect_correlation_ranks_first() {
        let data = gen_regression(&Ar1Design::new(30, 8, 0.3, 1)).unwrap();
        let plan = screen_plan(&data, 1, None).unwrap();
        assert_eq!(plan.stages(), &[(0..8).collect::<Vec<_>>()]);

        let x = data.x().clone();
        let y = crate::linalg::col(&x, 0).to_vec();
        let exact = DesignData::new(x, Some(y)).unwrap();
        let plan = screen_plan(&exact, 2, Some(&[1])).unwrap();
        assert_eq!(plan.stages()[0], vec![0]);
        assert_eq!(plan.stages()[1].len(), 8);
    }

    #[test]
    fn default_stage_sizes_cap_at_dimension() {
        assert_eq!(default_stage_sizes(100, 375, 3), vec![50, 375]);
        assert_eq!(default_stage_sizes(10, 1000, 4), vec![5, 40, 320, 1000]);
        assert_eq!(default_stage_sizes(100, 30, 3), vec![30]);
    }

    #[test]
    fn check_is_zero_at_lambda_max_and_positive_below() {
        let data = gen_regression(&Ar1Design::new(40, 10, 0.5, 2)).unwrap();
        for method in [Method::LAD, Method::SQRT, Method::lq(1.5).unwrap(), Method::Dantzig] {
            let top = lambda_max(&data, method).unwrap();
            let zero = SparseVector::zeros(10);
            assert!(kkt_check(&data, method, top, &zero).unwrap() <= 1e-12, "{}", method.name());
            assert!(kkt_check(&data, method, top / 2.0, &zero).unwrap() > 0.0, "{}", method.name());
        }
    }

    #[test]
    fn exact_interpolation_is_reported() {
        let x = DMatrix::<f64>::identity(3, 3);
        let data = DesignData::new(x, Some(vec![1.0, 2.0, 3.0])).unwrap();
        let beta = SparseVector::from_dense(&[1.0, 2.0, 3.0]);
        assert_eq!(kkt_check(&data, Method::SQRT, 0.1, &beta), Err(Error::ExactInterpolation));
    }

    #[test]
    fn path_at_lambda_max_only_is_zero() {
        let data = gen_regression(&Ar1Design::new(30, 12, 0.5, 3)).unwrap();
        for method in [Method::LAD, Method::SQRT, Method::Dantzig] {
            let top = lambda_max(&data, method).unwrap();
            let grid = LambdaGrid::from_values(vec![top]).unwrap();
            let path = solve_path(&data, method, &grid, &SolverConfig::default(), &ScreenPlan::full(12)).unwrap();
            assert!(path.coefficients[0].is_zero());
            assert!(path.status[0].at_lambda_max);
        }
    }

    #[test]
    fn path_points_verify() {
        let data = gen_regression(&Ar1Design::new(50, 80, 0.5, 4)).unwrap();
        for method in [Method::LAD, Method::SQRT, Method::Dantzig] {
            let top = lambda_max(&data, method).unwrap();
            let grid = make_grid(top, 8, None, None).unwrap();
            let plan = screen_plan(&data, DEFAULT_STAGES, None).unwrap();
            let path = solve_path(&data, method, &grid, &SolverConfig::default(), &plan).unwrap();
            assert!(path.failures(KKT_TOL).is_empty(), "{}", method.name());
            for (k, b) in path.working.iter().enumerate() {
                let value = kkt_check(&data, method, grid.values()[k], b).unwrap();
                assert!(value <= KKT_TOL, "{} point {k}: {value}", method.name());
            }
        }
    }

    #[test]
    fn unrefined_path_still_verifies() {
        let data = gen_regression(&Ar1Design::new(50, 30, 0.5, 5)).unwrap();
        let top = lambda_max(&data, Method::SQRT).unwrap();
        let grid = make_grid(top, 5, None, None).unwrap();
        let options = PathOptions {
            refine: false,
            ..PathOptions::default()
        };
        let path = solve_path_with(&data, Method::SQRT, &grid, &SolverConfig::default(), &ScreenPlan::full(30), &options)
            .unwrap();
        assert!(path.status.iter().all(|s| !s.refined));
        assert!(path.failures(KKT_TOL).is_empty());
    }
}
