//! The three-step ADMM iteration
//!
//! ```text
//! α⁺ = argmin ½‖u + r − Aβ − α‖² + L_λ(α)/ρ
//! β⁺ = argmin ½‖u − α⁺ + r − Aβ‖² + ‖β‖₁/ρ
//! u⁺ = u + (r − α⁺ − Aβ⁺)
//! ```
//!
//! The β-step is a Lasso problem, solved approximately by a single linearized
//! (proximal-gradient) step or by a few coordinate-descent sweeps.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2};
use crate::model::{LinearOperator, Method, ProblemSpec};
use crate::prox::{prox_into, soft_threshold_scalar, ProxKind};

/// Approximate solver for the β sub-problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSolver {
    Linearized,
    CoordinateDescent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Threshold on the normalized primal and dual residuals.
    pub tol: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub inner: InnerSolver,
    /// Coordinate-descent sweeps per outer iteration.
    pub inner_sweeps: usize,
    /// Keep the per-iteration residuals in [`AdmmState::trace`].
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 10_000,
            rho: 1.0,
            inner: InnerSolver::Linearized,
            inner_sweeps: 1,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidConfig(format!("rho must be positive, got {}", self.rho)));
        }
        if self.inner_sweeps < 1 {
            return Err(Error::InvalidConfig("inner_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    NotRun,
    Converged,
    MaxIterReached,
    /// A checkpoint monitor asked to stop.
    Stopped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRecord {
    pub primal: f64,
    pub dual: f64,
}

/// Iterates of one ADMM run.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Rescaled multiplier; `ρu` is the dual variable of `r − Aβ = α`.
    pub u: Vec<f64>,
    pub rho: f64,
    pub iter: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub termination: Termination,
    pub trace: Vec<ResidualRecord>,
}

impl AdmmState {
    /// Cold start: `β = 0`, `α = 0`, `u = 0`.
    pub fn zeros(spec: &ProblemSpec, rho: f64) -> Self {
        Self {
            beta: vec![0.0; spec.dim()],
            alpha: vec![0.0; spec.alpha_len()],
            u: vec![0.0; spec.alpha_len()],
            rho,
            iter: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            termination: Termination::NotRun,
            trace: Vec::new(),
        }
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    fn check_dims(&self, spec: &ProblemSpec) -> Result<()> {
        if self.beta.len() != spec.dim()
            || self.alpha.len() != spec.alpha_len()
            || self.u.len() != spec.alpha_len()
        {
            return Err(Error::Dimension("warm start does not match the problem".into()));
        }
        Ok(())
    }
}

fn prox_kind(spec: &ProblemSpec, rho: f64) -> ProxKind {
    match spec.method() {
        Method::Lq { q } => ProxKind::Lq {
            q,
            kappa: spec.loss_scale() / rho,
        },
        Method::Dantzig => ProxKind::Box {
            bound: spec.lambda(),
        },
    }
}

/// α-update: the proximal map of `L_λ/ρ` at `v = u + r − Aβ`.
pub fn alpha_update(state: &AdmmState, spec: &ProblemSpec) -> Result<Vec<f64>> {
    state.check_dims(spec)?;
    let mut ab = vec![0.0; spec.alpha_len()];
    spec.op().apply(&state.beta, &mut ab);
    let v: Vec<f64> = state
        .u
        .iter()
        .zip(spec.r())
        .zip(&ab)
        .map(|((u, r), a)| u + r - a)
        .collect();
    let mut out = vec![0.0; v.len()];
    prox_into(&v, prox_kind(spec, state.rho), &mut out)?;
    Ok(out)
}

/// β-update with `z = u − α + r` taken from `state` (whose `alpha` is already updated).
pub fn beta_update(state: &AdmmState, spec: &ProblemSpec, config: &SolverConfig) -> Result<Vec<f64>> {
    state.check_dims(spec)?;
    let cols: Vec<usize> = (0..spec.dim()).collect();
    let mut ws = Workspace::new(spec, &cols, config, None);
    let z: Vec<f64> = state
        .u
        .iter()
        .zip(&state.alpha)
        .zip(spec.r())
        .map(|((u, a), r)| u - a + r)
        .collect();
    let mut beta = state.beta.clone();
    let mut ab = vec![0.0; spec.alpha_len()];
    spec.op().apply(&beta, &mut ab);
    ws.beta_step(spec, &z, &mut beta, &mut ab, state.rho, config);
    Ok(beta)
}

/// `u + (r − α − Aβ)` with the current `α`, `β`.
pub fn dual_update(state: &AdmmState, spec: &ProblemSpec) -> Result<Vec<f64>> {
    state.check_dims(spec)?;
    let mut ab = vec![0.0; spec.alpha_len()];
    spec.op().apply(&state.beta, &mut ab);
    Ok(state
        .u
        .iter()
        .zip(spec.r())
        .zip(&state.alpha)
        .zip(&ab)
        .map(|(((u, r), a), b)| u + (r - a - b))
        .collect())
}

/// Runs ADMM on the full coordinate set.
pub fn solve(spec: &ProblemSpec, config: &SolverConfig, warm: Option<&AdmmState>) -> Result<AdmmState> {
    let cols: Vec<usize> = (0..spec.dim()).collect();
    solve_restricted(spec, config, warm, &cols, None)
}

/// Runs ADMM with `β_j` fixed at zero for every `j` outside `cols`.
///
/// `spectral_bound` may supply a cached bound on `λ_max(A_Sᵀ A_S)` for the linearized step.
pub fn solve_restricted(
    spec: &ProblemSpec,
    config: &SolverConfig,
    warm: Option<&AdmmState>,
    cols: &[usize],
    spectral_bound: Option<f64>,
) -> Result<AdmmState> {
    solve_monitored(spec, config, warm, cols, spectral_bound, &mut |_| false)
}

/// First iteration at which the monitor of [`solve_monitored`] is consulted; later
/// checkpoints double.
pub const FIRST_CHECKPOINT: usize = 25;

/// [`solve_restricted`] with a monitor called on the state at iterations 25, 50, 100, …;
/// returning `true` stops the run with [`Termination::Stopped`].
pub fn solve_monitored(
    spec: &ProblemSpec,
    config: &SolverConfig,
    warm: Option<&AdmmState>,
    cols: &[usize],
    spectral_bound: Option<f64>,
    monitor: &mut dyn FnMut(&AdmmState) -> bool,
) -> Result<AdmmState> {
    config.validate()?;
    let mut state = match warm {
        Some(w) => {
            w.check_dims(spec)?;
            let mut s = w.clone();
            s.rho = config.rho;
            s.iter = 0;
            s.trace.clear();
            s.termination = Termination::NotRun;
            s
        }
        None => AdmmState::zeros(spec, config.rho),
    };
    let mut allowed = vec![false; spec.dim()];
    for &j in cols {
        allowed[j] = true;
    }
    for (j, b) in state.beta.iter_mut().enumerate() {
        if !allowed[j] {
            *b = 0.0;
        }
    }

    let rho = config.rho;
    let m = spec.alpha_len();
    let kind = prox_kind(spec, rho);
    let r = spec.r();
    let mut ws = Workspace::new(spec, cols, config, spectral_bound);

    let mut ab = vec![0.0; m];
    spec.op().apply(&state.beta, &mut ab);
    let mut v = vec![0.0; m];
    let mut alpha_new = vec![0.0; m];
    let mut z = vec![0.0; m];
    let mut dalpha_t = vec![0.0; spec.dim()];
    let sqrt_m = (m as f64).sqrt();
    let sqrt_d = (cols.len().max(1) as f64).sqrt();

    let dual_residual = |alpha_new: &[f64], alpha: &[f64], out: &mut [f64]| -> f64 {
        let diff: Vec<f64> = alpha_new.iter().zip(alpha).map(|(a, b)| a - b).collect();
        spec.op().apply_transpose_cols(&diff, cols, out);
        let s: f64 = cols.iter().map(|&j| out[j] * out[j]).sum();
        rho * s.sqrt() / sqrt_d
    };

    state.termination = Termination::MaxIterReached;
    let mut next_checkpoint = FIRST_CHECKPOINT;
    for t in 0..config.max_iter {
        for i in 0..m {
            v[i] = state.u[i] + r[i] - ab[i];
        }
        prox_into(&v, kind, &mut alpha_new)?;
        for i in 0..m {
            z[i] = state.u[i] - alpha_new[i] + r[i];
        }
        ws.beta_step(spec, &z, &mut state.beta, &mut ab, rho, config);

        let mut pr = 0.0;
        for i in 0..m {
            let res = r[i] - alpha_new[i] - ab[i];
            state.u[i] += res;
            pr += res * res;
        }
        let primal = pr.sqrt() / sqrt_m;
        state.iter = t + 1;
        state.primal_residual = primal;

        let need_dual = config.record_trace || primal <= config.tol;
        let dual = if need_dual {
            dual_residual(&alpha_new, &state.alpha, &mut dalpha_t)
        } else {
            f64::INFINITY
        };
        std::mem::swap(&mut state.alpha, &mut alpha_new);
        if config.record_trace {
            state.trace.push(ResidualRecord { primal, dual });
        }
        if need_dual {
            state.dual_residual = dual;
        }
        if !primal.is_finite() {
            return Err(Error::NonFinite("ADMM iterate"));
        }
        if primal <= config.tol && dual <= config.tol {
            state.termination = Termination::Converged;
            return Ok(state);
        }
        if state.iter == next_checkpoint {
            next_checkpoint *= 2;
            if monitor(&state) {
                state.termination = Termination::Stopped;
                return Ok(state);
            }
        }
    }
    // alpha_new holds the previous α after the swap
    state.dual_residual = dual_residual(&state.alpha, &alpha_new, &mut dalpha_t);
    Ok(state)
}

/// Per-solve scratch: step size, column cache and the active column list.
struct Workspace<'c> {
    cols: &'c [usize],
    gamma: f64,
    col_sq: HashMap<usize, f64>,
    col_cache: HashMap<usize, Vec<f64>>,
    grad: Vec<f64>,
    res: Vec<f64>,
    steps: usize,
}

impl<'c> Workspace<'c> {
    fn new(
        spec: &ProblemSpec,
        cols: &'c [usize],
        config: &SolverConfig,
        spectral_bound: Option<f64>,
    ) -> Self {
        let gamma = match config.inner {
            InnerSolver::Linearized => {
                spectral_bound.unwrap_or_else(|| spec.op().spectral_bound(cols))
            }
            InnerSolver::CoordinateDescent => 0.0,
        };
        Self {
            cols,
            gamma,
            col_sq: HashMap::new(),
            col_cache: HashMap::new(),
            grad: vec![0.0; spec.dim()],
            res: vec![0.0; spec.alpha_len()],
            steps: 0,
        }
    }

    /// Advances `beta` (and `ab = Aβ`) for the sub-problem with target `z`.
    fn beta_step(
        &mut self,
        spec: &ProblemSpec,
        z: &[f64],
        beta: &mut [f64],
        ab: &mut [f64],
        rho: f64,
        config: &SolverConfig,
    ) {
        match config.inner {
            InnerSolver::Linearized => self.linearized(spec, z, beta, ab, rho),
            InnerSolver::CoordinateDescent => {
                self.coordinate_descent(spec, z, beta, ab, rho, config.inner_sweeps)
            }
        }
        self.steps += 1;
    }

    fn linearized(&mut self, spec: &ProblemSpec, z: &[f64], beta: &mut [f64], ab: &mut [f64], rho: f64) {
        let op = spec.op();
        for (res, (zi, ai)) in self.res.iter_mut().zip(z.iter().zip(ab.iter())) {
            *res = zi - ai;
        }
        op.apply_transpose_cols(&self.res, self.cols, &mut self.grad);
        let inv_gamma = 1.0 / self.gamma;
        let thresh = inv_gamma / rho;
        match op {
            LinearOperator::Matrix(a) if self.steps % 64 != 63 => {
                for &j in self.cols {
                    let new = soft_threshold_scalar(beta[j] + inv_gamma * self.grad[j], thresh);
                    let delta = new - beta[j];
                    if delta != 0.0 {
                        axpy(delta, crate::linalg::col(a, j), ab);
                        beta[j] = new;
                    }
                }
            }
            _ => {
                // periodic full recomputation keeps Aβ free of accumulated rounding
                for &j in self.cols {
                    beta[j] = soft_threshold_scalar(beta[j] + inv_gamma * self.grad[j], thresh);
                }
                op.apply(beta, ab);
            }
        }
    }

    fn column<'a>(&'a mut self, op: &'a LinearOperator, j: usize) -> &'a [f64] {
        match op {
            LinearOperator::Matrix(a) => crate::linalg::col(a, j),
            LinearOperator::ScaledGram { .. } => {
                self.col_cache.entry(j).or_insert_with(|| op.column(j))
            }
        }
    }

    fn col_sq_norm(&mut self, op: &LinearOperator, j: usize) -> f64 {
        if let Some(&c) = self.col_sq.get(&j) {
            return c;
        }
        let c = {
            let a = self.column(op, j);
            dot(a, a)
        };
        self.col_sq.insert(j, c);
        c
    }

    fn coordinate_descent(
        &mut self,
        spec: &ProblemSpec,
        z: &[f64],
        beta: &mut [f64],
        ab: &mut [f64],
        rho: f64,
        sweeps: usize,
    ) {
        let op = spec.op();
        let thresh = 1.0 / rho;
        let mut res: Vec<f64> = z.iter().zip(ab.iter()).map(|(a, b)| a - b).collect();
        for _ in 0..sweeps {
            // active set: nonzero coordinates plus those violating the zero-optimality test
            op.apply_transpose_cols(&res, self.cols, &mut self.grad);
            let active: Vec<usize> = self
                .cols
                .iter()
                .copied()
                .filter(|&j| beta[j] != 0.0 || self.grad[j].abs() > thresh)
                .collect();
            if active.is_empty() {
                break;
            }
            for j in active {
                let c = self.col_sq_norm(op, j);
                if c == 0.0 {
                    beta[j] = 0.0;
                    continue;
                }
                let aj = self.column(op, j).to_vec();
                let g = dot(&aj, &res);
                let new = soft_threshold_scalar(beta[j] + g / c, thresh / c);
                let delta = new - beta[j];
                if delta != 0.0 {
                    axpy(-delta, &aj, &mut res);
                    beta[j] = new;
                }
            }
        }
        op.apply(beta, ab);
    }
}

/// Objective of the β sub-problem, `½‖z − Aβ‖² + ‖β‖₁/ρ`.
pub fn beta_objective(spec: &ProblemSpec, z: &[f64], beta: &[f64], rho: f64) -> f64 {
    let mut ab = vec![0.0; spec.alpha_len()];
    spec.op().apply(beta, &mut ab);
    let fit: Vec<f64> = z.iter().zip(&ab).map(|(a, b)| a - b).collect();
    0.5 * norm2(&fit).powi(2) + beta.iter().map(|b| b.abs()).sum::<f64>() / rho
}
