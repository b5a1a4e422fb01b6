//! Optimality certificates for candidate solutions.
//!
//! For ℓq losses the check is stated in units of `λ`: with `g = Aᵀw / n^{1/q}` and `w` a
//! subgradient of `‖·‖_q` at the residual,
//! `max(0, ‖g‖_∞ − λ) + max_{j ∈ S} |g_j − λ sign(β_j)|`.
//! For the Dantzig selector it is the feasibility gap plus a complementary-slackness
//! surplus, the duality gap against a reconstructed multiplier.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{least_squares, norm_inf, norm_q, sign};
use crate::model::{LinearOperator, Method, ProblemSpec};

/// Verification tolerance on the check value.
pub const KKT_TOL: f64 = 1e-3;

/// Residuals at most this fraction of `1 + ‖r‖_∞` count as interpolated for the ℓ1 loss.
pub const INTERPOLATION_TOL: f64 = 1e-5;

/// Result of a check: its value, the multiplier used, and the normalized correlations
/// `Aᵀ(multiplier)` whose magnitude must not exceed one off the support.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub value: f64,
    /// `w` for ℓq losses (a subgradient of `‖·‖_q` at the residual), `μ` for Dantzig.
    pub multiplier: Vec<f64>,
    /// Per coordinate, in units where the ℓ1 subdifferential is `[−1, 1]`.
    pub scores: Vec<f64>,
}

impl Certificate {
    /// Coordinates with `|score| > 1 + slack`.
    pub fn violators(&self, slack: f64) -> Vec<usize> {
        self.scores
            .iter()
            .enumerate()
            .filter(|(_, s)| s.abs() > 1.0 + slack)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Dense `A[rows, cols]`; `rows = None` takes every row.
pub(crate) fn submatrix(op: &LinearOperator, rows: Option<&[usize]>, cols: &[usize]) -> DMatrix<f64> {
    let nr = rows.map_or(op.nrows(), |r| r.len());
    let mut m = DMatrix::zeros(nr, cols.len());
    for (c, &j) in cols.iter().enumerate() {
        let column = match op {
            LinearOperator::Matrix(a) => std::borrow::Cow::Borrowed(crate::linalg::col(a, j)),
            LinearOperator::ScaledGram { .. } => std::borrow::Cow::Owned(op.column(j)),
        };
        match rows {
            Some(rows) => {
                for (i, &row) in rows.iter().enumerate() {
                    m[(i, c)] = column[row];
                }
            }
            None => m.column_mut(c).copy_from_slice(&column),
        }
    }
    m
}

pub(crate) fn residual(spec: &ProblemSpec, beta: &[f64]) -> Vec<f64> {
    let mut ab = vec![0.0; spec.alpha_len()];
    spec.op().apply(beta, &mut ab);
    spec.r().iter().zip(&ab).map(|(r, a)| r - a).collect()
}

pub(crate) fn support(beta: &[f64]) -> Vec<usize> {
    (0..beta.len()).filter(|&j| beta[j] != 0.0).collect()
}

/// Gradient of `‖e‖_q` for `q > 1`, `sign(e)` for `q = 1`.
pub(crate) fn norm_gradient(e: &[f64], q: f64) -> Vec<f64> {
    if q == 1.0 {
        return e.iter().map(|&x| sign(x)).collect();
    }
    let nq = norm_q(e, q);
    e.iter()
        .map(|&x| sign(x) * (x.abs() / nq).powf(q - 1.0))
        .collect()
}

/// Check value of `beta` for the problem `spec`.
pub fn certificate(spec: &ProblemSpec, beta: &[f64]) -> Result<Certificate> {
    if beta.len() != spec.dim() {
        return Err(Error::Dimension(format!(
            "coefficients have length {}, problem has {}",
            beta.len(),
            spec.dim()
        )));
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFinite("coefficients"));
    }
    match spec.method() {
        Method::Lq { q } => lq_certificate(spec, beta, q),
        Method::Dantzig => Ok(dantzig_certificate(spec, beta)),
    }
}

fn lq_value(spec: &ProblemSpec, beta: &[f64], q: f64, w: &[f64]) -> (f64, Vec<f64>) {
    let lambda = spec.lambda();
    let norm = (spec.samples() as f64).powf(1.0 / q);
    let g: Vec<f64> = spec.op().apply_transpose(w).iter().map(|v| v / norm).collect();
    let mut value = (norm_inf(&g) - lambda).max(0.0);
    let mut worst = 0.0f64;
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            worst = worst.max((g[j] - lambda * sign(b)).abs());
        }
    }
    value += worst;
    (value, g.iter().map(|v| v / lambda).collect())
}

fn lq_certificate(spec: &ProblemSpec, beta: &[f64], q: f64) -> Result<Certificate> {
    let e = residual(spec, beta);
    let scale = 1.0 + norm_inf(spec.r());
    if norm_inf(&e) <= 1e-13 * scale {
        return Err(Error::ExactInterpolation);
    }
    let w = norm_gradient(&e, q);
    let (value, scores) = lq_value(spec, beta, q, &w);
    let mut best = Certificate {
        value,
        multiplier: w,
        scores,
    };
    if q == 1.0 {
        // interpolated rows: all small residuals, and the |S| smallest (a vertex basis)
        let s = support(beta);
        let tol = INTERPOLATION_TOL * scale;
        let small: Vec<usize> = (0..e.len()).filter(|&i| e[i].abs() <= tol).collect();
        let basis: Vec<usize> = bottom_k_abs(&e, s.len())
            .into_iter()
            .filter(|&i| e[i].abs() <= tol)
            .collect();
        for free in [basis, small] {
            if let Some(w_free) = lad_free_multiplier(spec, beta, &e, &s, &free) {
                let (value, scores) = lq_value(spec, beta, q, &w_free);
                if value < best.value {
                    best = Certificate {
                        value,
                        multiplier: w_free,
                        scores,
                    };
                }
            }
        }
    }
    Ok(best)
}

/// For the ℓ1 loss, chooses the subgradient entries on the rows `free` (taken as
/// interpolated) so that the support equations hold, clamped to `[−1, 1]`.
fn lad_free_multiplier(
    spec: &ProblemSpec,
    beta: &[f64],
    e: &[f64],
    s: &[usize],
    free: &[usize],
) -> Option<Vec<f64>> {
    if s.is_empty() || free.is_empty() {
        return None;
    }
    let n = spec.samples() as f64;
    let lambda = spec.lambda();
    let mut w: Vec<f64> = e.iter().map(|&x| sign(x)).collect();
    for &i in free {
        w[i] = 0.0;
    }
    let fixed = spec.op().apply_transpose(&w);
    // A_{F,S}ᵀ w_F = n λ sign(β_S) − (Aᵀ w_fixed)_S
    let target: Vec<f64> = s
        .iter()
        .map(|&j| n * lambda * sign(beta[j]) - fixed[j])
        .collect();
    let a_fs = submatrix(spec.op(), Some(free), s);
    let w_free = least_squares(a_fs.transpose(), &target);
    for (k, &i) in free.iter().enumerate() {
        w[i] = w_free[k].clamp(-1.0, 1.0);
    }
    Some(w)
}

/// Indices of the `k` largest entries of `|v|`, ties to the lower index, ascending.
pub(crate) fn top_k_abs(v: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Indices of the `k` smallest entries of `|v|`, ties to the lower index, ascending.
pub(crate) fn bottom_k_abs(v: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

fn dantzig_certificate(spec: &ProblemSpec, beta: &[f64]) -> Certificate {
    let lambda = spec.lambda();
    let res = residual(spec, beta);
    let feasibility = (norm_inf(&res) - lambda).max(0.0);
    let s = support(beta);
    let d = spec.dim();
    if s.is_empty() {
        return Certificate {
            value: feasibility,
            multiplier: vec![0.0; spec.alpha_len()],
            scores: vec![0.0; d],
        };
    }
    // candidate active constraints: the |S| tightest plus any within 1e-4 relative of the bound
    let mut active = top_k_abs(&res, s.len());
    for (k, r) in res.iter().enumerate() {
        if r.abs() >= lambda * (1.0 - 1e-4) && !active.contains(&k) {
            active.push(k);
        }
    }
    active.sort_unstable();
    let a_ts = submatrix(spec.op(), Some(&active), &s);
    let signs: Vec<f64> = s.iter().map(|&j| sign(beta[j])).collect();
    let mu_t = least_squares(a_ts.transpose(), &signs);
    let mut mu = vec![0.0; spec.alpha_len()];
    for (k, &row) in active.iter().enumerate() {
        // a multiplier of the wrong sign is no certificate; drop it
        mu[row] = if mu_t[k] * res[row] >= 0.0 { mu_t[k] } else { 0.0 };
    }
    let scores = spec.op().apply_transpose(&mu);
    // dual feasibility ‖Aᵀμ‖_∞ ≤ 1 is restored by scaling before taking the gap
    let over = norm_inf(&scores).max(1.0);
    // duality gap ‖β‖₁ − (μᵀr − λ‖μ‖₁) = Σ(|β_j| − β_j (Aᵀμ)_j) + Σ(λ|μ_k| − μ_k res_k)
    let primal_part: f64 = s
        .iter()
        .map(|&j| beta[j].abs() - beta[j] * scores[j] / over)
        .sum();
    let dual_part: f64 = mu
        .iter()
        .zip(&res)
        .map(|(m, r)| (lambda * m.abs() - m * r) / over)
        .sum();
    Certificate {
        value: feasibility + (primal_part + dual_part).max(0.0),
        multiplier: mu,
        scores,
    }
}
