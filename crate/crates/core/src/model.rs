//! Problem data, moments and the `(loss, A, r)` configurations solved by ADMM.
//!
//! Every method is cast as
//!
//! ```text
//! minimize  L_λ(α) + ‖β‖₁   subject to   r − Aβ = α
//! ```
//!
//! with `A = X`, `r = y` and `L_λ(α) = ‖α‖_q / (n^{1/q} λ)` for the ℓq losses, and
//! `A = XᵀX / n`, `r = Xᵀy / n` with `L_λ` the indicator of the ℓ∞ ball of radius `λ`
//! for the Dantzig selector.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{col, dot};

/// Above this dimension a dense `d × d` operator is refused.
pub const MAX_DENSE_DIM: usize = 2000;

/// Shift/scale applied by [`standardize`], relative to the data as first constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    pub x_shift: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_shift: f64,
    pub centered: bool,
    pub scaled: bool,
}

impl Transform {
    fn identity(d: usize) -> Self {
        Self {
            x_shift: vec![0.0; d],
            x_scale: vec![1.0; d],
            y_shift: 0.0,
            centered: false,
            scaled: false,
        }
    }

    /// Maps coefficients fitted on transformed data back to the original scale,
    /// returning `(coefficients, intercept)`.
    pub fn back_transform(&self, beta: &[f64]) -> (Vec<f64>, f64) {
        let coef: Vec<f64> = beta
            .iter()
            .zip(&self.x_scale)
            .map(|(b, s)| b / s)
            .collect();
        let intercept = self.y_shift
            - coef
                .iter()
                .zip(&self.x_shift)
                .map(|(b, m)| b * m)
                .sum::<f64>();
        (coef, intercept)
    }
}

/// Dense column-major design with an optional response and missing-value masks.
///
/// Missing cells hold `0.0` in `x`; the mask is authoritative.
#[derive(Debug, Clone)]
pub struct DesignData {
    x: Arc<DMatrix<f64>>,
    y: Option<Arc<[f64]>>,
    missing: Option<DMatrix<bool>>,
    y_missing: Option<Vec<bool>>,
    column_means: Vec<f64>,
    column_sds: Vec<f64>,
    transform: Transform,
}

impl DesignData {
    pub fn new(x: DMatrix<f64>, y: Option<Vec<f64>>) -> Result<Self> {
        Self::build(x, y, None, None)
    }

    /// Data with missing entries. `mask[(i, j)] == true` marks `x[(i, j)]` missing;
    /// `y_mask[i] == true` marks `y[i]` missing.
    pub fn with_missing(
        x: DMatrix<f64>,
        mask: DMatrix<bool>,
        y: Option<Vec<f64>>,
        y_mask: Option<Vec<bool>>,
    ) -> Result<Self> {
        if mask.shape() != x.shape() {
            return Err(Error::Dimension(format!(
                "mask shape {:?} differs from x shape {:?}",
                mask.shape(),
                x.shape()
            )));
        }
        if let (Some(y), Some(ym)) = (&y, &y_mask) {
            if y.len() != ym.len() {
                return Err(Error::Dimension("response mask length".into()));
            }
        }
        if y_mask.is_some() && y.is_none() {
            return Err(Error::MissingResponse);
        }
        let mask = if mask.iter().any(|&m| m) {
            Some(mask)
        } else {
            None
        };
        let y_mask = y_mask.filter(|m| m.iter().any(|&b| b));
        Self::build(x, y, mask, y_mask)
    }

    fn build(
        mut x: DMatrix<f64>,
        mut y: Option<Vec<f64>>,
        missing: Option<DMatrix<bool>>,
        y_missing: Option<Vec<bool>>,
    ) -> Result<Self> {
        let (n, d) = x.shape();
        if n < 2 || d < 1 {
            return Err(Error::Dimension(format!(
                "need n >= 2 and d >= 1, got n = {n}, d = {d}"
            )));
        }
        if let Some(m) = &missing {
            for (v, &miss) in x.iter_mut().zip(m.iter()) {
                if miss {
                    *v = 0.0;
                }
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        if let Some(y) = y.as_mut() {
            if y.len() != n {
                return Err(Error::Dimension(format!(
                    "response has length {}, expected {n}",
                    y.len()
                )));
            }
            if let Some(ym) = &y_missing {
                for (v, &miss) in y.iter_mut().zip(ym) {
                    if miss {
                        *v = 0.0;
                    }
                }
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("response"));
            }
        }
        let (column_means, column_sds) = column_stats(&x, missing.as_ref());
        Ok(Self {
            x: Arc::new(x),
            y: y.map(Arc::from),
            missing,
            y_missing,
            column_means,
            column_sds,
            transform: Transform::identity(d),
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub(crate) fn x_arc(&self) -> Arc<DMatrix<f64>> {
        Arc::clone(&self.x)
    }

    pub fn y(&self) -> Option<&[f64]> {
        self.y.as_deref()
    }

    pub(crate) fn y_arc(&self) -> Option<Arc<[f64]>> {
        self.y.clone()
    }

    pub fn missing_mask(&self) -> Option<&DMatrix<bool>> {
        self.missing.as_ref()
    }

    pub fn response_mask(&self) -> Option<&[bool]> {
        self.y_missing.as_deref()
    }

    pub fn has_missing(&self) -> bool {
        self.missing.is_some() || self.y_missing.is_some()
    }

    /// Means of the current columns over observed entries.
    pub fn column_means(&self) -> &[f64] {
        &self.column_means
    }

    /// Population (divisor n) standard deviations of the current columns.
    pub fn column_sds(&self) -> &[f64] {
        &self.column_sds
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    /// Drops the response, keeping the design.
    pub fn without_response(&self) -> Self {
        Self {
            y: None,
            y_missing: None,
            ..self.clone()
        }
    }
}

fn column_stats(x: &DMatrix<f64>, mask: Option<&DMatrix<bool>>) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = x.shape();
    let mut means = Vec::with_capacity(d);
    let mut sds = Vec::with_capacity(d);
    for j in 0..d {
        let c = col(x, j);
        let observed = |i: usize| mask.map_or(true, |m| !m[(i, j)]);
        let (mut cnt, mut sum) = (0usize, 0.0);
        for (i, v) in c.iter().enumerate() {
            if observed(i) {
                cnt += 1;
                sum += v;
            }
        }
        let mean = if cnt > 0 { sum / cnt as f64 } else { 0.0 };
        let mut ss = 0.0;
        for (i, v) in c.iter().enumerate().take(n) {
            if observed(i) {
                ss += (v - mean) * (v - mean);
            }
        }
        means.push(mean);
        sds.push(if cnt > 0 { (ss / cnt as f64).sqrt() } else { 0.0 });
    }
    (means, sds)
}

fn response_mean(y: &[f64], mask: Option<&[bool]>) -> f64 {
    let (mut cnt, mut sum) = (0usize, 0.0);
    for (i, v) in y.iter().enumerate() {
        if mask.map_or(true, |m| !m[i]) {
            cnt += 1;
            sum += v;
        }
    }
    if cnt > 0 {
        sum / cnt as f64
    } else {
        0.0
    }
}

/// Centers (mean 0) and/or scales (population sd 1) the columns of `x`; centering
/// also centers `y`. The applied shift and scale are accumulated in [`Transform`].
pub fn standardize(data: &DesignData, center: bool, scale: bool) -> Result<DesignData> {
    let d = data.d();
    let sds = data.column_sds();
    let means = data.column_means();
    if scale {
        // relative test so that columns of tiny magnitude are not rejected
        for j in 0..d {
            let m = means[j].abs().max(1.0);
            if !(sds[j] > 1e-14 * m) {
                return Err(Error::ConstantColumn(j));
            }
        }
    }
    let shift: Vec<f64> = if center { means.to_vec() } else { vec![0.0; d] };
    let factor: Vec<f64> = if scale { sds.to_vec() } else { vec![1.0; d] };

    let mut x = (*data.x).clone();
    let n = x.nrows();
    for j in 0..d {
        let c = &mut x.as_mut_slice()[j * n..(j + 1) * n];
        for (i, v) in c.iter_mut().enumerate() {
            if data.missing.as_ref().is_some_and(|m| m[(i, j)]) {
                *v = 0.0;
            } else {
                *v = (*v - shift[j]) / factor[j];
            }
        }
    }
    let mut y_shift = 0.0;
    let y = data.y.as_ref().map(|y| {
        if center {
            y_shift = response_mean(y, data.y_missing.as_deref());
        }
        y.iter()
            .enumerate()
            .map(|(i, v)| {
                if data.y_missing.as_ref().is_some_and(|m| m[i]) {
                    0.0
                } else {
                    v - y_shift
                }
            })
            .collect::<Vec<f64>>()
    });

    let old = &data.transform;
    let transform = Transform {
        x_shift: (0..d)
            .map(|j| old.x_shift[j] + old.x_scale[j] * shift[j])
            .collect(),
        x_scale: (0..d).map(|j| old.x_scale[j] * factor[j]).collect(),
        y_shift: old.y_shift + y_shift,
        centered: old.centered || center,
        scaled: old.scaled || scale,
    };
    let (column_means, column_sds) = column_stats(&x, data.missing.as_ref());
    Ok(DesignData {
        x: Arc::new(x),
        y: y.map(Arc::from),
        missing: data.missing.clone(),
        y_missing: data.y_missing.clone(),
        column_means,
        column_sds,
        transform,
    })
}

/// Second moments of the design: `(1/n)XᵀX`, `(1/n)Xᵀy`, covariance and correlation.
#[derive(Debug, Clone)]
pub struct MomentSet {
    pub gram: DMatrix<f64>,
    pub cross: Option<Vec<f64>>,
    pub cov: DMatrix<f64>,
    pub corr: DMatrix<f64>,
}

/// Moments over complete data, or pairwise-complete moments when a mask is present.
///
/// With missing values, entry `(j, k)` uses only the rows where both columns are
/// observed and divides by their count; covariances center with the means of those
/// same rows.
pub fn pairwise_moments(data: &DesignData) -> Result<MomentSet> {
    if data.has_missing() {
        pairwise_masked(data)
    } else {
        Ok(dense_moments(data))
    }
}

fn dense_moments(data: &DesignData) -> MomentSet {
    let x = data.x();
    let (n, d) = x.shape();
    let nf = n as f64;
    let gram = x.tr_mul(x) / nf;
    let cross = data.y().map(|y| {
        (0..d).map(|j| dot(col(x, j), y) / nf).collect::<Vec<f64>>()
    });
    let mut xc = x.clone();
    for j in 0..d {
        let m = data.column_means[j];
        for v in &mut xc.as_mut_slice()[j * n..(j + 1) * n] {
            *v -= m;
        }
    }
    let mut cov = xc.tr_mul(&xc) / nf;
    symmetrize_inplace(&mut cov);
    let mut gram = gram;
    symmetrize_inplace(&mut gram);
    let corr = correlation_from_cov(&cov, |j, _| cov[(j, j)], |_, k| cov[(k, k)]);
    MomentSet {
        gram,
        cross,
        cov,
        corr,
    }
}

fn symmetrize_inplace(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for j in 0..d {
        for k in j + 1..d {
            let v = 0.5 * (m[(j, k)] + m[(k, j)]);
            m[(j, k)] = v;
            m[(k, j)] = v;
        }
    }
}

fn correlation_from_cov(
    cov: &DMatrix<f64>,
    var_j: impl Fn(usize, usize) -> f64,
    var_k: impl Fn(usize, usize) -> f64,
) -> DMatrix<f64> {
    let d = cov.nrows();
    DMatrix::from_fn(d, d, |j, k| {
        if j == k {
            1.0
        } else {
            let denom = (var_j(j, k) * var_k(j, k)).sqrt();
            if denom > 0.0 {
                (cov[(j, k)] / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        }
    })
}

struct PairStats {
    gram: f64,
    cov: f64,
    var_j: f64,
    var_k: f64,
}

fn pairwise_masked(data: &DesignData) -> Result<MomentSet> {
    let x = data.x();
    let (n, d) = x.shape();
    let observed = |i: usize, j: usize| data.missing.as_ref().map_or(true, |m| !m[(i, j)]);

    for j in 0..d {
        let cnt = (0..n).filter(|&i| observed(i, j)).count();
        if cnt < 2 {
            return Err(Error::InsufficientOverlap(j, j));
        }
    }

    // upper-triangle rows in parallel, merged by row index
    let rows: Vec<Result<Vec<PairStats>>> = (0..d)
        .into_par_iter()
        .map(|j| {
            let cj = col(x, j);
            (j..d)
                .map(|k| {
                    let ck = col(x, k);
                    let rows: Vec<usize> =
                        (0..n).filter(|&i| observed(i, j) && observed(i, k)).collect();
                    if rows.is_empty() {
                        return Err(Error::InsufficientOverlap(j, k));
                    }
                    let c = rows.len() as f64;
                    let (mut sxy, mut sx, mut sy) = (0.0, 0.0, 0.0);
                    for &i in &rows {
                        sxy += cj[i] * ck[i];
                        sx += cj[i];
                        sy += ck[i];
                    }
                    let (mx, my) = (sx / c, sy / c);
                    let (mut cxy, mut vx, mut vy) = (0.0, 0.0, 0.0);
                    for &i in &rows {
                        let (a, b) = (cj[i] - mx, ck[i] - my);
                        cxy += a * b;
                        vx += a * a;
                        vy += b * b;
                    }
                    Ok(PairStats {
                        gram: sxy / c,
                        cov: cxy / c,
                        var_j: vx / c,
                        var_k: vy / c,
                    })
                })
                .collect()
        })
        .collect();

    let mut gram = DMatrix::zeros(d, d);
    let mut cov = DMatrix::zeros(d, d);
    let mut corr = DMatrix::identity(d, d);
    for (j, row) in rows.into_iter().enumerate() {
        for (off, s) in row?.into_iter().enumerate() {
            let k = j + off;
            gram[(j, k)] = s.gram;
            gram[(k, j)] = s.gram;
            cov[(j, k)] = s.cov;
            cov[(k, j)] = s.cov;
            if j != k {
                let denom = (s.var_j * s.var_k).sqrt();
                let r = if denom > 0.0 {
                    (s.cov / denom).clamp(-1.0, 1.0)
                } else {
                    0.0
                };
                corr[(j, k)] = r;
                corr[(k, j)] = r;
            }
        }
    }

    let cross = match data.y() {
        None => None,
        Some(y) => {
            let y_obs = |i: usize| data.y_missing.as_ref().map_or(true, |m| !m[i]);
            let mut cross = Vec::with_capacity(d);
            for j in 0..d {
                let cj = col(x, j);
                let (mut s, mut c) = (0.0, 0usize);
                for i in 0..n {
                    if observed(i, j) && y_obs(i) {
                        s += cj[i] * y[i];
                        c += 1;
                    }
                }
                if c == 0 {
                    return Err(Error::InsufficientOverlap(j, d));
                }
                cross.push(s / c as f64);
            }
            Some(cross)
        }
    };

    Ok(MomentSet {
        gram,
        cross,
        cov,
        corr,
    })
}

/// Regression method: an ℓq loss with `q ∈ [1, 2]` or the Dantzig selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Lq { q: f64 },
    Dantzig,
}

impl Method {
    pub const LAD: Method = Method::Lq { q: 1.0 };
    pub const SQRT: Method = Method::Lq { q: 2.0 };

    pub fn lq(q: f64) -> Result<Method> {
        if (1.0..=2.0).contains(&q) {
            Ok(Method::Lq { q })
        } else {
            Err(Error::InvalidQ(q))
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Method::Lq { q } if !(1.0..=2.0).contains(&q) => Err(Error::InvalidQ(q)),
            _ => Ok(()),
        }
    }

    pub fn q(&self) -> Option<f64> {
        match *self {
            Method::Lq { q } => Some(q),
            Method::Dantzig => None,
        }
    }

    pub fn is_dantzig(&self) -> bool {
        matches!(self, Method::Dantzig)
    }

    pub fn name(&self) -> String {
        match *self {
            Method::Lq { q } if q == 1.0 => "lad".into(),
            Method::Lq { q } if q == 2.0 => "sqrt".into(),
            Method::Lq { q } => format!("lq({q})"),
            Method::Dantzig => "dantzig".into(),
        }
    }
}

/// The `A` of the constraint `r − Aβ = α`.
#[derive(Debug, Clone)]
pub enum LinearOperator {
    /// An explicit matrix.
    Matrix(Arc<DMatrix<f64>>),
    /// `scale · XᵀX`, applied as a composition without forming the product.
    ScaledGram { x: Arc<DMatrix<f64>>, scale: f64 },
}

impl LinearOperator {
    pub fn nrows(&self) -> usize {
        match self {
            LinearOperator::Matrix(a) => a.nrows(),
            LinearOperator::ScaledGram { x, .. } => x.ncols(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            LinearOperator::Matrix(a) => a.ncols(),
            LinearOperator::ScaledGram { x, .. } => x.ncols(),
        }
    }

    /// `out = Aβ`, skipping zero entries of `beta`.
    pub fn apply(&self, beta: &[f64], out: &mut [f64]) {
        match self {
            LinearOperator::Matrix(a) => {
                out.iter_mut().for_each(|v| *v = 0.0);
                for (j, &b) in beta.iter().enumerate() {
                    if b != 0.0 {
                        crate::linalg::axpy(b, col(a, j), out);
                    }
                }
            }
            LinearOperator::ScaledGram { x, scale } => {
                let mut xb = vec![0.0; x.nrows()];
                for (j, &b) in beta.iter().enumerate() {
                    if b != 0.0 {
                        crate::linalg::axpy(b, col(x, j), &mut xb);
                    }
                }
                for (j, o) in out.iter_mut().enumerate() {
                    *o = scale * dot(col(x, j), &xb);
                }
            }
        }
    }

    /// `out[j] = (Aᵀv)_j` for every `j` in `cols`; other entries are untouched.
    pub fn apply_transpose_cols(&self, v: &[f64], cols: &[usize], out: &mut [f64]) {
        match self {
            LinearOperator::Matrix(a) => {
                for &j in cols {
                    out[j] = dot(col(a, j), v);
                }
            }
            LinearOperator::ScaledGram { x, scale } => {
                let mut xv = vec![0.0; x.nrows()];
                for (j, &b) in v.iter().enumerate() {
                    if b != 0.0 {
                        crate::linalg::axpy(b, col(x, j), &mut xv);
                    }
                }
                for &j in cols {
                    out[j] = scale * dot(col(x, j), &xv);
                }
            }
        }
    }

    /// Full `Aᵀv`.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let cols: Vec<usize> = (0..self.ncols()).collect();
        let mut out = vec![0.0; self.ncols()];
        self.apply_transpose_cols(v, &cols, &mut out);
        out
    }

    /// Column `j` of `A`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        match self {
            LinearOperator::Matrix(a) => col(a, j).to_vec(),
            LinearOperator::ScaledGram { x, scale } => {
                let xj = col(x, j);
                (0..x.ncols()).map(|k| scale * dot(col(x, k), xj)).collect()
            }
        }
    }

    /// Entry `(i, j)` of `A`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            LinearOperator::Matrix(a) => a[(i, j)],
            LinearOperator::ScaledGram { x, scale } => scale * dot(col(x, i), col(x, j)),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            LinearOperator::Matrix(a) => (**a).clone(),
            LinearOperator::ScaledGram { x, scale } => x.tr_mul(x) * *scale,
        }
    }

    /// Upper bound on the largest eigenvalue of `A_Sᵀ A_S` for the column subset `S`:
    /// 50 power iterations with a 1% safety margin.
    pub fn spectral_bound(&self, cols: &[usize]) -> f64 {
        if cols.is_empty() {
            return 1.0;
        }
        let d = self.ncols();
        let m = self.nrows();
        let mut v = vec![0.0; d];
        // deterministic start with mixed signs to avoid orthogonality to the top vector
        for (t, &j) in cols.iter().enumerate() {
            v[j] = 1.0 + 0.1 * ((t * 7919 % 13) as f64) / 13.0;
        }
        let mut av = vec![0.0; m];
        let mut w = vec![0.0; d];
        let mut est = 0.0;
        for _ in 0..50 {
            let nv = cols.iter().map(|&j| v[j] * v[j]).sum::<f64>().sqrt();
            if nv == 0.0 {
                break;
            }
            for &j in cols {
                v[j] /= nv;
            }
            self.apply(&v, &mut av);
            est = dot(&av, &av);
            self.apply_transpose_cols(&av, cols, &mut w);
            for &j in cols {
                v[j] = w[j];
            }
        }
        let nv = cols.iter().map(|&j| v[j] * v[j]).sum::<f64>().sqrt();
        1.01 * est.max(nv).max(f64::MIN_POSITIVE)
    }
}

/// One instance of the generic problem at a fixed `λ`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    method: Method,
    lambda: f64,
    op: LinearOperator,
    r: Arc<[f64]>,
    samples: usize,
}

impl ProblemSpec {
    /// Builds from an explicit operator and right-hand side. For ℓq losses the loss
    /// normalizer `n` is the number of rows of `A`.
    pub fn from_parts(
        method: Method,
        op: LinearOperator,
        r: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        method.validate()?;
        check_lambda(lambda)?;
        if r.len() != op.nrows() {
            return Err(Error::Dimension(format!(
                "r has length {}, operator has {} rows",
                r.len(),
                op.nrows()
            )));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("right-hand side"));
        }
        let samples = op.nrows();
        Ok(Self {
            method,
            lambda,
            op,
            r: Arc::from(r),
            samples,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn op(&self) -> &LinearOperator {
        &self.op
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    /// Sample size used in the `n^{1/q}` normalization of ℓq losses.
    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn dim(&self) -> usize {
        self.op.ncols()
    }

    pub fn alpha_len(&self) -> usize {
        self.op.nrows()
    }

    /// `1 / (n^{1/q} λ)` for ℓq losses; zero for the Dantzig indicator.
    pub fn loss_scale(&self) -> f64 {
        match self.method {
            Method::Lq { q } => 1.0 / ((self.samples as f64).powf(1.0 / q) * self.lambda),
            Method::Dantzig => 0.0,
        }
    }

    /// Same operator and right-hand side at a different `λ`.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            lambda,
            ..self.clone()
        })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidLambda(lambda))
    }
}

/// Builds the configuration for `method` at `lambda`.
///
/// The Dantzig operator is materialized as `(1/n)XᵀX` when `d ≤ n` and applied as a
/// composition otherwise. With missing values the pairwise-complete Gram matrix is
/// used, which is always dense.
pub fn build_problem(data: &DesignData, method: Method, lambda: f64) -> Result<ProblemSpec> {
    method.validate()?;
    check_lambda(lambda)?;
    let y = data.y_arc().ok_or(Error::MissingResponse)?;
    let n = data.n();
    let d = data.d();
    match method {
        Method::Lq { .. } => {
            if data.has_missing() {
                return Err(Error::MissingNotSupported("lq losses"));
            }
            Ok(ProblemSpec {
                method,
                lambda,
                op: LinearOperator::Matrix(data.x_arc()),
                r: y,
                samples: n,
            })
        }
        Method::Dantzig => {
            let (op, r) = if data.has_missing() {
                if d > MAX_DENSE_DIM {
                    return Err(Error::ProblemTooLarge(format!(
                        "pairwise Gram with d = {d} exceeds {MAX_DENSE_DIM}"
                    )));
                }
                let m = pairwise_moments(data)?;
                let cross = m.cross.expect("response present");
                (LinearOperator::Matrix(Arc::new(m.gram)), cross)
            } else {
                let x = data.x();
                let nf = n as f64;
                let r: Vec<f64> = (0..d).map(|j| dot(col(x, j), &y) / nf).collect();
                let op = if d <= n {
                    let mut g = x.tr_mul(x) / nf;
                    symmetrize_inplace(&mut g);
                    LinearOperator::Matrix(Arc::new(g))
                } else {
                    LinearOperator::ScaledGram {
                        x: data.x_arc(),
                        scale: 1.0 / nf,
                    }
                };
                (op, r)
            };
            Ok(ProblemSpec {
                method,
                lambda,
                op,
                r: Arc::from(r),
                samples: n,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small() -> DesignData {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 4.0, 2.0, -1.0, 3.0, 0.5]);
        DesignData::new(x, Some(vec![1.0, 2.0, 6.0])).unwrap()
    }

    #[test]
    fn standardize_hand_example() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let data = DesignData::new(x, None).unwrap();
        let s = standardize(&data, true, true).unwrap();
        let c = s.x().column(0);
        let expect = 1.0 / (2.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!(c[0], -expect, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[2], expect, epsilon = 1e-12);
        assert_abs_diff_eq!(c[0], -1.2247, epsilon = 1e-4);
        assert_abs_diff_eq!(s.transform().x_shift[0], 2.0);
        assert_abs_diff_eq!(s.transform().x_scale[0], (2.0f64 / 3.0).sqrt());
    }

    #[test]
    fn standardize_is_idempotent() {
        let s1 = standardize(&small(), true, true).unwrap();
        let s2 = standardize(&s1, true, true).unwrap();
        assert!((s1.x() - s2.x()).amax() < 1e-12);
        let (y1, y2) = (s1.y().unwrap(), s2.y().unwrap());
        assert!(y1.iter().zip(y2).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn constant_column_rejected_only_when_scaling() {
        let x = DMatrix::from_row_slice(3, 2, &[5.0, 1.0, 5.0, 2.0, 5.0, 4.0]);
        let data = DesignData::new(x, None).unwrap();
        assert_eq!(
            standardize(&data, true, true).unwrap_err(),
            Error::ConstantColumn(0)
        );
        assert!(standardize(&data, true, false).is_ok());
    }

    #[test]
    fn back_transform_recovers_original_scale() {
        let data = small();
        let s = standardize(&data, true, true).unwrap();
        // a fake fit on the standardized scale
        let beta_std = [0.7, -0.2];
        let (coef, b0) = s.transform().back_transform(&beta_std);
        let xs = s.x();
        let xo = data.x();
        for i in 0..3 {
            let pred_std = s.transform().y_shift
                + beta_std[0] * xs[(i, 0)]
                + beta_std[1] * xs[(i, 1)];
            let pred_orig = b0 + coef[0] * xo[(i, 0)] + coef[1] * xo[(i, 1)];
            assert_abs_diff_eq!(pred_std, pred_orig, epsilon = 1e-12);
        }
    }

    #[test]
    fn pairwise_gram_hand_example() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 0.0, 3.0, 6.0]);
        let mut mask = DMatrix::from_element(3, 2, false);
        mask[(1, 1)] = true;
        let data = DesignData::with_missing(x, mask, None, None).unwrap();
        let m = pairwise_moments(&data).unwrap();
        assert_abs_diff_eq!(m.gram[(0, 1)], 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.gram[(1, 0)], 10.0, epsilon = 1e-12);
        // column 1 uses its two observed rows only
        assert_abs_diff_eq!(m.gram[(1, 1)], (4.0 + 36.0) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.corr[(0, 0)], 1.0);
    }

    #[test]
    fn pairwise_requires_two_observations_per_column() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 0.0, 3.0, 0.0]);
        let mut mask = DMatrix::from_element(3, 2, false);
        mask[(1, 1)] = true;
        mask[(2, 1)] = true;
        let data = DesignData::with_missing(x, mask, None, None).unwrap();
        assert_eq!(
            pairwise_moments(&data).unwrap_err(),
            Error::InsufficientOverlap(1, 1)
        );
    }

    #[test]
    fn pairwise_requires_joint_rows() {
        let x = DMatrix::from_row_slice(
            4,
            2,
            &[1.0, 0.0, 2.0, 0.0, 0.0, 3.0, 0.0, 5.0],
        );
        let mask = DMatrix::from_row_slice(
            4,
            2,
            &[false, true, false, true, true, false, true, false],
        );
        let data = DesignData::with_missing(x, mask, None, None).unwrap();
        assert_eq!(
            pairwise_moments(&data).unwrap_err(),
            Error::InsufficientOverlap(0, 1)
        );
    }

    #[test]
    fn lq_configuration() {
        let data = small();
        let p = build_problem(&data, Method::LAD, 0.5).unwrap();
        assert_abs_diff_eq!(p.loss_scale(), 1.0 / (3.0 * 0.5));
        assert_eq!(p.r(), data.y().unwrap());
        assert_eq!(p.op().to_dense(), *data.x());
        let p2 = build_problem(&data, Method::SQRT, 0.5).unwrap();
        assert_abs_diff_eq!(p2.loss_scale(), 1.0 / (3f64.sqrt() * 0.5), epsilon = 1e-15);
    }

    #[test]
    fn dantzig_identity_design() {
        let data = DesignData::new(DMatrix::identity(2, 2), Some(vec![2.0, -4.0])).unwrap();
        let p = build_problem(&data, Method::Dantzig, 0.1).unwrap();
        assert_eq!(p.r(), &[1.0, -2.0]);
        assert_eq!(p.loss_scale(), 0.0);
    }

    #[test]
    fn invalid_q_and_lambda() {
        let data = small();
        assert_eq!(
            build_problem(&data, Method::Lq { q: 2.5 }, 1.0).unwrap_err(),
            Error::InvalidQ(2.5)
        );
        assert!(Method::lq(0.5).is_err());
        assert_eq!(
            build_problem(&data, Method::SQRT, 0.0).unwrap_err(),
            Error::InvalidLambda(0.0)
        );
    }

    #[test]
    fn lq_rejects_missing_values() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 0.0, 3.0, 6.0]);
        let mut mask = DMatrix::from_element(3, 2, false);
        mask[(1, 1)] = true;
        let data = DesignData::with_missing(x, mask, Some(vec![1.0, 2.0, 3.0]), None).unwrap();
        assert!(matches!(
            build_problem(&data, Method::SQRT, 1.0),
            Err(Error::MissingNotSupported(_))
        ));
        assert!(build_problem(&data, Method::Dantzig, 1.0).is_ok());
    }

    #[test]
    fn dimension_checks() {
        assert!(DesignData::new(DMatrix::zeros(1, 3), None).is_err());
        assert!(DesignData::new(DMatrix::zeros(3, 2), Some(vec![1.0])).is_err());
        let mut x = DMatrix::zeros(3, 2);
        x[(0, 0)] = f64::NAN;
        assert_eq!(
            DesignData::new(x, None).unwrap_err(),
            Error::NonFinite("design matrix")
        );
    }
}
