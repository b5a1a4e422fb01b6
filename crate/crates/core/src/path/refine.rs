//! Exact refinement of approximate ADMM solutions.
//!
//! ADMM identifies the support and signs to within its tolerance; given those, the
//! optimum solves a small smooth or linear system. Smooth losses (`q > 1`) get an
//! active-set Newton method; the LAD and Dantzig problems are linear programs whose
//! optimum is a vertex determined by the support and the tight rows.
//! Callers keep a candidate only if its certificate improves.

use nalgebra::{DMatrix, DVector};

use super::kkt::{bottom_k_abs, certificate, norm_gradient, residual, submatrix, support, top_k_abs};
use crate::linalg::{dot, norm_q, sign, solve_square};
use crate::model::{Method, ProblemSpec};

const MAX_ROUNDS: usize = 50;
/// Certificate value at which the Dantzig active-set loop stops.
const EXACT_TOL: f64 = 1e-10;
/// Relative distance to the bound within which a Dantzig row counts as tight.
const NEAR_TIGHT: f64 = 1e-3;
const MAX_NEWTON: usize = 60;
/// Off-support scores above `1 + ENTRY_SLACK` enter the active set.
const ENTRY_SLACK: f64 = 1e-10;

/// A refined candidate, or `None` when the local system is degenerate.
pub fn refine(spec: &ProblemSpec, beta: &[f64]) -> Option<Vec<f64>> {
    match spec.method() {
        Method::Lq { q } if q > 1.0 => refine_smooth(spec, beta, q),
        Method::Lq { .. } => refine_lad(spec, beta),
        Method::Dantzig => refine_dantzig(spec, beta),
    }
}

/// Objective restricted to a fixed sign pattern: `c‖r − A_S b‖_q + sᵀb`.
fn restricted_objective(spec: &ProblemSpec, a_s: &DMatrix<f64>, b: &[f64], signs: &[f64], q: f64) -> f64 {
    let e = restricted_residual(spec, a_s, b);
    spec.loss_scale() * norm_q(&e, q) + dot(signs, b)
}

fn restricted_residual(spec: &ProblemSpec, a_s: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let fit = a_s * DVector::from_column_slice(b);
    spec.r().iter().zip(fit.iter()).map(|(r, f)| r - f).collect()
}

fn refine_smooth(spec: &ProblemSpec, beta: &[f64], q: f64) -> Option<Vec<f64>> {
    let d = spec.dim();
    let c = spec.loss_scale();
    let mut active = support(beta);
    let mut signs: Vec<f64> = active.iter().map(|&j| sign(beta[j])).collect();
    let mut b: Vec<f64> = active.iter().map(|&j| beta[j]).collect();
    for _ in 0..MAX_ROUNDS {
        let a_s = submatrix(spec.op(), None, &active);
        let (nb, dropped) = newton_on_support(spec, &a_s, &b, &signs, q)?;
        b = nb;
        if let Some(k) = dropped {
            active.remove(k);
            signs.remove(k);
            b.remove(k);
            continue;
        }
        let mut full = vec![0.0; d];
        for (k, &j) in active.iter().enumerate() {
            full[j] = b[k];
        }
        let e = residual(spec, &full);
        let w = norm_gradient(&e, q);
        let g = spec.op().apply_transpose(&w);
        let entering: Vec<usize> = (0..d)
            .filter(|&j| full[j] == 0.0 && (c * g[j]).abs() > 1.0 + ENTRY_SLACK)
            .collect();
        if entering.is_empty() {
            return Some(full);
        }
        let j = *entering
            .iter()
            .max_by(|&&a, &&bb| g[a].abs().total_cmp(&g[bb].abs()).then(bb.cmp(&a)))
            .expect("nonempty");
        let pos = active.partition_point(|&x| x < j);
        active.insert(pos, j);
        signs.insert(pos, sign(g[j]));
        b.insert(pos, 0.0);
    }
    None
}

/// Damped Newton for the sign-restricted objective. Returns the new coefficients and,
/// if a coefficient reached zero, its position (the caller removes it).
fn newton_on_support(
    spec: &ProblemSpec,
    a_s: &DMatrix<f64>,
    b0: &[f64],
    signs: &[f64],
    q: f64,
) -> Option<(Vec<f64>, Option<usize>)> {
    let k = b0.len();
    let mut b = b0.to_vec();
    if k == 0 {
        return Some((b, None));
    }
    let c = spec.loss_scale();
    for _ in 0..MAX_NEWTON {
        let e = restricted_residual(spec, a_s, &b);
        let nq = norm_q(&e, q);
        if !(nq > 0.0) {
            return None;
        }
        let w = norm_gradient(&e, q);
        let aw = a_s.tr_mul(&DVector::from_column_slice(&w));
        let grad: Vec<f64> = (0..k).map(|i| signs[i] - c * aw[i]).collect();
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax <= 1e-13 {
            return Some((b, None));
        }
        // Hessian of c‖e‖_q in b: c (q−1) A_Sᵀ [diag(|e|^{q−2}) / N^{q−1} − w wᵀ / N] A_S
        let floor = 1e-300f64;
        let diag: Vec<f64> = e
            .iter()
            .map(|&x| ((x.abs() / nq).max(floor)).powf(q - 2.0) / nq)
            .collect();
        let mut weighted = a_s.clone();
        for (i, &dw) in diag.iter().enumerate() {
            let mut row = weighted.row_mut(i);
            row *= dw;
        }
        let mut h = a_s.tr_mul(&weighted) - (&aw * aw.transpose()) / nq;
        h *= c * (q - 1.0);
        let ridge = 1e-14 * (0..k).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        for i in 0..k {
            h[(i, i)] += ridge;
        }
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let step = solve_square(h, &neg)?;
        // largest step keeping every sign
        let mut t_max = 1.0f64;
        let mut hit = None;
        for i in 0..k {
            let next = b[i] + step[i];
            if next * signs[i] <= 0.0 {
                let t = b[i] / (b[i] - next);
                if t < t_max {
                    t_max = t;
                    hit = Some(i);
                }
            }
        }
        let f0 = restricted_objective(spec, a_s, &b, signs, q);
        let slope = dot(&grad, &step);
        let mut t = t_max;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = (0..k).map(|i| b[i] + t * step[i]).collect();
            let f = restricted_objective(spec, a_s, &cand, signs, q);
            if f <= f0 + 1e-4 * t * slope || (f - f0).abs() <= 1e-15 * f0.abs().max(1.0) {
                if t == t_max && hit.is_some() {
                    let mut cand = cand;
                    cand[hit.unwrap()] = 0.0;
                    return Some((cand, hit));
                }
                b = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Some((b, None));
        }
    }
    Some((b, None))
}

/// Simplex on the LAD problem `c‖r − Aβ‖₁ + ‖β‖₁`, viewed as weighted least absolute
/// deviations over `n` data rows (weight `c`) and `d` penalty rows `0 − β_j` (weight 1).
///
/// A vertex has `|Z| = |S|`: the free coordinates `S` are pinned by the data rows `Z` at
/// zero residual, `A_{Z,S} b = r_Z`, and every other coordinate is pinned at zero. Each
/// pivot releases the basic row with the largest dual `|θ| > 1` and moves to the first
/// breakpoint where the objective stops decreasing. Starts from the vertex nearest the
/// ADMM iterate.
fn refine_lad(spec: &ProblemSpec, beta: &[f64]) -> Option<Vec<f64>> {
    let d = spec.dim();
    let n = spec.alpha_len();
    let c = spec.loss_scale();
    let r = spec.r();
    let mut free = support(beta);
    if free.len() > n {
        return None;
    }
    let e0 = residual(spec, beta);
    let mut zero_rows = bottom_k_abs(&e0, free.len());
    let max_pivots = 4 * (n + d);
    let mut last_objective = f64::INFINITY;
    let mut stalls = 0;

    for _ in 0..max_pivots {
        let k = free.len();
        let m = submatrix(spec.op(), Some(&zero_rows), &free);
        let rz: Vec<f64> = zero_rows.iter().map(|&i| r[i]).collect();
        let b = solve_square(m.clone(), &rz)?;
        let mut full = vec![0.0; d];
        for (p, &j) in free.iter().enumerate() {
            full[j] = b[p];
        }
        let mut e = residual(spec, &full);
        let mut basic_row = vec![false; n];
        for &i in &zero_rows {
            e[i] = 0.0;
            basic_row[i] = true;
        }
        let objective = c * e.iter().map(|x| x.abs()).sum::<f64>() + full.iter().map(|x| x.abs()).sum::<f64>();
        if objective >= last_objective - 1e-15 * objective.abs().max(1.0) {
            stalls += 1;
            if stalls > n + d {
                return Some(full);
            }
        } else {
            stalls = 0;
        }
        last_objective = objective;

        // g: gradient from nonbasic rows
        let signs: Vec<f64> = (0..n)
            .map(|i| if basic_row[i] { 0.0 } else { sign(e[i]) })
            .collect();
        let mut g: Vec<f64> = spec.op().apply_transpose(&signs).iter().map(|v| -c * v).collect();
        for &j in &free {
            g[j] += sign(full[j]);
        }
        // c A_{Z,S}ᵀ θ_Z = g_S
        let gs: Vec<f64> = free.iter().map(|&j| g[j] / c).collect();
        let theta_z = if k > 0 { solve_square(m.transpose(), &gs)? } else { Vec::new() };
        let mut theta_rows = vec![0.0; n];
        for (p, &i) in zero_rows.iter().enumerate() {
            theta_rows[i] = theta_z[p];
        }
        let at = spec.op().apply_transpose(&theta_rows);
        let mut is_free = vec![false; d];
        for &j in &free {
            is_free[j] = true;
        }

        // leaving candidates: (violation, is_data_row, index)
        let mut candidates: Vec<(f64, bool, usize)> = Vec::new();
        for (p, &i) in zero_rows.iter().enumerate() {
            if theta_z[p].abs() > 1.0 + 1e-11 {
                candidates.push((theta_z[p].abs(), true, i));
            }
        }
        let theta_pen: Vec<f64> = (0..d).map(|j| if is_free[j] { 0.0 } else { g[j] - c * at[j] }).collect();
        for j in 0..d {
            if !is_free[j] && theta_pen[j].abs() > 1.0 + 1e-11 {
                candidates.push((theta_pen[j].abs(), false, j));
            }
        }
        if candidates.is_empty() {
            return Some(full);
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.2.cmp(&b.2)));

        let mut moved = false;
        for &(_, is_data, idx) in &candidates {
            // direction δ over free ∪ {entering coordinate}
            let (delta_s, new_coord) = if is_data {
                let p = zero_rows.binary_search(&idx).ok()?;
                let sigma = sign(theta_z[p]);
                let mut rhs = vec![0.0; k];
                rhs[p] = -sigma;
                (solve_square(m.clone(), &rhs)?, None)
            } else {
                let sigma = sign(theta_pen[idx]);
                let col = submatrix(spec.op(), Some(&zero_rows), &[idx]);
                let rhs: Vec<f64> = col.iter().map(|v| sigma * v).collect();
                let ds = if k > 0 { solve_square(m.clone(), &rhs)? } else { Vec::new() };
                (ds, Some((idx, -sigma)))
            };
            let mut delta = vec![0.0; d];
            for (p, &j) in free.iter().enumerate() {
                delta[j] = delta_s[p];
            }
            if let Some((j, dj)) = new_coord {
                delta[j] = dj;
            }
            let mut ad = vec![0.0; n];
            spec.op().apply(&delta, &mut ad);
            // the released row contributes its weight; nonbasic rows moving toward zero
            // are breakpoints where the slope jumps by twice their rate
            let mut slope = if is_data { c } else { 1.0 };
            let mut breaks: Vec<(f64, f64, bool, usize)> = Vec::new();
            let mut visit = |w: f64, val: f64, rate: f64, data: bool, id: usize| {
                if rate == 0.0 {
                    return;
                }
                if val == 0.0 || val * rate > 0.0 {
                    slope += w * rate.abs();
                } else {
                    slope -= w * rate.abs();
                    breaks.push((-val / rate, 2.0 * w * rate.abs(), data, id));
                }
            };
            for i in 0..n {
                if !basic_row[i] {
                    visit(c, e[i], -ad[i], true, i);
                }
            }
            for &j in &free {
                visit(1.0, -full[j], -delta[j], false, j);
            }
            if slope >= -1e-14 * (1.0 + c) {
                continue;
            }
            breaks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.3.cmp(&b.3)));
            let mut entering = None;
            for &(t, jump, data, id) in &breaks {
                slope += jump;
                if slope >= 0.0 {
                    entering = Some((t, data, id));
                    break;
                }
            }
            let (_, enter_data, enter_id) = entering?;
            // leaving row
            if is_data {
                zero_rows.retain(|&i| i != idx);
            } else {
                let pos = free.partition_point(|&x| x < idx);
                free.insert(pos, idx);
            }
            // entering row
            if enter_data {
                let pos = zero_rows.partition_point(|&x| x < enter_id);
                zero_rows.insert(pos, enter_id);
            } else {
                free.retain(|&j| j != enter_id);
            }
            moved = true;
            break;
        }
        if !moved {
            return Some(full);
        }
        if free.len() != zero_rows.len() {
            return None;
        }
    }
    None
}

/// Vertex through the `|S|` tightest constraints: `A_{T,S} b = r_T − λ σ_T`.
fn refine_dantzig(spec: &ProblemSpec, beta: &[f64]) -> Option<Vec<f64>> {
    let mut s = support(beta);
    if s.is_empty() {
        return None;
    }
    // tight rows come from the iterate's residual and stay fixed while S grows
    let res = residual(spec, beta);
    let lambda = spec.lambda();
    let near = (0..res.len())
        .filter(|&k| res[k].abs() >= lambda * (1.0 - NEAR_TIGHT))
        .count();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..MAX_ROUNDS {
        let Some(cand) = dantzig_vertex(spec, &s, &res) else { break };
        let Ok(cert) = certificate(spec, &cand) else { break };
        if cert.value <= EXACT_TOL {
            return Some(cand);
        }
        if best.as_ref().is_none_or(|b| cert.value < b.1) {
            best = Some((cand, cert.value));
        }
        // enter the strongest off-support score if it violates, or while more rows
        // are tight than there are free coefficients
        let entering = (0..spec.dim())
            .filter(|j| s.binary_search(j).is_err())
            .max_by(|&a, &b| cert.scores[a].abs().total_cmp(&cert.scores[b].abs()))
            .filter(|&j| cert.scores[j].abs() > 1.0 + ENTRY_SLACK || near > s.len());
        let Some(j) = entering else { break };
        if s.len() >= spec.alpha_len() {
            break;
        }
        s.insert(s.binary_search(&j).unwrap_err(), j);
    }
    best.map(|b| b.0)
}

/// Solves `A_{T,S} b = r_T − λ sign(res_T)` on the `|S|` rows where `|res|` is largest;
/// `None` when singular.
fn dantzig_vertex(spec: &ProblemSpec, s: &[usize], res: &[f64]) -> Option<Vec<f64>> {
    let tight = top_k_abs(res, s.len());
    let a_ts = submatrix(spec.op(), Some(&tight), s);
    let lambda = spec.lambda();
    let rhs: Vec<f64> = tight
        .iter()
        .map(|&k| spec.r()[k] - lambda * sign(res[k]))
        .collect();
    let b = solve_square(a_ts, &rhs)?;
    let mut out = vec![0.0; spec.dim()];
    for (k, &j) in s.iter().enumerate() {
        out[j] = b[k];
    }
    Some(out)
}
