//! Proximal operators of the losses: `argmin_α ½‖v − α‖² + κ‖α‖_q`, and the
//! projection onto the ℓ∞ ball used by the Dantzig selector.

use crate::error::{Error, Result};
use crate::linalg::{norm2, norm_q};

/// Bracketing tolerance of the outer search on `s = ‖α‖_q`, relative to `1 + ‖v‖_q`.
pub const OUTER_TOL: f64 = 1e-10;
/// Bracketing tolerance of the per-coordinate scalar solves, relative to `max(1, |v_i|)`.
pub const INNER_TOL: f64 = 1e-12;
/// Iteration cap of both levels of the nested search.
pub const MAX_BISECTION_ITER: usize = 200;

/// Loss whose proximal map is taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProxKind {
    /// `κ‖α‖_q`
    Lq { q: f64, kappa: f64 },
    /// Indicator of `‖α‖_∞ ≤ bound`.
    Box { bound: f64 },
}

/// A proximal sub-problem: the point `v` and the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxRequest {
    pub v: Vec<f64>,
    pub kind: ProxKind,
}

impl ProxRequest {
    pub fn solve(&self) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.v.len()];
        prox_into(&self.v, self.kind, &mut out)?;
        Ok(out)
    }
}

/// Evaluates `kind` at `v`, writing into `out`.
pub fn prox_into(v: &[f64], kind: ProxKind, out: &mut [f64]) -> Result<()> {
    match kind {
        ProxKind::Lq { q, kappa } => lq_prox_into(v, kappa, q, out),
        ProxKind::Box { bound } => {
            winsorize_into(v, bound, out);
            Ok(())
        }
    }
}

/// Elementwise `sign(v_i) · max(|v_i| − κ, 0)`.
pub fn soft_threshold(v: &[f64], kappa: f64) -> Vec<f64> {
    v.iter().map(|&x| soft_threshold_scalar(x, kappa)).collect()
}

#[inline]
pub fn soft_threshold_scalar(x: f64, kappa: f64) -> f64 {
    if x > kappa {
        x - kappa
    } else if x < -kappa {
        x + kappa
    } else {
        0.0
    }
}

/// Radial shrinkage: `0` when `‖v‖₂ ≤ κ`, else `(1 − κ/‖v‖₂) v`.
pub fn group_soft_threshold(v: &[f64], kappa: f64) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    group_soft_threshold_into(v, kappa, &mut out);
    out
}

fn group_soft_threshold_into(v: &[f64], kappa: f64, out: &mut [f64]) {
    let nv = norm2(v);
    if nv <= kappa {
        out.iter_mut().for_each(|o| *o = 0.0);
    } else {
        let f = 1.0 - kappa / nv;
        for (o, x) in out.iter_mut().zip(v) {
            *o = f * x;
        }
    }
}

/// Clamps every entry to `[−bound, bound]`.
pub fn winsorize(v: &[f64], bound: f64) -> Vec<f64> {
    v.iter().map(|x| x.clamp(-bound, bound)).collect()
}

fn winsorize_into(v: &[f64], bound: f64, out: &mut [f64]) {
    for (o, x) in out.iter_mut().zip(v) {
        *o = x.clamp(-bound, bound);
    }
}

/// `argmin_α ½‖v − α‖² + κ‖α‖_q` for `q ∈ [1, 2]`.
pub fn lq_prox(v: &[f64], kappa: f64, q: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; v.len()];
    lq_prox_into(v, kappa, q, &mut out)?;
    Ok(out)
}

/// Objective `½‖v − α‖² + κ‖α‖_q`.
pub fn prox_objective(v: &[f64], alpha: &[f64], kappa: f64, q: f64) -> f64 {
    let fit: f64 = v
        .iter()
        .zip(alpha)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    0.5 * fit + kappa * norm_q(alpha, q)
}

fn lq_prox_into(v: &[f64], kappa: f64, q: f64, out: &mut [f64]) -> Result<()> {
    if !(1.0..=2.0).contains(&q) {
        return Err(Error::InvalidQ(q));
    }
    if !(kappa >= 0.0) || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("prox input"));
    }
    if kappa == 0.0 {
        out.copy_from_slice(v);
        return Ok(());
    }
    if q == 1.0 {
        for (o, &x) in out.iter_mut().zip(v) {
            *o = soft_threshold_scalar(x, kappa);
        }
        return Ok(());
    }
    if q == 2.0 {
        group_soft_threshold_into(v, kappa, out);
        return Ok(());
    }
    general_lq_prox(v, kappa, q, out)
}

/// Nested search for `1 < q < 2`.
///
/// Stationarity reads `α_i + κ s^{1−q} sign(α_i)|α_i|^{q−1} = v_i` with `s = ‖α‖_q`.
/// For a fixed `s` each coordinate is a strictly increasing scalar equation in
/// `|α_i| ∈ [0, |v_i|]`; the outer search finds the `s` with `‖α(s)‖_q = s`. Both
/// levels keep a bisection bracket and take Newton steps only when they stay inside it.
fn general_lq_prox(v: &[f64], kappa: f64, q: f64, out: &mut [f64]) -> Result<()> {
    // α = 0 is optimal iff the dual norm of v is at most κ
    let dual = q / (q - 1.0);
    if norm_q(v, dual) <= kappa {
        out.iter_mut().for_each(|o| *o = 0.0);
        return Ok(());
    }
    let vq = norm_q(v, q);
    let tol = OUTER_TOL * (1.0 + vq);

    // φ(s) = ‖α(s)‖_q − s is positive near 0 and negative at ‖v‖_q
    let mut lo = 0.0;
    let mut hi = vq;
    let mut s = 0.5 * vq;
    let phi_and_slope = |s: f64, out: &mut [f64]| -> Result<(f64, f64)> {
        let c = kappa * s.powf(1.0 - q);
        let dc = kappa * (1.0 - q) * s.powf(-q);
        for (o, &x) in out.iter_mut().zip(v) {
            *o = scalar_root(x.abs(), c, q)?;
        }
        let n = norm_q(out, q);
        if n == 0.0 {
            return Ok((-s, -1.0));
        }
        let mut dn = 0.0;
        for &a in out.iter() {
            if a > 0.0 {
                let a_q1 = pow_q_minus_1(a, q);
                let da = -dc * a_q1 / (1.0 + c * (q - 1.0) * a_q1 / a);
                dn += pow_q_minus_1(a / n, q) * da;
            }
        }
        Ok((n - s, dn - 1.0))
    };

    let mut converged = false;
    for _ in 0..MAX_BISECTION_ITER {
        let (phi, slope) = phi_and_slope(s, out)?;
        if phi == 0.0 {
            converged = true;
            break;
        }
        if phi > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        if hi - lo <= tol {
            converged = true;
            break;
        }
        let newton = s - phi / slope;
        let next = if slope < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - s).abs() <= 0.25 * tol {
            s = next;
            converged = true;
            break;
        }
        s = next;
    }
    if !converged {
        return Err(Error::ToleranceNotReached(MAX_BISECTION_ITER));
    }
    let (_, _) = phi_and_slope(s, out)?;
    for (o, &x) in out.iter_mut().zip(v) {
        if x < 0.0 {
            *o = -*o;
        }
    }
    // the degenerate end of the bracket: compare with α = 0 directly
    let zero = vec![0.0; v.len()];
    if prox_objective(v, &zero, kappa, q) < prox_objective(v, out, kappa, q) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
    Ok(())
}

#[inline]
fn pow_q_minus_1(a: f64, q: f64) -> f64 {
    if q == 1.5 {
        a.sqrt()
    } else {
        a.powf(q - 1.0)
    }
}

/// Solves `a + c·a^{q−1} = target` for `a ∈ [0, target]`.
fn scalar_root(target: f64, c: f64, q: f64) -> Result<f64> {
    if target == 0.0 {
        return Ok(0.0);
    }
    if !c.is_finite() {
        return Ok(0.0);
    }
    if q == 1.5 {
        // quadratic in √a: (√a)² + c√a − target = 0, stable root form
        let root = 2.0 * target / (c + (c * c + 4.0 * target).sqrt());
        return Ok(root * root);
    }
    let tol = INNER_TOL * target.max(1.0);
    let g = |a: f64| a + c * a.powf(q - 1.0) - target;
    let mut lo = 0.0;
    let mut hi = target;
    // both terms bound the root from above; start at the tighter bound
    let mut a = target.min((target / c).powf(1.0 / (q - 1.0)));
    if !(a > 0.0) {
        a = 0.5 * target;
    }
    for _ in 0..MAX_BISECTION_ITER {
        let ga = g(a);
        if ga == 0.0 {
            return Ok(a);
        }
        if ga < 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        if hi - lo <= tol {
            return Ok(0.5 * (lo + hi));
        }
        let slope = 1.0 + c * (q - 1.0) * a.powf(q - 2.0);
        let newton = a - ga / slope;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - a).abs() <= 0.25 * tol {
            return Ok(next);
        }
        a = next;
    }
    Err(Error::ToleranceNotReached(MAX_BISECTION_ITER))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&[2.0], 0.5), vec![1.5]);
        assert_eq!(soft_threshold(&[-0.3], 0.5), vec![0.0]);
        assert_eq!(soft_threshold(&[-0.3, 4.0], 0.0), vec![-0.3, 4.0]);
    }

    #[test]
    fn group_soft_threshold_examples() {
        assert_eq!(group_soft_threshold(&[3.0, 4.0], 5.0), vec![0.0, 0.0]);
        let g = group_soft_threshold(&[3.0, 4.0], 2.5);
        assert_abs_diff_eq!(g[0], 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 2.0, epsilon = 1e-15);
        assert_eq!(group_soft_threshold(&[0.0, 0.0], 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn winsorize_examples() {
        assert_eq!(winsorize(&[2.0, -0.5, 0.1], 1.0), vec![1.0, -0.5, 0.1]);
        assert_eq!(winsorize(&[0.3, -0.2], 1.0), vec![0.3, -0.2]);
        assert_eq!(winsorize(&[-3.0], 1.0), vec![-1.0]);
    }

    #[test]
    fn lq_prox_delegates_at_endpoints() {
        assert_eq!(lq_prox(&[3.0, 4.0], 2.5, 2.0).unwrap(), group_soft_threshold(&[3.0, 4.0], 2.5));
        assert_eq!(lq_prox(&[2.0], 0.5, 1.0).unwrap(), vec![1.5]);
        assert!(lq_prox(&[1.0], 0.5, 2.5).is_err());
    }

    /// Golden-section minimization of `½·2(1−t)² + κ·2^{1/q}·t` over `t ∈ [0, 1]`,
    /// the objective restricted to the symmetric ray `α = (t, t)` for `v = (1, 1)`.
    fn symmetric_oracle(kappa: f64, q: f64) -> f64 {
        let f = |t: f64| (1.0 - t) * (1.0 - t) + kappa * 2f64.powf(1.0 / q) * t;
        let (mut a, mut b) = (0.0f64, 1.0f64);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        while b - a > 1e-10 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn lq_prox_matches_symmetric_oracle() {
        let t = symmetric_oracle(0.5, 1.5);
        let out = lq_prox(&[1.0, 1.0], 0.5, 1.5).unwrap();
        // golden section on a flat minimum resolves t to about sqrt(machine eps)
        assert_abs_diff_eq!(out[0], t, epsilon = 5e-8);
        assert_abs_diff_eq!(out[1], out[0], epsilon = 1e-14);
        // stationarity along the ray: t = 1 − κ 2^{1/q} / 2
        assert_abs_diff_eq!(out[0], 1.0 - 0.5 * 2f64.powf(1.0 / 1.5) / 2.0, epsilon = 1e-10);
    }

    #[test]
    fn lq_prox_zero_region() {
        // dual norm of v below κ gives exactly zero
        let v = [0.1, -0.2, 0.05];
        let out = lq_prox(&v, 1.0, 1.5).unwrap();
        assert!(out.iter().all(|&x| x == 0.0));
    }

    fn random_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0f64..5.0, len)
    }

    proptest! {
        #[test]
        fn prox_output_is_locally_optimal(
            v in random_vec(4),
            kappa in 0.0f64..4.0,
            qi in 0usize..5,
            dirs in prop::collection::vec(random_vec(4), 100),
        ) {
            let q = [1.0, 1.25, 1.5, 1.75, 2.0][qi];
            let out = lq_prox(&v, kappa, q).unwrap();
            let base = prox_objective(&v, &out, kappa, q);
            for d in &dirs {
                let nd = norm2(d).max(1e-300);
                let pert: Vec<f64> = out.iter().zip(d).map(|(o, x)| o + 1e-3 * x / nd).collect();
                prop_assert!(base <= prox_objective(&v, &pert, kappa, q) + 1e-9);
            }
        }

        #[test]
        fn prox_is_nonexpansive(
            v1 in random_vec(5),
            v2 in random_vec(5),
            kappa in 0.0f64..3.0,
            qi in 0usize..5,
        ) {
            let q = [1.0, 1.25, 1.5, 1.75, 2.0][qi];
            let p1 = lq_prox(&v1, kappa, q).unwrap();
            let p2 = lq_prox(&v2, kappa, q).unwrap();
            let dp: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a - b).collect();
            let dv: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a - b).collect();
            prop_assert!(norm2(&dp) <= norm2(&dv) + 1e-9);
            let w1 = winsorize(&v1, kappa + 0.1);
            let w2 = winsorize(&v2, kappa + 0.1);
            let dw: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a - b).collect();
            prop_assert!(norm2(&dw) <= norm2(&dv) + 1e-12);
        }

        #[test]
        fn prox_shrinks_with_signs(v in random_vec(5), kappa in 0.0f64..3.0, q in 1.0f64..=2.0) {
            let out = lq_prox(&v, kappa, q).unwrap();
            for (o, x) in out.iter().zip(&v) {
                prop_assert!(o.abs() <= x.abs() + 1e-15);
                prop_assert!(*o == 0.0 || o.signum() == x.signum());
            }
        }

        #[test]
        fn near_one_agrees_with_soft_threshold(v in random_vec(5), kappa in 0.0f64..0.1) {
            let a = lq_prox(&v, kappa, 1.001).unwrap();
            let b = soft_threshold(&v, kappa);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-3, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn large_kappa_is_exactly_zero() {
        let v = [1.0, -2.0, 0.5];
        assert!(lq_prox(&v, 10.0, 1.0).unwrap().iter().all(|&x| x == 0.0));
        assert!(lq_prox(&v, 10.0, 2.0).unwrap().iter().all(|&x| x == 0.0));
        assert!(lq_prox(&v, 10.0, 1.5).unwrap().iter().all(|&x| x == 0.0));
    }
}
