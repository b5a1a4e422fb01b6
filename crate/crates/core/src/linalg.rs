//! Small dense kernels shared by the solvers.

use nalgebra::{DMatrix, DVector};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four accumulators so the loop vectorizes
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn norm_q(v: &[f64], q: f64) -> f64 {
    if q == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else if q == 2.0 {
        norm2(v)
    } else {
        let m = norm_inf(v);
        if m == 0.0 {
            return 0.0;
        }
        // scaled to avoid overflow in |x|^q
        let sum: f64 = if q == 1.5 {
            v.iter()
                .map(|x| {
                    let t = x.abs() / m;
                    t * t.sqrt()
                })
                .sum()
        } else {
            v.iter().map(|x| (x.abs() / m).powf(q)).sum()
        };
        m * sum.powf(1.0 / q)
    }
}

/// Contiguous view of column `j` of a column-major matrix.
#[inline]
pub fn col(m: &DMatrix<f64>, j: usize) -> &[f64] {
    let n = m.nrows();
    &m.as_slice()[j * n..(j + 1) * n]
}

/// Solves the square system `a x = b`, returning `None` when `a` is numerically singular.
pub fn solve_square(a: DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    if a.nrows() == 0 {
        return Some(Vec::new());
    }
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    let lu = a.full_piv_lu();
    let u_diag_min = (0..lu.u().nrows())
        .map(|i| lu.u()[(i, i)].abs())
        .fold(f64::INFINITY, f64::min);
    if !(u_diag_min > 1e-13 * scale) {
        return None;
    }
    let x = lu.solve(&DVector::from_column_slice(b))?;
    if x.iter().all(|v| v.is_finite()) {
        Some(x.as_slice().to_vec())
    } else {
        None
    }
}

/// Minimum-norm least-squares solution of `a x ≈ b`.
pub fn least_squares(a: DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let ncols = a.ncols();
    if ncols == 0 {
        return Vec::new();
    }
    if a.nrows() == 0 {
        return vec![0.0; ncols];
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, x| m.max(*x));
    let eps = smax * 1e-12 * (svd.singular_values.len() as f64);
    match svd.solve(&DVector::from_column_slice(b), eps) {
        Ok(x) => x.as_slice().to_vec(),
        Err(_) => vec![0.0; ncols],
    }
}

/// Sign with `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
