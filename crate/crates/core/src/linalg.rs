//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Default relative threshold below which a singular value counts as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Left singular vectors and singular values of an `n × m` matrix, sorted
/// descending. `U` is always `n × n`; when `m < n` the missing singular values
/// are reported as zero.
pub fn left_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let n = m.nrows();
    let padded = if m.ncols() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (n, m.ncols())).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(true, false);
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut sorted_u = DMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (dst, &src) in order.iter().take(n).enumerate() {
        sorted_u.set_column(dst, &u.column(src));
        sigma.push(svd.singular_values[src]);
    }
    (sorted_u, sigma)
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `tol * σ_max`.
pub fn numerical_rank(sigma: &[f64], tol: f64) -> usize {
    let max = sigma.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > tol * max).count()
}

/// `σ_min / σ_max` over the first `count` singular values.
pub fn condition_ratio(sigma: &[f64], count: usize) -> f64 {
    let max = sigma.first().copied().unwrap_or(0.0);
    if max == 0.0 || count == 0 {
        return 0.0;
    }
    sigma.get(count - 1).copied().unwrap_or(0.0) / max
}

/// Orthonormal basis of the left null space at the given relative tolerance.
pub fn left_null_space(m: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    let (u, sigma) = left_svd(m);
    let rank = numerical_rank(&sigma, tol);
    (rank..m.nrows()).map(|j| canonical_sign(u.column(j).into_owned())).collect()
}

/// Flips the sign so the entry of largest magnitude is positive.
pub fn canonical_sign(v: DVector<f64>) -> DVector<f64> {
    let pivot = v.iter().copied().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if pivot < 0.0 {
        -v
    } else {
        v
    }
}

/// Angle between the lines spanned by `a` and `b`.
pub fn line_angle(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let c = (a.dot(b) / (a.norm() * b.norm())).abs().min(1.0);
    // acos is ill-conditioned near 1; recover the angle from the sine instead
    let s = (a - b * (a.dot(b) / b.norm_squared())).norm() / a.norm();
    s.atan2(c)
}
