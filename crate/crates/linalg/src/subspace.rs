//! Orthogonality and subspace-distance metrics.

use crate::Matrix;

/// Largest absolute entry of `M^T M - I`. Zero for orthonormal columns.
pub fn orthogonality_error(m: &Matrix) -> f64 {
    let g = m.transpose().matmul(m).expect("gram product");
    let mut worst: f64 = 0.0;
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Spectral norm by power iteration on `M^T M`.
///
/// Deterministic start vector; enough iterations that the workflows' residual
/// matrices (tiny or well-separated spectra) converge far below the
/// tolerances they are compared against.
pub fn spectral_norm(m: &Matrix) -> f64 {
    let n = m.cols();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..300 {
        // w = M^T (M v)
        let mut mv = vec![0.0; m.rows()];
        for i in 0..m.rows() {
            let row = m.row(i);
            mv[i] = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let mut w = vec![0.0; n];
        for i in 0..m.rows() {
            let row = m.row(i);
            for (wj, r) in w.iter_mut().zip(row) {
                *wj += r * mv[i];
            }
        }
        let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nw == 0.0 {
            return 0.0;
        }
        lambda = nw;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
    }
    lambda.sqrt()
}

/// Largest principal angle (radians) between the column spaces of two
/// matrices with orthonormal columns.
///
/// Computed through the sine, `sin(theta_max) = || U2 - U1 (U1^T U2) ||_2`,
/// which keeps precision for angles near zero where the cosine route
/// saturates.
pub fn max_principal_angle(u1: &Matrix, u2: &Matrix) -> f64 {
    let cross = u1.transpose().matmul(u2).expect("subspace dims");
    let proj = u1.matmul(&cross).expect("subspace dims");
    let resid = u2.sub(&proj).expect("subspace dims");
    spectral_norm(&resid).clamp(-1.0, 1.0).asin()
}
