//! Economy SVD via one-sided Jacobi rotations.
//!
//! The factorization works on the tall orientation of the input (the wide
//! case is handled by factoring the transpose and swapping the roles of U
//! and V). Column pairs are rotated until every pair is numerically
//! orthogonal; singular values are the column norms of the rotated matrix.
//! One-sided Jacobi is simple and delivers high relative accuracy, which is
//! what the merge-and-compare workflows need at desk scale.

use crate::{LinalgError, Matrix};

const DEFAULT_MAX_SWEEPS: usize = 60;
const ORTHO_TOL: f64 = 1e-15;

/// Economy factorization `A = U * diag(sigma) * V^T` with `k = min(m, n)`.
///
/// `sigma` is nonincreasing, `U` is `m x k`, `V` is `n x k`. Columns follow a
/// deterministic sign convention: the entry of largest magnitude in each
/// column of `U` is nonnegative (first index wins ties), with `V` signed to
/// match.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl SvdFactors {
    pub fn rank_k(&self) -> usize {
        self.sigma.len()
    }

    /// `U * diag(sigma) * V^T`.
    pub fn reconstruct(&self) -> Matrix {
        let us = self.u.scale_cols(&self.sigma).expect("factor shapes chain");
        us.matmul(&self.v.transpose()).expect("factor shapes chain")
    }
}

pub fn svd(a: &Matrix) -> Result<SvdFactors, LinalgError> {
    svd_with_max_sweeps(a, DEFAULT_MAX_SWEEPS)
}

pub fn svd_with_max_sweeps(a: &Matrix, max_sweeps: usize) -> Result<SvdFactors, LinalgError> {
    if a.rows() >= a.cols() {
        let (u, sigma, v) = jacobi_tall(a, max_sweeps)?;
        Ok(apply_sign_convention(u, sigma, v))
    } else {
        // Wide input: factor the transpose, swap U and V.
        let (u, sigma, v) = jacobi_tall(&a.transpose(), max_sweeps)?;
        Ok(apply_sign_convention(v, sigma, u))
    }
}

/// Keep the leading `r` singular triplets.
pub fn truncate(f: &SvdFactors, r: usize) -> Result<SvdFactors, LinalgError> {
    let k = f.rank_k();
    if r < 1 || r > k {
        return Err(LinalgError::RankOutOfRange { rank: r, max: k });
    }
    Ok(SvdFactors {
        u: f.u.col_head(r),
        sigma: f.sigma[..r].to_vec(),
        v: f.v.col_head(r),
    })
}

/// One-sided Jacobi on a tall (or square) matrix. Returns unsorted-unsigned
/// factors sorted descending by singular value.
fn jacobi_tall(a: &Matrix, max_sweeps: usize) -> Result<(Matrix, Vec<f64>, Matrix), LinalgError> {
    let m = a.rows();
    let n = a.cols();
    debug_assert!(m >= n);

    // Work on columns: w[j] is the j-th column of the rotated matrix.
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = column_moments(&w[p], &w[q]);
                if gamma.abs() <= ORTHO_TOL * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut w, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
        sweeps += 1;
        if sweeps > max_sweeps {
            return Err(LinalgError::NoConvergence { sweeps });
        }
    }

    let mut sigma: Vec<f64> = w.iter().map(|col| norm(col)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap());
    let w: Vec<Vec<f64>> = order.iter().map(|&j| w[j].clone()).collect();
    let v: Vec<Vec<f64>> = order.iter().map(|&j| v[j].clone()).collect();
    sigma = order.iter().map(|&j| sigma[j]).collect();

    // Normalize U columns; numerically zero columns get an orthonormal
    // completion so U stays orthogonal for rank-deficient inputs.
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let rank_tol = sigma_max * (m.max(n) as f64) * f64::EPSILON;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (j, col) in w.iter().enumerate() {
        if sigma[j] > rank_tol && sigma[j] > 0.0 {
            u_cols.push(col.iter().map(|x| x / sigma[j]).collect());
        } else {
            u_cols.push(complete_orthonormal(&u_cols, m));
        }
    }

    let u = Matrix::from_fn(m, n, |i, j| u_cols[j][i]);
    let v = Matrix::from_fn(n, n, |i, j| v[j][i]);
    Ok((u, sigma, v))
}

fn column_moments(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut gamma = 0.0;
    for (a, b) in x.iter().zip(y) {
        alpha += a * a;
        beta += b * b;
        gamma += a * b;
    }
    (alpha, beta, gamma)
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let cp = &mut head[p];
    let cq = &mut tail[0];
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *a;
        let xq = *b;
        *a = c * xp - s * xq;
        *b = s * xp + c * xq;
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Deterministic Gram-Schmidt completion: orthogonalize the unit basis
/// vectors against `existing` and return the one with the largest residual.
fn complete_orthonormal(existing: &[Vec<f64>], m: usize) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for e in 0..m {
        let mut cand = vec![0.0; m];
        cand[e] = 1.0;
        // Two rounds of classical Gram-Schmidt for stability.
        for _ in 0..2 {
            for col in existing {
                let proj: f64 = cand.iter().zip(col).map(|(a, b)| a * b).sum();
                for (c, v) in cand.iter_mut().zip(col) {
                    *c -= proj * v;
                }
            }
        }
        let r = norm(&cand);
        if best.as_ref().map_or(true, |(b, _)| r > *b) {
            best = Some((r, cand));
        }
        if r > 0.9 {
            break; // good enough; keeps completion O(existing) in the common case
        }
    }
    let (r, mut cand) = best.expect("basis candidates exhausted");
    assert!(r > 0.0, "cannot complete orthonormal basis");
    for c in cand.iter_mut() {
        *c /= r;
    }
    cand
}

fn apply_sign_convention(mut u: Matrix, sigma: Vec<f64>, mut v: Matrix) -> SvdFactors {
    for j in 0..sigma.len() {
        let mut pivot = 0;
        let mut best = -1.0;
        for i in 0..u.rows() {
            let mag = u[(i, j)].abs();
            if mag > best {
                best = mag;
                pivot = i;
            }
        }
        if u[(pivot, j)] < 0.0 {
            for i in 0..u.rows() {
                u[(i, j)] = -u[(i, j)];
            }
            for i in 0..v.rows() {
                v[(i, j)] = -v[(i, j)];
            }
        }
    }
    SvdFactors { u, sigma, v }
}
