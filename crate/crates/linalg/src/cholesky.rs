use crate::{LinalgError, Matrix};

/// Jitter escalation schedule: a clean attempt first, then the base jitter
/// scaled by successive powers of ten.
const JITTER_MULTIPLIERS: [f64; 5] = [0.0, 1.0, 10.0, 100.0, 1000.0];
const BASE_JITTER: f64 = 1e-10;

/// Solve `A X = B` for symmetric positive definite `A` via Cholesky.
///
/// If factorization hits a non-positive pivot, a diagonal jitter of
/// `1e-10 * trace(A)/n` is added and escalated tenfold a few times before
/// giving up with `NotSpd`.
pub fn cholesky_solve(a: &Matrix, b: &Matrix) -> Result<Matrix, LinalgError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "cholesky needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if b.rows() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "rhs has {} rows, expected {n}",
            b.rows()
        )));
    }

    let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
    let base = BASE_JITTER * trace / n as f64;

    let mut factor = None;
    for mult in JITTER_MULTIPLIERS {
        if let Some(l) = try_factor(a, base * mult) {
            factor = Some(l);
            break;
        }
    }
    let l = factor.ok_or(LinalgError::NotSpd)?;

    // Forward then backward substitution, one RHS column at a time.
    let mut x = b.clone();
    let ncols = b.cols();
    for c in 0..ncols {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(x)
}

/// Lower-triangular Cholesky factor of `A + jitter*I`, or `None` on a
/// non-positive pivot. Only the lower triangle of `A` is read.
pub fn cholesky_factor(a: &Matrix, jitter: f64) -> Option<Matrix> {
    try_factor(a, jitter)
}

fn try_factor(a: &Matrix, jitter: f64) -> Option<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            if i == j {
                s += jitter;
            }
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[(i, j)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let b = Matrix::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let x = cholesky_solve(&Matrix::identity(3), &b).unwrap();
        let err = x.sub(&b).unwrap().frobenius_norm();
        assert!(err <= 1e-10 * b.frobenius_norm());
    }

    #[test]
    fn scalar_diagonal() {
        let a = Matrix::new(1, 1, vec![4.0]).unwrap();
        let b = Matrix::new(1, 1, vec![2.0]).unwrap();
        let x = cholesky_solve(&a, &b).unwrap();
        assert!((x[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let a = Matrix::new(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        let b = Matrix::new(2, 1, vec![1.0, 1.0]).unwrap();
        assert_eq!(cholesky_solve(&a, &b), Err(LinalgError::NotSpd));
    }

    #[test]
    fn random_spd_residual_is_small() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 20;
        let g = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        // G^T G + I is SPD with eigenvalues >= 1.
        let mut a = g.transpose().matmul(&g).unwrap();
        for i in 0..n {
            a[(i, i)] += 1.0;
        }
        let b = Matrix::from_fn(n, 3, |_, _| rng.gen_range(-1.0..1.0));
        let x = cholesky_solve(&a, &b).unwrap();
        let resid = a.matmul(&x).unwrap().sub(&b).unwrap().frobenius_norm();
        assert!(resid <= 1e-10 * b.frobenius_norm());
    }
}
