//! SVD correctness against an independent oracle plus randomized invariants.
//!
//! The oracle computes singular values as square roots of the eigenvalues of
//! the Gram matrix `A^T A`, found with a classic two-sided Jacobi
//! eigensolver. That route shares no code with the one-sided column-rotation
//! implementation under test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simorch_linalg::{max_principal_angle, orthogonality_error, svd, truncate, Matrix};

/// Eigenvalues of a symmetric matrix by cyclic two-sided Jacobi, descending.
fn symmetric_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut m = a.clone();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[(p, q)].abs());
            }
        }
        let scale: f64 = (0..n).map(|i| m[(i, i)].abs()).fold(1e-300, f64::max);
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // Rotate rows p,q then columns p,q.
                for j in 0..n {
                    let mpj = m[(p, j)];
                    let mqj = m[(q, j)];
                    m[(p, j)] = c * mpj - s * mqj;
                    m[(q, j)] = s * mpj + c * mqj;
                }
                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = c * mip - s * miq;
                    m[(i, q)] = s * mip + c * miq;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eig
}

fn oracle_singular_values(a: &Matrix) -> Vec<f64> {
    let gram = a.transpose().matmul(a).expect("gram");
    symmetric_eigenvalues(&gram)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect()
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

#[test]
fn sigma_matches_gram_eigen_oracle_50x8() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let a = random_matrix(&mut rng, 50, 8);
    let f = svd(&a).unwrap();
    let oracle = oracle_singular_values(&a);
    assert_eq!(f.sigma.len(), 8);
    for (s, o) in f.sigma.iter().zip(&oracle) {
        assert!(
            (s - o).abs() <= 1e-12 * oracle[0],
            "sigma {s} vs oracle {o}"
        );
    }
}

#[test]
fn factors_satisfy_invariants_on_random_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let shapes = [
        (1, 1),
        (5, 5),
        (40, 12),
        (12, 40),
        (120, 30),
        (200, 50),
        (33, 67),
    ];
    for &(m, n) in &shapes {
        let a = random_matrix(&mut rng, m, n);
        let f = svd(&a).unwrap();
        let k = m.min(n);
        assert_eq!(f.u.rows(), m);
        assert_eq!(f.u.cols(), k);
        assert_eq!(f.v.rows(), n);
        assert_eq!(f.v.cols(), k);
        assert!(orthogonality_error(&f.u) < 1e-10, "U orthogonality {m}x{n}");
        assert!(orthogonality_error(&f.v) < 1e-10, "V orthogonality {m}x{n}");
        for w in f.sigma.windows(2) {
            assert!(w[0] >= w[1], "sigma not sorted");
        }
        let err = f.reconstruct().sub(&a).unwrap().frobenius_norm();
        assert!(
            err <= 1e-10 * a.frobenius_norm().max(1e-300),
            "reconstruction {m}x{n}: rel err {}",
            err / a.frobenius_norm()
        );
    }
}

#[test]
fn transpose_swaps_u_and_v_up_to_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = random_matrix(&mut rng, 24, 9);
    let f = svd(&a).unwrap();
    let ft = svd(&a.transpose()).unwrap();
    for (s, t) in f.sigma.iter().zip(&ft.sigma) {
        assert!((s - t).abs() <= 1e-12 * f.sigma[0]);
    }
    // Column spaces must agree even where the sign anchors differ.
    assert!(max_principal_angle(&f.u, &ft.v) < 1e-8);
    assert!(max_principal_angle(&f.v, &ft.u) < 1e-8);
}

#[test]
fn positive_scaling_scales_sigma() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let a = random_matrix(&mut rng, 30, 10);
    let c = 3.7;
    let scaled = Matrix::from_fn(30, 10, |i, j| c * a[(i, j)]);
    let f = svd(&a).unwrap();
    let g = svd(&scaled).unwrap();
    for (s, t) in f.sigma.iter().zip(&g.sigma) {
        assert!((c * s - t).abs() <= 1e-12 * c * f.sigma[0]);
    }
}

#[test]
fn truncation_error_follows_tail_energy() {
    // Eckart-Young: the rank-r residual energy is the sum of the squared
    // trailing singular values.
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let a = random_matrix(&mut rng, 64, 16);
    let f = svd(&a).unwrap();
    for r in [1, 4, 9, 16] {
        let t = truncate(&f, r).unwrap();
        let err2 = t
            .reconstruct()
            .sub(&a)
            .unwrap()
            .frobenius_norm()
            .powi(2);
        let tail: f64 = f.sigma[r..].iter().map(|s| s * s).sum();
        let denom = f.sigma.iter().map(|s| s * s).sum::<f64>();
        assert!(
            (err2 - tail).abs() <= 1e-8 * denom,
            "rank {r}: err2 {err2} vs tail {tail}"
        );
    }
}

#[test]
fn exact_low_rank_input_has_tiny_tail() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    // Build a 100x20 matrix of exact rank 4.
    let left = random_matrix(&mut rng, 100, 4);
    let right = random_matrix(&mut rng, 4, 20);
    let a = left.matmul(&right).unwrap();
    let f = svd(&a).unwrap();
    assert!(f.sigma[4] <= 1e-12 * f.sigma[0]);
    assert!(orthogonality_error(&f.u) < 1e-10);
}
