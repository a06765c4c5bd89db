//! Dense column-major helpers on raw slices for the sampler's inner loop.
//! All matrices are `d x d` with element `(i, j)` at `j * d + i`; only the
//! lower triangle of a Cholesky factor is meaningful.

/// In-place lower Cholesky factorization. Returns `false` if the matrix is
/// not numerically positive definite.
pub fn cholesky_in_place(a: &mut [f64], d: usize) -> bool {
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= a[k * d + j] * a[k * d + j];
        }
        if !(diag > 0.0) {
            return false;
        }
        let ljj = diag.sqrt();
        a[j * d + j] = ljj;
        for i in j + 1..d {
            let mut s = a[j * d + i];
            for k in 0..j {
                s -= a[k * d + i] * a[k * d + j];
            }
            a[j * d + i] = s / ljj;
        }
        for i in 0..j {
            a[j * d + i] = 0.0;
        }
    }
    true
}

/// Updates `L` so that `L L^T` becomes `L L^T + sign * x x^T`. `x` is used
/// as scratch. Returns `false` if a downdate loses positive definiteness,
/// in which case `L` is left in an unspecified state.
pub fn rank_one_update(l: &mut [f64], d: usize, x: &mut [f64], sign: f64) -> bool {
    for k in 0..d {
        let lkk = l[k * d + k];
        let r2 = lkk * lkk + sign * x[k] * x[k];
        if !(r2 > 0.0) {
            return false;
        }
        let r = r2.sqrt();
        let c = r / lkk;
        let s = x[k] / lkk;
        l[k * d + k] = r;
        let col = &mut l[k * d + k + 1..k * d + d];
        for (lik, xi) in col.iter_mut().zip(&mut x[k + 1..d]) {
            *lik = (*lik + sign * s * *xi) / c;
            *xi = c * *xi - s * *lik;
        }
    }
    true
}

/// Squared norm of `L^{-1} b`; `b` is overwritten.
pub fn forward_solve_sq_norm(l: &[f64], d: usize, b: &mut [f64]) -> f64 {
    let mut acc = 0.0;
    for j in 0..d {
        let z = b[j] / l[j * d + j];
        acc += z * z;
        if z != 0.0 {
            let col = &l[j * d + j + 1..j * d + d];
            for (bi, lij) in b[j + 1..d].iter_mut().zip(col) {
                *bi -= lij * z;
            }
        }
    }
    acc
}

/// `ln |L L^T|`.
pub fn chol_log_det(l: &[f64], d: usize) -> f64 {
    2.0 * (0..d).map(|i| l[i * d + i].ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spd(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(d, d) * 0.5
    }

    fn reconstruct(l: &[f64], d: usize) -> DMatrix<f64> {
        let m = DMatrix::from_column_slice(d, d, l).lower_triangle();
        &m * m.transpose()
    }

    #[test]
    fn factor_matches_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 1..8 {
            let a = spd(d, &mut rng);
            let mut l = a.as_slice().to_vec();
            assert!(cholesky_in_place(&mut l, d));
            assert!((reconstruct(&l, d) - &a).amax() < 1e-12);
            let want = a.clone().cholesky().unwrap().determinant().ln();
            assert!((chol_log_det(&l, d) - want).abs() < 1e-10);
        }
    }

    #[test]
    fn update_then_downdate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = 6;
        let a = spd(d, &mut rng);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut l = a.as_slice().to_vec();
        cholesky_in_place(&mut l, d);
        assert!(rank_one_update(&mut l, d, &mut x.clone(), 1.0));
        let xv = nalgebra::DVector::from_column_slice(&x);
        assert!((reconstruct(&l, d) - (&a + &xv * xv.transpose())).amax() < 1e-10);
        assert!(rank_one_update(&mut l, d, &mut x.clone(), -1.0));
        assert!((reconstruct(&l, d) - &a).amax() < 1e-10);
    }

    #[test]
    fn downdate_to_indefinite_fails() {
        let mut l = vec![1.0, 0.0, 0.0, 1.0];
        assert!(!rank_one_update(&mut l, 2, &mut vec![2.0, 0.0], -1.0));
        let mut bad = vec![1.0, 2.0, 2.0, 1.0];
        assert!(!cholesky_in_place(&mut bad, 2));
    }

    #[test]
    fn solve_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 5;
        let a = spd(d, &mut rng);
        let b: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut l = a.as_slice().to_vec();
        cholesky_in_place(&mut l, d);
        let bv = nalgebra::DVector::from_column_slice(&b);
        let want = (bv.transpose() * a.try_inverse().unwrap() * &bv)[0];
        let got = forward_solve_sq_norm(&l, d, &mut b.clone());
        assert!((got - want).abs() < 1e-10);
    }
}
