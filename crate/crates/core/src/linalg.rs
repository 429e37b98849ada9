//! Small dense complex linear algebra helpers.
//!
//! The beamformer update solves one Hermitian positive-definite system per UE
//! whose size is the number of serving antennas (cluster size times antennas
//! per AP), so a plain LU with partial pivoting is all that is needed.

use crate::error::{Error, Result};
use crate::num::Real;
use num_complex::Complex;

/// Inner product `sum_k a[k] * conj(b[k])`.
#[inline]
pub fn cdot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Complex::new(T::zero(), T::zero());
    for (x, y) in a.iter().zip(b.iter()) {
        acc += *x * y.conj();
    }
    acc
}

/// Squared Euclidean norm of a complex vector.
#[inline]
pub fn norm_sq<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Solve `A x = b` in place for a square complex matrix `A` (row-major,
/// `n x n`) using LU with partial pivoting. `b` is overwritten with `x`.
pub fn solve_dense<T: Real>(a: &mut [Complex<T>], b: &mut [Complex<T>], n: usize) -> Result<()> {
    if a.len() != n * n || b.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "solve_dense: a={}, b={}, n={}",
            a.len(),
            b.len(),
            n
        )));
    }
    for col in 0..n {
        // pivot
        let mut piv = col;
        let mut best = a[col * n + col].norm_sqr();
        for row in (col + 1)..n {
            let mag = a[row * n + col].norm_sqr();
            if mag > best {
                best = mag;
                piv = row;
            }
        }
        if best == T::zero() || !best.is_finite() {
            return Err(Error::SingularSystem);
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        let inv_piv = Complex::new(T::one(), T::zero()) / a[col * n + col];
        for row in (col + 1)..n {
            let factor = a[row * n + col] * inv_piv;
            if factor.norm_sqr() == T::zero() {
                continue;
            }
            for k in col..n {
                let sub = factor * a[col * n + k];
                a[row * n + k] -= sub;
            }
            let sub = factor * b[col];
            b[row] -= sub;
        }
    }
    // back substitution
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row * n + k] * b[k];
        }
        b[row] = acc / a[row * n + row];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn solve_identity() {
        let mut a = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let mut b = vec![c(2.0, 1.0), c(-3.0, 0.5)];
        solve_dense(&mut a, &mut b, 2).unwrap();
        assert!((b[0] - c(2.0, 1.0)).norm() < 1e-14);
        assert!((b[1] - c(-3.0, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn solve_random_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 2, 5, 12] {
            let a: Vec<Complex<f64>> = (0..n * n)
                .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            // make it diagonally dominant so it is well conditioned
            let mut a_dd = a.clone();
            for i in 0..n {
                a_dd[i * n + i] += c(n as f64, 0.0);
            }
            let x_true: Vec<Complex<f64>> = (0..n)
                .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let mut b = vec![c(0.0, 0.0); n];
            for i in 0..n {
                for j in 0..n {
                    b[i] += a_dd[i * n + j] * x_true[j];
                }
            }
            let mut a_work = a_dd.clone();
            solve_dense(&mut a_work, &mut b, n).unwrap();
            for i in 0..n {
                assert!((b[i] - x_true[i]).norm() < 1e-10, "n={n}, i={i}");
            }
        }
    }

    #[test]
    fn singular_rejected() {
        let mut a = vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)];
        let mut b = vec![c(1.0, 0.0), c(1.0, 0.0)];
        assert!(solve_dense(&mut a, &mut b, 2).is_err());
    }

    #[test]
    fn cdot_conjugates_second_argument() {
        let a = vec![c(3.0, 0.0), c(0.0, 4.0)];
        let u = vec![c(0.6, 0.0), c(0.0, 0.8)];
        let d = cdot(&a, &u);
        assert!((d - c(5.0, 0.0)).norm() < 1e-14);
    }
}
