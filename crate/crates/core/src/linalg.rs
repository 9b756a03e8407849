//! Small dense helpers on top of faer shared by the physics modules.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};
use num_complex::Complex64 as C64;

use crate::error::{KpoError, Result};

pub type CMat = Mat<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn zeros(n: usize) -> CMat {
    Mat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

/// Kronecker product `a ⊗ b`, with `a` acting on the slow (outer) index.
pub fn kron(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> CMat {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    let mut out = Mat::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for l in 0..bc {
                for k in 0..br {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn dagger(a: MatRef<'_, C64>) -> CMat {
    a.adjoint().to_owned()
}

pub fn trace(a: MatRef<'_, C64>) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

pub fn max_abs(a: MatRef<'_, C64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn max_abs_diff(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> f64 {
    max_abs((a - b).as_ref())
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermitian_deviation(a: MatRef<'_, C64>) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

pub fn scale(a: MatRef<'_, C64>, s: C64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn commutator(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> CMat {
    a * b - b * a
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(a: MatRef<'_, C64>) -> Result<(Vec<f64>, CMat)> {
    let sym = Mat::from_fn(a.nrows(), a.ncols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)].conj()));
    let evd = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| KpoError::Linalg(format!("{e:?}")))?;
    let vals = evd.S().column_vector().iter().map(|v| v.re).collect();
    Ok((vals, evd.U().to_owned()))
}

pub fn min_eigenvalue(a: MatRef<'_, C64>) -> Result<f64> {
    let (vals, _) = hermitian_eigen(a)?;
    Ok(vals.first().copied().unwrap_or(0.0))
}

/// Trace norm distance `½‖a − b‖₁` for Hermitian arguments.
pub fn trace_distance(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Result<f64> {
    let d = a - b;
    let (vals, _) = hermitian_eigen(d.as_ref())?;
    Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
}

fn norm_one(a: MatRef<'_, C64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a diagonal [8/8] Padé approximant.
pub fn expm(a: MatRef<'_, C64>) -> CMat {
    const COEFFS: [f64; 9] = [
        1.0,
        1.0 / 2.0,
        7.0 / 60.0,
        1.0 / 60.0,
        1.0 / 624.0,
        1.0 / 9_360.0,
        1.0 / 205_920.0,
        1.0 / 7_207_200.0,
        1.0 / 518_918_400.0,
    ];
    let n = a.nrows();
    let norm = norm_one(a);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let s = 0.5f64.powi(squarings as i32);
    let x = scale(a, C64::new(s, 0.0));

    let mut num = identity(n);
    let mut den = identity(n);
    let mut power = identity(n);
    for (k, &c) in COEFFS.iter().enumerate().skip(1) {
        power = &power * &x;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for j in 0..n {
            for i in 0..n {
                let p = power[(i, j)] * c;
                num[(i, j)] += p;
                den[(i, j)] += p * sign;
            }
        }
    }
    let mut r = den.partial_piv_lu().solve(&num);
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// Solve `a x = b` by LU with partial pivoting.
pub fn solve(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> CMat {
    a.partial_piv_lu().solve(b)
}

/// `y = a x` for column-major `a` stored as a faer matrix.
#[inline]
pub fn matvec(a: MatRef<'_, C64>, x: &[C64], y: &mut [C64]) {
    y.iter_mut().for_each(|v| *v = ZERO);
    for (j, &xj) in x.iter().enumerate() {
        if xj == ZERO {
            continue;
        }
        let col = a.col(j);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += col[i] * xj;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_of_identities_is_identity() {
        let k = kron(identity(2).as_ref(), identity(3).as_ref());
        assert!(max_abs_diff(k.as_ref(), identity(6).as_ref()) == 0.0);
    }

    #[test]
    fn expm_of_diagonal() {
        let mut a = zeros(3);
        a[(0, 0)] = C64::new(1.0, 0.0);
        a[(1, 1)] = C64::new(-2.5, 0.3);
        a[(2, 2)] = C64::new(0.0, 7.0);
        let e = expm(a.as_ref());
        for k in 0..3 {
            assert!((e[(k, k)] - a[(k, k)].exp()).norm() < 1e-12 * a[(k, k)].exp().norm().max(1.0));
        }
    }

    #[test]
    fn expm_of_pauli_rotation() {
        // exp(-i θ σx) = cos θ − i sin θ σx
        let theta = 3.7;
        let mut a = zeros(2);
        a[(0, 1)] = C64::new(0.0, -theta);
        a[(1, 0)] = C64::new(0.0, -theta);
        let e = expm(a.as_ref());
        assert!((e[(0, 0)] - C64::new(theta.cos(), 0.0)).norm() < 1e-13);
        assert!((e[(0, 1)] - C64::new(0.0, -theta.sin())).norm() < 1e-13);
    }

    #[test]
    fn hermitian_eigen_sorted() {
        let mut a = zeros(2);
        a[(0, 1)] = ONE;
        a[(1, 0)] = ONE;
        let (vals, vecs) = hermitian_eigen(a.as_ref()).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        assert_eq!(vecs.ncols(), 2);
    }
}
