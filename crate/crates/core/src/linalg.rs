//! Small dense linear algebra used for spectral diagnostics and test
//! oracles: a square matrix type, a cyclic Jacobi eigensolver for symmetric
//! matrices, and a handful of vector helpers.
//!
//! Everything here is desk scale (a few hundred rows at most); the hot
//! solver paths never touch dense matrices.

use crate::error::{Error, Result};
use crate::scalar::{sc, Real};

/// Dense square matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMat<S> {
    n: usize,
    data: Vec<S>,
}

impl<S: Real> SquareMat<S> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![S::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, S::one());
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> S {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.n + j] += v;
    }

    pub fn matvec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.at(i, j) * x[j]).sum())
            .collect()
    }

    pub fn matmul(&self, other: &SquareMat<S>) -> SquareMat<S> {
        assert_eq!(self.n, other.n);
        let mut out = SquareMat::zeros(self.n);
        for i in 0..self.n {
            for k in 0..self.n {
                let aik = self.at(i, k);
                if aik == S::zero() {
                    continue;
                }
                for j in 0..self.n {
                    out.add_at(i, j, aik * other.at(k, j));
                }
            }
        }
        out
    }

    /// Frobenius norm of the off-diagonal part.
    fn off_diagonal_norm(&self) -> S {
        let mut acc = S::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    acc += self.at(i, j) * self.at(i, j);
                }
            }
        }
        acc.sqrt()
    }

    fn frobenius_norm(&self) -> S {
        self.data.iter().map(|&v| v * v).sum::<S>().sqrt()
    }
}

/// Eigendecomposition of a symmetric matrix: `values[k]` pairs with the
/// k-th column of `vectors`, sorted ascending by eigenvalue.
#[derive(Debug, Clone)]
pub struct SymEigen<S> {
    pub values: Vec<S>,
    pub vectors: SquareMat<S>,
}

impl<S: Real> SymEigen<S> {
    /// k-th eigenvector as an owned vector.
    pub fn vector(&self, k: usize) -> Vec<S> {
        (0..self.vectors.n()).map(|i| self.vectors.at(i, k)).collect()
    }
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Converges quadratically; the sweep cap is generous for the matrix sizes
/// this crate handles and is reported as a degenerate-instance error if
/// ever exhausted.
pub fn sym_eigen<S: Real>(mat: &SquareMat<S>) -> Result<SymEigen<S>> {
    let n = mat.n();
    let mut a = mat.clone();
    let mut v = SquareMat::identity(n);
    if n == 0 {
        return Ok(SymEigen {
            values: vec![],
            vectors: v,
        });
    }

    let scale = a.frobenius_norm().max(S::one());
    let tol = S::epsilon() * scale * sc::<S>(n as f64);
    let max_sweeps = 64;
    let mut converged = false;

    for _ in 0..max_sweeps {
        if a.off_diagonal_norm() <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.at(p, q);
                if apq.abs() <= S::epsilon() * scale {
                    continue;
                }
                let app = a.at(p, p);
                let aqq = a.at(q, q);
                let theta = (aqq - app) / (sc::<S>(2.0) * apq);
                // Smaller root of t^2 + 2*theta*t - 1 = 0; guard huge theta.
                let t = if theta.abs() > S::one() / S::epsilon().sqrt() {
                    S::one() / (sc::<S>(2.0) * theta)
                } else {
                    let sign = if theta >= S::zero() { S::one() } else { -S::one() };
                    sign / (theta.abs() + (theta * theta + S::one()).sqrt())
                };
                let c = S::one() / (t * t + S::one()).sqrt();
                let s = t * c;

                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, S::zero());
                a.set(q, p, S::zero());
                for k in 0..n {
                    if k != p && k != q {
                        let akp = a.at(k, p);
                        let akq = a.at(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(p, k, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                        a.set(q, k, s * akp + c * akq);
                    }
                }
                for k in 0..n {
                    let vkp = v.at(k, p);
                    let vkq = v.at(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    if !converged && a.off_diagonal_norm() > tol {
        return Err(Error::DegenerateInstance(
            "jacobi eigensolver did not converge".into(),
        ));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a.at(i, i)
            .partial_cmp(&a.at(j, j))
            .expect("eigenvalues are finite")
    });
    let values = order.iter().map(|&k| a.at(k, k)).collect();
    let mut vectors = SquareMat::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            vectors.set(row, col, v.at(row, k));
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Orthonormal basis of the subspace orthogonal to the all-ones vector,
/// returned as the columns of an n x (n-1) matrix (stored in a SquareMat
/// with the last column unused is avoided; rows = n, cols = n-1).
///
/// Built from the Householder reflector that maps e_0 to 1/sqrt(n).
pub fn ones_complement_basis<S: Real>(n: usize) -> Vec<Vec<S>> {
    assert!(n >= 2);
    let inv_sqrt_n = S::one() / sc::<S>(n as f64).sqrt();
    // v = u - e0 with u = 1/sqrt(n); reflector H = I - 2 v v'/(v'v).
    let mut v = vec![inv_sqrt_n; n];
    v[0] -= S::one();
    let vtv: S = v.iter().map(|&x| x * x).sum();
    let mut cols = Vec::with_capacity(n - 1);
    for j in 1..n {
        let mut col = vec![S::zero(); n];
        for i in 0..n {
            let e = if i == j { S::one() } else { S::zero() };
            col[i] = e - sc::<S>(2.0) * v[i] * v[j] / vtv;
        }
        cols.push(col);
    }
    cols
}

#[inline]
pub fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub fn norm2<S: Real>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm_inf<S: Real>(a: &[S]) -> S {
    a.iter().fold(S::zero(), |m, &x| m.max(x.abs()))
}

/// Returns `x + alpha * d` element-wise.
pub fn add_scaled<S: Real>(x: &[S], alpha: S, d: &[S]) -> Vec<S> {
    debug_assert_eq!(x.len(), d.len());
    x.iter().zip(d).map(|(&xi, &di)| xi + alpha * di).collect()
}
