//! Dense row-major matrices and a cyclic Jacobi eigensolver for symmetric
//! matrices.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: F) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::contract(format!(
                "buffer of length {} cannot be shaped {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<F> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == F::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d = *d + a * b;
                }
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn is_symmetric(&self, tol: F) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn max_abs(&self) -> F {
        self.data.iter().fold(F::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn cast<G: Scalar>(&self) -> Matrix<G> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| G::of(x.as_f64())).collect(),
        }
    }
}

impl<F> Index<(usize, usize)> for Matrix<F> {
    type Output = F;

    fn index(&self, (r, c): (usize, usize)) -> &F {
        &self.data[r * self.cols + c]
    }
}

impl<F> IndexMut<(usize, usize)> for Matrix<F> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut F {
        &mut self.data[r * self.cols + c]
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending. Column `j` of
/// `vectors` belongs to `values[j]`.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<F> {
    pub values: Vec<F>,
    pub vectors: Matrix<F>,
}

const MAX_SWEEPS: usize = 100;

/// Full eigendecomposition by cyclic Jacobi rotations.
///
/// Rotations sweep the strict upper triangle in row-major order, so the
/// result is a deterministic function of the input. Each eigenvector is
/// normalised and its sign chosen so that its first nonzero component is
/// positive.
pub fn jacobi_eigen<F: Scalar>(m: &Matrix<F>) -> Result<SymmetricEigen<F>> {
    let n = m.rows();
    let scale = m.max_abs().max(F::one());
    if !m.is_symmetric(F::of(1e-12) * scale) {
        return Err(Error::contract("eigensolver requires a square symmetric matrix"));
    }
    let mut a = m.clone();
    let mut v = Matrix::<F>::identity(n);
    let eps = F::epsilon();
    for _ in 0..MAX_SWEEPS {
        let off: F = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .fold(F::zero(), |s, x| s + x);
        let diag: F = (0..n).map(|i| a[(i, i)] * a[(i, i)]).fold(F::zero(), |s, x| s + x);
        if off.sqrt() <= eps * (diag.sqrt() + F::min_positive_value()) || off == F::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == F::zero() {
                    continue;
                }
                let two = F::of(2.0);
                let theta = (a[(q, q)] - a[(p, p)]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + F::one()).sqrt());
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].as_f64().total_cmp(&a[(j, j)].as_f64()).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    fix_signs(&mut vectors);
    Ok(SymmetricEigen { values, vectors })
}

/// The `k` smallest eigenpairs of a symmetric matrix.
pub fn symmetric_eigs<F: Scalar>(m: &Matrix<F>, k: usize) -> Result<SymmetricEigen<F>> {
    if k > m.rows() {
        return Err(Error::contract(format!("requested {k} eigenpairs of a {}x{} matrix", m.rows(), m.rows())));
    }
    let full = jacobi_eigen(m)?;
    let n = m.rows();
    Ok(SymmetricEigen {
        values: full.values[..k].to_vec(),
        vectors: Matrix::from_fn(n, k, |r, c| full.vectors[(r, c)]),
    })
}

/// Normalise every column and flip it so that its first component larger
/// than a small threshold is positive.
pub fn fix_signs<F: Scalar>(vectors: &mut Matrix<F>) {
    let (n, k) = vectors.shape();
    for c in 0..k {
        let norm = (0..n).map(|r| vectors[(r, c)] * vectors[(r, c)]).fold(F::zero(), |s, x| s + x).sqrt();
        if norm == F::zero() {
            continue;
        }
        let tiny = F::of(1e-9).max(F::epsilon() * F::of(100.0));
        let flip = (0..n)
            .map(|r| vectors[(r, c)] / norm)
            .find(|x| x.abs() > tiny)
            .is_some_and(|x| x < F::zero());
        let factor = if flip { -F::one() / norm } else { F::one() / norm };
        for r in 0..n {
            vectors[(r, c)] = vectors[(r, c)] * factor;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_eigenvalues() {
        let e = symmetric_eigs(&Matrix::<f64>::identity(3), 2).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
    }

    #[test]
    fn diagonal_smallest_pair() {
        let mut m = Matrix::<f64>::zeros(3, 3);
        m[(1, 1)] = 1.0;
        m[(2, 2)] = 2.0;
        let e = symmetric_eigs(&m, 1).unwrap();
        assert_eq!(e.values, vec![0.0]);
        assert_eq!(e.vectors.column(0), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_non_symmetric() {
        let m = Matrix::<f64>::from_vec(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(symmetric_eigs(&m, 1), Err(Error::Contract(_))));
        assert!(symmetric_eigs(&Matrix::<f64>::identity(2), 3).is_err());
    }

    #[test]
    fn random_residuals_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..10 {
            let mut m = Matrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let x: f64 = rng.gen_range(-1.0..1.0);
                    m[(i, j)] = x;
                    m[(j, i)] = x;
                }
            }
            let e = jacobi_eigen(&m).unwrap();
            for c in 0..n {
                let v = e.vectors.column(c);
                let mv: Vec<f64> = (0..n).map(|r| (0..n).map(|k| m[(r, k)] * v[k]).sum()).collect();
                let res: f64 = mv.iter().zip(&v).map(|(a, b)| (a - e.values[c] * b).powi(2)).sum::<f64>().sqrt();
                assert!(res <= 1e-8 * n as f64, "residual {res}");
                for d in 0..n {
                    let dot: f64 = (0..n).map(|r| e.vectors[(r, c)] * e.vectors[(r, d)]).sum();
                    let want = if c == d { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-10);
                }
            }
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
