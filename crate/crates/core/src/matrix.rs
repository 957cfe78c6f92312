//! Dense complex matrices and the handful of factorizations the rest of the
//! crate needs: pivoted LU solves, Gram-Schmidt orthonormalization and
//! column-pivoted rank detection.
//!
//! Sizes here are small (a few dozen rows at most), so everything is a
//! straightforward row-major loop. The operator impls (`&a * &b`, `&a + &b`)
//! panic on shape mismatch; use [`matmul`] when the shapes come from input.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{KatoError, Result};

/// Default relative pivot threshold for [`solve`].
pub const SINGULAR_TOL: f64 = 1e-12;
/// Default relative threshold on Gram-Schmidt diagonals in [`orthonormalize`].
pub const RANK_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    /// Builds a matrix from row-major data, rejecting empty shapes,
    /// a length mismatch and non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(KatoError::InvalidArgument(format!(
                "matrix shape must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(KatoError::InvalidArgument(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.is_finite()) {
            return Err(KatoError::InvalidArgument("matrix entries must be finite".into()));
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(KatoError::InvalidArgument("ragged row data".into()));
        }
        Self::from_vec(r, c, rows.concat())
    }

    /// Real-valued literal; handy in tests and for closed-form families.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|row| row.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn column_vector(entries: &[Complex64]) -> Result<Self> {
        Self::from_vec(entries.len(), 1, entries.to_vec())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> CMatrix {
        self.scale(Complex64::new(s, 0.0))
    }

    /// `self * a + other * b`, entrywise; shapes must agree.
    pub fn axpby(&self, a: f64, other: &CMatrix, b: f64) -> CMatrix {
        assert_eq!(self.shape(), other.shape(), "axpby shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&x, &y)| x * a + y * b)
                .collect(),
        }
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn select_columns(&self, idx: &[usize]) -> CMatrix {
        CMatrix::from_fn(self.rows, idx.len(), |i, j| self[(i, idx[j])])
    }

    pub fn fro_norm(&self) -> f64 {
        fro_norm(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:>+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl<'a> Mul<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &'a CMatrix) -> CMatrix {
        matmul(self, rhs).expect("matrix product shape mismatch")
    }
}

impl<'a> Add<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &'a CMatrix) -> CMatrix {
        self.axpby(1.0, rhs, 1.0)
    }
}

impl<'a> Sub<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &'a CMatrix) -> CMatrix {
        self.axpby(1.0, rhs, -1.0)
    }
}

impl Mul<&CMatrix> for CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        &self * rhs
    }
}

impl Add<&CMatrix> for CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        &self + rhs
    }
}

impl Sub<&CMatrix> for CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        &self - rhs
    }
}

pub fn matmul(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.cols != b.rows {
        return Err(KatoError::DimensionMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut c = CMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for l in 0..a.cols {
            let ail = a[(i, l)];
            let brow = &b.data[l * b.cols..(l + 1) * b.cols];
            let crow = &mut c.data[i * b.cols..(i + 1) * b.cols];
            for (cij, &blj) in crow.iter_mut().zip(brow) {
                *cij += ail * blj;
            }
        }
    }
    Ok(c)
}

pub fn fro_norm(m: &CMatrix) -> f64 {
    m.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// LU factorization with partial pivoting, `P A = L U`, stored compactly.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &CMatrix, singular_tol: f64) -> Result<Lu> {
        if !a.is_square() {
            return Err(KatoError::DimensionMismatch {
                op: "lu",
                left: a.shape(),
                right: a.shape(),
            });
        }
        let n = a.rows;
        let threshold = singular_tol * fro_norm(a);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].norm()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= threshold || pivot == 0.0 {
                return Err(KatoError::SingularMatrix { column: k, pivot });
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let inv = ONE / lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] * inv;
                lu[(i, k)] = factor;
                if factor == ZERO {
                    continue;
                }
                for j in k + 1..n {
                    let ukj = lu[(k, j)];
                    lu[(i, j)] -= factor * ukj;
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn solve(&self, b: &CMatrix) -> Result<CMatrix> {
        let n = self.lu.rows;
        if b.rows != n {
            return Err(KatoError::DimensionMismatch {
                op: "solve",
                left: self.lu.shape(),
                right: b.shape(),
            });
        }
        let mut x = CMatrix::from_fn(n, b.cols, |i, j| b[(self.perm[i], j)]);
        for c in 0..b.cols {
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in i + 1..n {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / self.lu[(i, i)];
            }
        }
        Ok(x)
    }
}

/// Solves `a X = b` by LU with partial pivoting.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    solve_with_tol(a, b, SINGULAR_TOL)
}

pub fn solve_with_tol(a: &CMatrix, b: &CMatrix, singular_tol: f64) -> Result<CMatrix> {
    if !a.is_square() || b.rows != a.rows {
        return Err(KatoError::DimensionMismatch {
            op: "solve",
            left: a.shape(),
            right: b.shape(),
        });
    }
    Lu::new(a, singular_tol)?.solve(b)
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    solve(a, &CMatrix::identity(a.rows))
}

fn dot(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormal basis of `range(m)` with the same column order.
///
/// Classical Gram-Schmidt with one reorthogonalization pass, so the
/// triangular factor has a real nonnegative diagonal and the output is
/// deterministic.
pub fn orthonormalize(m: &CMatrix) -> Result<CMatrix> {
    orthonormalize_with_tol(m, RANK_TOL)
}

pub fn orthonormalize_with_tol(m: &CMatrix, rank_tol: f64) -> Result<CMatrix> {
    let scale = fro_norm(m);
    let mut q: Vec<Vec<Complex64>> = Vec::with_capacity(m.cols);
    for j in 0..m.cols {
        let mut v = m.column(j);
        for _pass in 0..2 {
            for qi in &q {
                let c = dot(qi, &v);
                for (vk, &qk) in v.iter_mut().zip(qi) {
                    *vk -= c * qk;
                }
            }
        }
        let diag = norm2(&v);
        if diag <= rank_tol * scale || diag == 0.0 {
            return Err(KatoError::RankDeficient {
                column: j,
                diagonal: diag,
            });
        }
        let inv = 1.0 / diag;
        q.push(v.into_iter().map(|z| z * inv).collect());
    }
    Ok(CMatrix::from_fn(m.rows, m.cols, |i, j| q[j][i]))
}

/// Column-pivoted Gram-Schmidt. Returns the pivot order together with the
/// magnitudes of the triangular diagonal, in decreasing pivot order.
fn pivoted_diagonals(m: &CMatrix) -> (Vec<usize>, Vec<f64>) {
    let mut cols: Vec<Vec<Complex64>> = (0..m.cols).map(|j| m.column(j)).collect();
    let mut remaining: Vec<usize> = (0..m.cols).collect();
    let mut order = Vec::new();
    let mut diags = Vec::new();
    let steps = m.cols.min(m.rows);
    for _ in 0..steps {
        let (pos, best) = remaining
            .iter()
            .enumerate()
            .map(|(pos, &j)| (pos, norm2(&cols[j])))
            .fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b });
        let j = remaining.remove(pos);
        order.push(j);
        diags.push(best);
        if best == 0.0 {
            break;
        }
        let q: Vec<Complex64> = cols[j].iter().map(|z| z / best).collect();
        for &r in &remaining {
            for _pass in 0..2 {
                let c = dot(&q, &cols[r]);
                for (vk, &qk) in cols[r].iter_mut().zip(&q) {
                    *vk -= c * qk;
                }
            }
        }
    }
    (order, diags)
}

/// Number of pivoted triangular diagonals above `tol` times the largest.
pub fn numerical_rank(m: &CMatrix, tol: f64) -> usize {
    let (_, diags) = pivoted_diagonals(m);
    let largest = diags.first().copied().unwrap_or(0.0);
    if largest == 0.0 {
        return 0;
    }
    diags.iter().filter(|&&d| d > tol * largest).count()
}

/// Orthonormal basis of the range of a rank-`k` matrix: the `k` leading
/// pivot columns, restored to their original order, then orthonormalized.
pub fn range_basis(m: &CMatrix, k: usize) -> Result<CMatrix> {
    if k == 0 || k > m.cols {
        return Err(KatoError::InvalidArgument(format!(
            "range basis of rank {k} requested from {} columns",
            m.cols
        )));
    }
    let (order, _) = pivoted_diagonals(m);
    let mut chosen: Vec<usize> = order.into_iter().take(k).collect();
    chosen.sort_unstable();
    orthonormalize(&m.select_columns(&chosen))
}
