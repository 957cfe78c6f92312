//! Spectral projectors onto the stable or unstable invariant subspace of a
//! matrix.
//!
//! The invariant subspace comes from an ordered complex Schur form: reduce to
//! Hessenberg, run shifted QR to triangular form, then bubble the selected
//! eigenvalues to the leading block with Givens swaps. The leading Schur
//! vectors are an orthonormal basis. Applying the same to `A*` gives the left
//! basis, and `P = R (L* R)^{-1} L*` assembles the (generally oblique)
//! projector.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KatoError, Result};
use crate::matrix::{fro_norm, matmul, numerical_rank, solve_with_tol, CMatrix, SINGULAR_TOL};

/// Default minimum distance of any eigenvalue from the imaginary axis.
pub const GAP_TOL: f64 = 1e-8;
/// Relative idempotence tolerance, scaled by `1 + |P|_F`.
pub const IDEM_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Which half of the complex plane a spectral projector selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectralHalf {
    /// Re μ < 0
    Stable,
    /// Re μ > 0
    Unstable,
}

impl SpectralHalf {
    pub fn contains(self, mu: Complex64) -> bool {
        match self {
            SpectralHalf::Stable => mu.re < 0.0,
            SpectralHalf::Unstable => mu.re > 0.0,
        }
    }

    pub fn opposite(self) -> SpectralHalf {
        match self {
            SpectralHalf::Stable => SpectralHalf::Unstable,
            SpectralHalf::Unstable => SpectralHalf::Stable,
        }
    }
}

/// A square matrix `p` with `p * p == p` (up to rounding) of known rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    p: CMatrix,
    rank: usize,
}

impl Projector {
    /// Wraps a matrix the caller knows to be a rank-`rank` projector.
    pub fn new(p: CMatrix, rank: usize) -> Result<Projector> {
        if !p.is_square() {
            return Err(KatoError::InvalidArgument(format!(
                "projector must be square, got {:?}",
                p.shape()
            )));
        }
        if rank > p.rows() {
            return Err(KatoError::InvalidArgument(format!(
                "rank {rank} exceeds dimension {}",
                p.rows()
            )));
        }
        Ok(Projector { p, rank })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.p
    }

    pub fn into_matrix(self) -> CMatrix {
        self.p
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.p.rows()
    }

    /// `|P^2 - P|_F / (1 + |P|_F)`.
    pub fn idempotence_defect(&self) -> f64 {
        let p2 = &self.p * &self.p;
        fro_norm(&(&p2 - &self.p)) / (1.0 + fro_norm(&self.p))
    }

    pub fn is_idempotent(&self, tol: f64) -> bool {
        self.idempotence_defect() <= tol
    }

    /// Checks both invariants: idempotence and `numerical_rank == rank`.
    pub fn validate(&self, idem_tol: f64) -> bool {
        self.is_idempotent(idem_tol) && numerical_rank(&self.p, 1e-8) == self.rank
    }
}

/// Complex Schur form `A = Q T Q*` with `T` upper triangular.
#[derive(Debug, Clone)]
pub struct Schur {
    pub q: CMatrix,
    pub t: CMatrix,
}

impl Schur {
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        (0..self.t.rows()).map(|i| self.t[(i, i)]).collect()
    }
}

/// Givens rotation `G = [[c, s], [-conj(s), c]]` with `G [a; b] = [r; 0]`.
#[derive(Debug, Clone, Copy)]
struct Givens {
    c: f64,
    s: Complex64,
}

impl Givens {
    fn zeroing(a: Complex64, b: Complex64) -> Givens {
        let abs_a = a.norm();
        let abs_b = b.norm();
        if abs_b == 0.0 {
            return Givens { c: 1.0, s: ZERO };
        }
        if abs_a == 0.0 {
            return Givens {
                c: 0.0,
                s: Complex64::new(1.0, 0.0),
            };
        }
        let rho = abs_a.hypot(abs_b);
        Givens {
            c: abs_a / rho,
            s: (a / abs_a) * b.conj() / rho,
        }
    }

    /// `M <- G M` on rows `k, k+1`, columns `cols`.
    fn apply_left(&self, m: &mut CMatrix, k: usize, cols: std::ops::Range<usize>) {
        for j in cols {
            let x = m[(k, j)];
            let y = m[(k + 1, j)];
            m[(k, j)] = x * self.c + self.s * y;
            m[(k + 1, j)] = -self.s.conj() * x + y * self.c;
        }
    }

    /// `M <- M G*` on columns `k, k+1`, rows `rows`.
    fn apply_right_adjoint(&self, m: &mut CMatrix, k: usize, rows: std::ops::Range<usize>) {
        for i in rows {
            let x = m[(i, k)];
            let y = m[(i, k + 1)];
            m[(i, k)] = x * self.c + y * self.s.conj();
            m[(i, k + 1)] = -x * self.s + y * self.c;
        }
    }
}

fn hessenberg(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.rows();
    let mut h = a.clone();
    let mut q = CMatrix::identity(n);
    for k in 0..n.saturating_sub(2) {
        let x: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x[0] / x[0].norm()
        };
        let mut v = x;
        v[0] += phase * xnorm;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut v {
            *z /= vnorm;
        }
        // H <- (I - 2vv*) H (I - 2vv*), acting on indices k+1..n
        for j in 0..n {
            let s: Complex64 = (0..v.len()).map(|t| v[t].conj() * h[(k + 1 + t, j)]).sum();
            for t in 0..v.len() {
                h[(k + 1 + t, j)] -= v[t] * s * 2.0;
            }
        }
        for m in [&mut h, &mut q] {
            for i in 0..n {
                let s: Complex64 = (0..v.len()).map(|t| m[(i, k + 1 + t)] * v[t]).sum();
                for t in 0..v.len() {
                    m[(i, k + 1 + t)] -= s * v[t].conj() * 2.0;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
    (h, q)
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5).powu(2) + b * c;
    let root = disc.sqrt();
    let mu1 = half_tr + root;
    let mu2 = half_tr - root;
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        mu1
    } else {
        mu2
    }
}

/// Complex Schur decomposition by Hessenberg reduction and single-shift QR.
pub fn schur(a: &CMatrix) -> Result<Schur> {
    if !a.is_square() {
        return Err(KatoError::DimensionMismatch {
            op: "schur",
            left: a.shape(),
            right: a.shape(),
        });
    }
    if !a.is_finite() {
        return Err(KatoError::InvalidArgument("schur of a non-finite matrix".into()));
    }
    let n = a.rows();
    let (mut t, mut q) = hessenberg(a);
    let eps = f64::EPSILON;
    let anorm = fro_norm(a).max(f64::MIN_POSITIVE);
    let max_iter = 60 * n.max(1);
    let mut hi = n.saturating_sub(1);
    let mut iter = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let sub = t[(lo, lo - 1)].norm();
            let mut diag = t[(lo, lo)].norm() + t[(lo - 1, lo - 1)].norm();
            if diag == 0.0 {
                diag = anorm;
            }
            if sub <= eps * diag {
                t[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > max_iter * n.max(1) {
            return Err(KatoError::NoConvergence { iterations: total });
        }
        let shift = if iter.is_multiple_of(11) {
            // exceptional shift to break cycles
            t[(hi, hi)] + Complex64::new(t[(hi, hi - 1)].norm() * 0.75, t[(hi, hi - 1)].norm() * 0.25)
        } else {
            wilkinson_shift(t[(hi - 1, hi - 1)], t[(hi - 1, hi)], t[(hi, hi - 1)], t[(hi, hi)])
        };
        for i in lo..=hi {
            t[(i, i)] -= shift;
        }
        let mut rots = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let g = Givens::zeroing(t[(k, k)], t[(k + 1, k)]);
            g.apply_left(&mut t, k, k..n);
            t[(k + 1, k)] = ZERO;
            rots.push(g);
        }
        for (k, g) in (lo..hi).zip(&rots) {
            g.apply_right_adjoint(&mut t, k, 0..(k + 2).min(hi + 1));
            g.apply_right_adjoint(&mut q, k, 0..n);
        }
        for i in lo..=hi {
            t[(i, i)] += shift;
        }
    }
    for i in 0..n {
        for j in 0..i {
            t[(i, j)] = ZERO;
        }
    }
    Ok(Schur { q, t })
}

/// Swaps diagonal entries `k` and `k + 1` of the triangular factor.
fn swap_adjacent(s: &mut Schur, k: usize) {
    let n = s.t.rows();
    let t11 = s.t[(k, k)];
    let t22 = s.t[(k + 1, k + 1)];
    // G* e1 is parallel to the eigenvector [t12; t22 - t11] for t22.
    let g = Givens::zeroing(s.t[(k, k + 1)], t22 - t11);
    g.apply_left(&mut s.t, k, k..n);
    g.apply_right_adjoint(&mut s.t, k, 0..k + 2);
    g.apply_right_adjoint(&mut s.q, k, 0..n);
    s.t[(k, k)] = t22;
    s.t[(k + 1, k + 1)] = t11;
    s.t[(k + 1, k)] = ZERO;
}

/// Reorders a Schur form so eigenvalues satisfying `select` lead, keeping
/// the relative order within each group. Returns the number selected.
pub fn reorder_schur(s: &mut Schur, select: impl Fn(Complex64) -> bool) -> usize {
    let n = s.t.rows();
    let mut placed = 0;
    for i in 0..n {
        if select(s.t[(i, i)]) {
            let mut k = i;
            while k > placed {
                swap_adjacent(s, k - 1);
                k -= 1;
            }
            placed += 1;
        }
    }
    placed
}

fn check_gap(eigs: &[Complex64], gap_tol: f64) -> Result<()> {
    match eigs.iter().find(|mu| mu.re.abs() < gap_tol || !mu.is_finite()) {
        Some(&eigenvalue) => Err(KatoError::SpectralGapViolation { eigenvalue, gap_tol }),
        None => Ok(()),
    }
}

/// Orthonormal `n x k` basis of the invariant subspace of `a` belonging to
/// the eigenvalues in `half`.
pub fn spectral_split(a: &CMatrix, half: SpectralHalf, gap_tol: f64) -> Result<CMatrix> {
    let (basis, _) = split_with_count(a, half, gap_tol)?;
    basis.ok_or(KatoError::EmptySubspace)
}

fn split_with_count(a: &CMatrix, half: SpectralHalf, gap_tol: f64) -> Result<(Option<CMatrix>, usize)> {
    let mut s = schur(a)?;
    check_gap(&s.eigenvalues(), gap_tol)?;
    let k = reorder_schur(&mut s, |mu| half.contains(mu));
    if k == 0 {
        return Ok((None, 0));
    }
    let idx: Vec<usize> = (0..k).collect();
    Ok((Some(s.q.select_columns(&idx)), k))
}

/// `P = R (L* R)^{-1} L*` from right and left bases of equal shape.
pub fn eigenprojection(r_basis: &CMatrix, l_basis: &CMatrix) -> Result<Projector> {
    if r_basis.shape() != l_basis.shape() {
        return Err(KatoError::DimensionMismatch {
            op: "eigenprojection",
            left: r_basis.shape(),
            right: l_basis.shape(),
        });
    }
    let l_adj = l_basis.adjoint();
    let gram = matmul(&l_adj, r_basis)?;
    // Orthonormal-ish inputs make |L*R| ~ 1; compare pivots to that scale
    // as well so that near-orthogonal bases are rejected.
    let scale_floor = (fro_norm(r_basis) * fro_norm(l_basis)).max(f64::MIN_POSITIVE);
    let tol = SINGULAR_TOL * (scale_floor / fro_norm(&gram).max(f64::MIN_POSITIVE)).max(1.0);
    let x = solve_with_tol(&gram, &l_adj, tol).map_err(|e| match e {
        KatoError::SingularMatrix { .. } => KatoError::DegenerateDuality,
        other => other,
    })?;
    let p = matmul(r_basis, &x)?;
    Projector::new(p, r_basis.cols())
}

/// Spectral projector of `a` onto its `half` invariant subspace, along the
/// complementary one.
pub fn stable_projector(a: &CMatrix, half: SpectralHalf, gap_tol: f64) -> Result<Projector> {
    let n = a.rows();
    let (right, k) = split_with_count(a, half, gap_tol)?;
    if k == 0 {
        return Projector::new(CMatrix::zeros(n, n), 0);
    }
    if k == n {
        return Projector::new(CMatrix::identity(n), n);
    }
    // Left invariant subspace: eigenvalues of A* are the conjugates of
    // those of A, which keep the sign of their real part.
    let (left, kl) = split_with_count(&a.adjoint(), half, gap_tol)?;
    if kl != k {
        return Err(KatoError::DegenerateDuality);
    }
    eigenprojection(&right.expect("k > 0"), &left.expect("k > 0"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(rows: &[&[f64]]) -> CMatrix {
        CMatrix::from_real_rows(rows).unwrap()
    }

    fn dist(a: &CMatrix, b: &CMatrix) -> f64 {
        fro_norm(&(a - b))
    }

    #[test]
    fn schur_reconstructs() {
        let a = CMatrix::from_fn(5, 5, |i, j| {
            Complex64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64 - 1.0)
        });
        let s = schur(&a).unwrap();
        let back = &(&s.q * &s.t) * &s.q.adjoint();
        assert!(dist(&back, &a) < 1e-12 * fro_norm(&a));
        let qq = &s.q.adjoint() * &s.q;
        assert!(dist(&qq, &CMatrix::identity(5)) < 1e-13);
        for i in 0..5 {
            for j in 0..i {
                assert_eq!(s.t[(i, j)], ZERO);
            }
        }
    }

    #[test]
    fn reorder_keeps_similarity() {
        let a = real(&[&[1.0, 2.0, 0.5], &[0.0, -3.0, 1.0], &[0.2, 0.1, 2.0]]);
        let mut s = schur(&a).unwrap();
        let k = reorder_schur(&mut s, |mu| mu.re < 0.0);
        assert_eq!(k, 1);
        assert!(s.t[(0, 0)].re < 0.0);
        let back = &(&s.q * &s.t) * &s.q.adjoint();
        assert!(dist(&back, &a) < 1e-12 * fro_norm(&a));
    }

    #[test]
    fn split_diagonal() {
        let a = real(&[&[-1.0, 0.0], &[0.0, 2.0]]);
        let q = spectral_split(&a, SpectralHalf::Stable, GAP_TOL).unwrap();
        assert_eq!(q.shape(), (2, 1));
        assert!((q[(0, 0)].norm() - 1.0).abs() < 1e-14);
        assert!(q[(1, 0)].norm() < 1e-14);
    }

    #[test]
    fn split_off_diagonal() {
        // eigenvalue -2 has eigenvector (1, -2)
        let a = real(&[&[0.0, 1.0], &[4.0, 0.0]]);
        let q = spectral_split(&a, SpectralHalf::Stable, GAP_TOL).unwrap();
        let expected = [1.0 / 5f64.sqrt(), -2.0 / 5f64.sqrt()];
        let phase = q[(0, 0)] / expected[0];
        assert!((phase.norm() - 1.0).abs() < 1e-14);
        assert!((q[(1, 0)] - phase * expected[1]).norm() < 1e-14);
    }

    #[test]
    fn split_nilpotent_violates_gap() {
        let a = real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(
            spectral_split(&a, SpectralHalf::Stable, GAP_TOL),
            Err(KatoError::SpectralGapViolation { .. })
        ));
    }

    #[test]
    fn eigenprojection_examples() {
        let e1 = real(&[&[1.0], &[0.0]]);
        let p = eigenprojection(&e1, &e1).unwrap();
        assert_eq!(p.matrix(), &real(&[&[1.0, 0.0], &[0.0, 0.0]]));

        let r = real(&[&[1.0], &[1.0]]);
        let p = eigenprojection(&r, &e1).unwrap();
        assert!(dist(p.matrix(), &real(&[&[1.0, 0.0], &[1.0, 0.0]])) < 1e-15);
        assert_eq!(p.rank(), 1);

        let e2 = real(&[&[0.0], &[1.0]]);
        assert_eq!(eigenprojection(&e1, &e2), Err(KatoError::DegenerateDuality));
    }

    #[test]
    fn stable_projector_examples() {
        let p = stable_projector(&real(&[&[-1.0, 0.0], &[0.0, 2.0]]), SpectralHalf::Stable, GAP_TOL).unwrap();
        assert!(dist(p.matrix(), &real(&[&[1.0, 0.0], &[0.0, 0.0]])) < 1e-14);

        // oracle: v w* / (w* v) with v = (1,-2), w = (2,-1)
        let p = stable_projector(&real(&[&[0.0, 1.0], &[4.0, 0.0]]), SpectralHalf::Stable, GAP_TOL).unwrap();
        assert!(dist(p.matrix(), &real(&[&[0.5, -0.25], &[-1.0, 0.5]])) < 1e-14);

        // lambda = 1: eigenvalue -1 with v = (1,-1), w = (1,-1)
        let p = stable_projector(&real(&[&[0.0, 1.0], &[1.0, 0.0]]), SpectralHalf::Stable, GAP_TOL).unwrap();
        assert!(dist(p.matrix(), &real(&[&[0.5, -0.5], &[-0.5, 0.5]])) < 1e-14);
    }

    #[test]
    fn degenerate_halves() {
        let a = real(&[&[-1.0, 3.0], &[0.0, -2.0]]);
        let ps = stable_projector(&a, SpectralHalf::Stable, GAP_TOL).unwrap();
        let pu = stable_projector(&a, SpectralHalf::Unstable, GAP_TOL).unwrap();
        assert_eq!(ps.matrix(), &CMatrix::identity(2));
        assert_eq!(pu.rank(), 0);
        assert!(matches!(
            spectral_split(&a, SpectralHalf::Unstable, GAP_TOL),
            Err(KatoError::EmptySubspace)
        ));
    }

    #[test]
    fn non_square_is_usage_error() {
        let a = CMatrix::zeros(2, 3);
        let err = spectral_split(&a, SpectralHalf::Stable, GAP_TOL).unwrap_err();
        assert!(!err.is_numerical());
    }
}
