//! Analytic projector families `λ ↦ P(λ)` with known structure, used as
//! ground truth for every continuation scheme.
//!
//! Problem ids understood by [`lookup`]:
//!
//! | id                      | n | k | derivative    |
//! |-------------------------|---|---|---------------|
//! | `moebius`               | 2 | 1 | exact         |
//! | `rank1`                 | 2 | 1 | exact         |
//! | `evans-toy`             | 2 | 1 | finite diff.  |
//! | `random:<seed>:<n>:<k>` | n | k | exact         |

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::contour::ContourSpec;
use crate::error::{KatoError, Result};
use crate::matrix::{fro_norm, inverse, matmul, CMatrix};
use crate::spectral::{schur, stable_projector, Projector, SpectralHalf, GAP_TOL};

/// An analytic family of rank-`k` projectors on `C^n`.
pub trait ProjectorFamily: Send + Sync {
    fn dim(&self) -> usize;
    fn rank(&self) -> usize;
    fn eval(&self, lambda: Complex64) -> Result<Projector>;
    /// Exact complex derivative `P'(λ)`, when the family has one in closed form.
    fn deriv(&self, _lambda: Complex64) -> Option<Result<CMatrix>> {
        None
    }
    fn has_exact_deriv(&self) -> bool {
        false
    }
    /// Human-readable description of the domain and its singularities.
    fn domain_note(&self) -> String;
}

impl fmt::Debug for dyn ProjectorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ProjectorFamily(n={}, k={}, {})",
            self.dim(),
            self.rank(),
            self.domain_note()
        )
    }
}

/// A registered problem: the family plus a default basepoint and contour.
#[derive(Clone)]
pub struct ProblemSpec {
    pub id: String,
    pub family: Arc<dyn ProjectorFamily>,
    pub basepoint: Complex64,
    pub contour: ContourSpec,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("id", &self.id)
            .field("family", &self.family)
            .field("basepoint", &self.basepoint)
            .field("contour", &self.contour)
            .finish()
    }
}

impl ProblemSpec {
    /// Deterministic sample points inside the disk bounded by the suggested
    /// contour (or a unit disk about the basepoint for polylines).
    pub fn sample_points(&self, seed: u64, count: usize) -> Vec<Complex64> {
        let (center, radius) = match &self.contour {
            ContourSpec::Circle { center, radius, .. } => (*center, *radius),
            ContourSpec::Polyline { .. } => (self.basepoint, 0.5),
        };
        let mut rng = SplitMix64::new(seed);
        (0..count)
            .map(|_| {
                let r = radius * rng.next_f64().sqrt();
                let theta = std::f64::consts::TAU * rng.next_f64();
                center + Complex64::from_polar(r, theta)
            })
            .collect()
    }
}

/// SplitMix64 (Steele, Lea & Flood), the 64-bit generator used to seed and
/// draw the random-analytic families. Fixed constants make streams portable:
///
/// ```text
/// state += 0x9E3779B97F4A7C15
/// z = state
/// z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
/// z = (z ^ (z >> 27)) * 0x94D049BB133111EB
/// return z ^ (z >> 31)
/// ```
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-1, 1)`.
    pub fn next_signed(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }

    /// Real and imaginary parts each uniform in `[-1, 1)`, real part first.
    pub fn next_complex(&mut self) -> Complex64 {
        let re = self.next_signed();
        let im = self.next_signed();
        Complex64::new(re, im)
    }

    pub fn matrix(&mut self, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| self.next_complex())
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `P(λ) ≡ P₀`. Not in the registry; used to check that every scheme is
/// exact on constant coefficients.
#[derive(Debug, Clone)]
pub struct ConstantFamily {
    p: Projector,
}

impl ConstantFamily {
    pub fn new(p: Projector) -> Self {
        ConstantFamily { p }
    }
}

impl ProjectorFamily for ConstantFamily {
    fn dim(&self) -> usize {
        self.p.dim()
    }
    fn rank(&self) -> usize {
        self.p.rank()
    }
    fn eval(&self, _lambda: Complex64) -> Result<Projector> {
        Ok(self.p.clone())
    }
    fn deriv(&self, _lambda: Complex64) -> Option<Result<CMatrix>> {
        Some(Ok(CMatrix::zeros(self.dim(), self.dim())))
    }
    fn has_exact_deriv(&self) -> bool {
        true
    }
    fn domain_note(&self) -> String {
        "entire (constant)".into()
    }
}

/// `P(λ) = [[1, -λ], [0, 0]]`, the conjugation of `diag(1, 0)` by `[[1, λ], [0, 1]]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moebius;

impl ProjectorFamily for Moebius {
    fn dim(&self) -> usize {
        2
    }
    fn rank(&self) -> usize {
        1
    }
    fn eval(&self, lambda: Complex64) -> Result<Projector> {
        let p = CMatrix::from_vec(2, 2, vec![c(1.0, 0.0), -lambda, c(0.0, 0.0), c(0.0, 0.0)])?;
        Projector::new(p, 1)
    }
    fn deriv(&self, _lambda: Complex64) -> Option<Result<CMatrix>> {
        Some(CMatrix::from_vec(
            2,
            2,
            vec![c(0.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        ))
    }
    fn has_exact_deriv(&self) -> bool {
        true
    }
    fn domain_note(&self) -> String {
        "entire".into()
    }
}

/// `P(λ) = v vᵀ / (1 + λ²)` with `v = (1, λ)`: bilinear, so analytic in λ.
/// Singular at `±i`; the declared domain is the open unit disk.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rank1;

impl Rank1 {
    const RADIUS: f64 = 1.0;

    fn check(&self, lambda: Complex64) -> Result<Complex64> {
        let d = c(1.0, 0.0) + lambda * lambda;
        if lambda.norm() >= Self::RADIUS || !lambda.is_finite() {
            return Err(KatoError::DomainViolation {
                lambda,
                note: self.domain_note(),
            });
        }
        Ok(d)
    }
}

impl ProjectorFamily for Rank1 {
    fn dim(&self) -> usize {
        2
    }
    fn rank(&self) -> usize {
        1
    }
    fn eval(&self, lambda: Complex64) -> Result<Projector> {
        let d = self.check(lambda)?;
        let inv = c(1.0, 0.0) / d;
        let p = CMatrix::from_vec(2, 2, vec![inv, lambda * inv, lambda * inv, lambda * lambda * inv])?;
        Projector::new(p, 1)
    }
    fn deriv(&self, lambda: Complex64) -> Option<Result<CMatrix>> {
        Some(self.check(lambda).and_then(|d| {
            // P = N/d, N = [[1, λ], [λ, λ²]], d = 1 + λ²
            let inv = c(1.0, 0.0) / d;
            let inv2 = inv * inv;
            let two_l = lambda * 2.0;
            let entry = |n: Complex64, dn: Complex64| dn * inv - n * two_l * inv2;
            CMatrix::from_vec(
                2,
                2,
                vec![
                    entry(c(1.0, 0.0), c(0.0, 0.0)),
                    entry(lambda, c(1.0, 0.0)),
                    entry(lambda, c(1.0, 0.0)),
                    entry(lambda * lambda, two_l),
                ],
            )
        }))
    }
    fn has_exact_deriv(&self) -> bool {
        true
    }
    fn domain_note(&self) -> String {
        "open unit disk |λ| < 1 (poles at ±i)".into()
    }
}

/// Stable eigenprojection of `A(λ) = [[0, 1], [λ, 0]]` (eigenvalues `±√λ`).
#[derive(Debug, Clone, Copy)]
pub struct EvansToy {
    pub gap_tol: f64,
}

impl Default for EvansToy {
    fn default() -> Self {
        EvansToy { gap_tol: GAP_TOL }
    }
}

impl EvansToy {
    pub fn coefficient(lambda: Complex64) -> CMatrix {
        CMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => c(1.0, 0.0),
            (1, 0) => lambda,
            _ => c(0.0, 0.0),
        })
    }
}

impl ProjectorFamily for EvansToy {
    fn dim(&self) -> usize {
        2
    }
    fn rank(&self) -> usize {
        1
    }
    fn eval(&self, lambda: Complex64) -> Result<Projector> {
        if lambda.im == 0.0 && lambda.re <= 0.0 || !lambda.is_finite() {
            return Err(KatoError::DomainViolation {
                lambda,
                note: self.domain_note(),
            });
        }
        stable_projector(&Self::coefficient(lambda), SpectralHalf::Stable, self.gap_tol)
    }
    fn domain_note(&self) -> String {
        "C minus the branch cut (-inf, 0]".into()
    }
}

/// `P(λ) = M(λ) diag(I_k, 0) M(λ)^{-1}`, `M(λ) = M₀ + λM₁ + λ²M₂` with
/// seeded pseudo-random coefficients.
#[derive(Debug, Clone)]
pub struct RandomAnalytic {
    n: usize,
    k: usize,
    m0: CMatrix,
    m1: CMatrix,
    m2: CMatrix,
    radius: f64,
}

impl RandomAnalytic {
    /// Condition-number bound enforced on `M₀`.
    pub const MAX_COND: f64 = 10.0;
    const M0_SPREAD: f64 = 0.4;
    const M1_SCALE: f64 = 0.6;
    const M2_SCALE: f64 = 0.3;

    pub fn new(seed: u64, n: usize, k: usize) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(KatoError::InvalidArgument(format!(
                "random family needs 1 <= k < n, got n={n}, k={k}"
            )));
        }
        let mut rng = SplitMix64::new(seed);
        let spread = Self::M0_SPREAD / (n as f64).sqrt();
        let mut attempts = 0;
        let (m0, sigma_min) = loop {
            attempts += 1;
            let g = rng.matrix(n, n);
            let m0 = &CMatrix::identity(n) + &g.scale_re(spread);
            let (smin, smax) = singular_value_range(&m0)?;
            if smin > 0.0 && smax / smin < Self::MAX_COND {
                break (m0, smin);
            }
            if attempts > 1000 {
                return Err(KatoError::InvalidArgument(
                    "could not draw a well-conditioned M0".into(),
                ));
            }
        };
        let m1 = rng.matrix(n, n).scale_re(Self::M1_SCALE / (n as f64).sqrt());
        let m2 = rng.matrix(n, n).scale_re(Self::M2_SCALE / (n as f64).sqrt());
        // |M(λ) - M0|_2 <= ρ|M1|_F + ρ²|M2|_F <= σ_min(M0) / 2 keeps M invertible.
        let (a, b) = (fro_norm(&m2), fro_norm(&m1));
        let target = 0.5 * sigma_min;
        let radius = if a == 0.0 {
            target / b
        } else {
            (-b + (b * b + 4.0 * a * target).sqrt()) / (2.0 * a)
        };
        Ok(RandomAnalytic {
            n,
            k,
            m0,
            m1,
            m2,
            radius,
        })
    }

    /// Radius of the disk about 0 on which `M(λ)` is guaranteed invertible.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn m_at(&self, lambda: Complex64) -> CMatrix {
        let l2 = lambda * lambda;
        CMatrix::from_fn(self.n, self.n, |i, j| {
            self.m0[(i, j)] + lambda * self.m1[(i, j)] + l2 * self.m2[(i, j)]
        })
    }

    fn dm_at(&self, lambda: Complex64) -> CMatrix {
        let two_l = lambda * 2.0;
        CMatrix::from_fn(self.n, self.n, |i, j| self.m1[(i, j)] + two_l * self.m2[(i, j)])
    }

    fn check(&self, lambda: Complex64) -> Result<()> {
        if lambda.norm() >= self.radius || !lambda.is_finite() {
            return Err(KatoError::DomainViolation {
                lambda,
                note: self.domain_note(),
            });
        }
        Ok(())
    }

    /// `M diag(I_k,0) M^{-1} = M[:, :k] (M^{-1})[:k, :]`.
    fn project(&self, m: &CMatrix, minv: &CMatrix) -> CMatrix {
        let lead: Vec<usize> = (0..self.k).collect();
        let left = m.select_columns(&lead);
        let right = CMatrix::from_fn(self.k, self.n, |i, j| minv[(i, j)]);
        &left * &right
    }
}

impl ProjectorFamily for RandomAnalytic {
    fn dim(&self) -> usize {
        self.n
    }
    fn rank(&self) -> usize {
        self.k
    }
    fn eval(&self, lambda: Complex64) -> Result<Projector> {
        self.check(lambda)?;
        let m = self.m_at(lambda);
        let minv = inverse(&m)?;
        Projector::new(self.project(&m, &minv), self.k)
    }
    fn deriv(&self, lambda: Complex64) -> Option<Result<CMatrix>> {
        Some(self.check(lambda).and_then(|_| {
            // P' = M' D M^{-1} - M D M^{-1} M' M^{-1} = (M' D M^{-1}) - P M' M^{-1}
            let m = self.m_at(lambda);
            let dm = self.dm_at(lambda);
            let minv = inverse(&m)?;
            let p = self.project(&m, &minv);
            let first = self.project(&dm, &minv);
            let second = matmul(&p, &matmul(&dm, &minv)?)?;
            Ok(&first - &second)
        }))
    }
    fn has_exact_deriv(&self) -> bool {
        true
    }
    fn domain_note(&self) -> String {
        format!("disk |λ| < {:.6} where M(λ) stays invertible", self.radius)
    }
}

/// Extreme singular values of a square matrix, from the Hermitian
/// eigenvalues of `M* M`.
fn singular_value_range(m: &CMatrix) -> Result<(f64, f64)> {
    let gram = &m.adjoint() * m;
    let s = schur(&gram)?;
    let eigs: Vec<f64> = s.eigenvalues().iter().map(|z| z.re.max(0.0).sqrt()).collect();
    let lo = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eigs.iter().copied().fold(0.0, f64::max);
    Ok((lo, hi))
}

pub const DEFAULT_STEPS: usize = 256;

pub fn family_moebius() -> ProblemSpec {
    ProblemSpec {
        id: "moebius".into(),
        family: Arc::new(Moebius),
        basepoint: c(1.0, 0.0),
        contour: ContourSpec::Circle {
            center: c(0.0, 0.0),
            radius: 1.0,
            steps: DEFAULT_STEPS,
        },
    }
}

pub fn family_rank1() -> ProblemSpec {
    ProblemSpec {
        id: "rank1".into(),
        family: Arc::new(Rank1),
        basepoint: c(0.5, 0.0),
        contour: ContourSpec::Circle {
            center: c(0.0, 0.0),
            radius: 0.5,
            steps: DEFAULT_STEPS,
        },
    }
}

pub fn family_evans_toy() -> ProblemSpec {
    ProblemSpec {
        id: "evans-toy".into(),
        family: Arc::new(EvansToy::default()),
        basepoint: c(1.5, 0.0),
        contour: ContourSpec::Circle {
            center: c(1.0, 0.0),
            radius: 0.5,
            steps: DEFAULT_STEPS,
        },
    }
}

pub fn family_random_analytic(seed: u64, n: usize, k: usize) -> Result<ProblemSpec> {
    let fam = RandomAnalytic::new(seed, n, k)?;
    let radius = 0.5 * fam.radius();
    Ok(ProblemSpec {
        id: format!("random:{seed}:{n}:{k}"),
        family: Arc::new(fam),
        basepoint: c(radius, 0.0),
        contour: ContourSpec::Circle {
            center: c(0.0, 0.0),
            radius,
            steps: DEFAULT_STEPS,
        },
    })
}

/// Fixed-id problems, in listing order.
pub const BUILTIN_IDS: [&str; 3] = ["moebius", "rank1", "evans-toy"];

/// Resolves a problem id (see the module docs for the grammar).
pub fn lookup(id: &str) -> Result<ProblemSpec> {
    match id {
        "moebius" => Ok(family_moebius()),
        "rank1" => Ok(family_rank1()),
        "evans-toy" => Ok(family_evans_toy()),
        other => {
            if let Some(rest) = other.strip_prefix("random:") {
                let parts: Vec<&str> = rest.split(':').collect();
                if parts.len() != 3 {
                    return Err(KatoError::Parse(format!(
                        "expected random:<seed>:<n>:<k>, got {other:?}"
                    )));
                }
                let num = |s: &str, what: &str| {
                    s.parse::<u64>()
                        .map_err(|_| KatoError::Parse(format!("bad {what} {s:?} in {other:?}")))
                };
                let seed = num(parts[0], "seed")?;
                let n = num(parts[1], "n")? as usize;
                let k = num(parts[2], "k")? as usize;
                family_random_analytic(seed, n, k)
            } else {
                Err(KatoError::InvalidArgument(format!(
                    "unknown problem {other:?}; known: {}, random:<seed>:<n>:<k>",
                    BUILTIN_IDS.join(", ")
                )))
            }
        }
    }
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
    fn splitmix_reference_stream() {
        // first outputs of SplitMix64 seeded with 0
        let mut rng = SplitMix64::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn moebius_examples() {
        let f = Moebius;
        assert_eq!(
            f.eval(c(0.0, 0.0)).unwrap().matrix(),
            &real(&[&[1.0, 0.0], &[0.0, 0.0]])
        );
        let e1 = real(&[&[1.0], &[0.0]]);
        assert_eq!(f.eval(c(0.1, 0.0)).unwrap().matrix() * &e1, e1);
        let p = f.eval(c(1.0, 2.0)).unwrap();
        assert_eq!(p.matrix() * p.matrix(), *p.matrix());
    }

    #[test]
    fn rank1_examples() {
        let f = Rank1;
        assert_eq!(
            f.eval(c(0.0, 0.0)).unwrap().matrix(),
            &real(&[&[1.0, 0.0], &[0.0, 0.0]])
        );
        let p = f.eval(c(0.5, 0.0)).unwrap();
        assert!(dist(p.matrix(), &real(&[&[0.8, 0.4], &[0.4, 0.2]])) < 1e-15);
        assert!(matches!(f.eval(c(0.0, 1.0)), Err(KatoError::DomainViolation { .. })));
        assert!(matches!(f.eval(c(0.0, -1.0)), Err(KatoError::DomainViolation { .. })));
    }

    #[test]
    fn evans_toy_examples() {
        let f = EvansToy::default();
        let p = f.eval(c(1.0, 0.0)).unwrap();
        // range (1,-1), kernel (1,1)
        let r = real(&[&[1.0], &[-1.0]]);
        let k = real(&[&[1.0], &[1.0]]);
        assert!(dist(&(p.matrix() * &r), &r) < 1e-14);
        assert!(fro_norm(&(p.matrix() * &k)) < 1e-14);

        let p = f.eval(c(4.0, 0.0)).unwrap();
        let r = real(&[&[1.0], &[-2.0]]);
        assert!(dist(&(p.matrix() * &r), &r) < 1e-14);

        let p = f.eval(c(1.0, 0.3)).unwrap();
        assert!(p.is_idempotent(1e-10));
        assert!(f.eval(c(-1.0, 0.0)).is_err());
    }

    #[test]
    fn random_family_is_deterministic() {
        let a = RandomAnalytic::new(7, 4, 2).unwrap();
        let b = RandomAnalytic::new(7, 4, 2).unwrap();
        let z = c(0.1, -0.05);
        assert_eq!(a.eval(z).unwrap(), b.eval(z).unwrap());
        assert_eq!(a.radius().to_bits(), b.radius().to_bits());
        assert_ne!(
            RandomAnalytic::new(8, 4, 2).unwrap().eval(z).unwrap(),
            a.eval(z).unwrap()
        );
    }

    #[test]
    fn random_family_rank_at_zero() {
        for seed in 1..=5 {
            let f = RandomAnalytic::new(seed, 5, 3).unwrap();
            let p = f.eval(c(0.0, 0.0)).unwrap();
            assert_eq!(crate::matrix::numerical_rank(p.matrix(), 1e-8), 3);
            assert!(p.is_idempotent(1e-12));
        }
    }

    #[test]
    fn random_family_rejects_bad_ranks() {
        assert!(RandomAnalytic::new(1, 3, 0).is_err());
        assert!(RandomAnalytic::new(1, 3, 3).is_err());
    }

    #[test]
    fn lookup_ids() {
        for id in BUILTIN_IDS {
            assert_eq!(lookup(id).unwrap().id, id);
        }
        assert_eq!(lookup("random:1:4:2").unwrap().family.dim(), 4);
        assert!(lookup("nosuch").is_err());
        assert!(lookup("random:1:4").is_err());
        assert!(lookup("random:x:4:2").is_err());
    }

    #[test]
    fn sample_points_inside_contour() {
        let spec = family_rank1();
        let pts = spec.sample_points(3, 32);
        assert_eq!(pts.len(), 32);
        assert!(pts.iter().all(|z| z.norm() <= 0.5));
    }
}
