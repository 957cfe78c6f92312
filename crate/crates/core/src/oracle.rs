//! Reference solutions: classical fourth-order Runge-Kutta integration of
//! Kato's equation `R' = (P'P - PP')R` and of the reduced form `R' = P'R`
//! along each mesh chord, plus the checks that the reduced solution stays in
//! `range P`, moves only in `ker P`, and solves the full equation.

use num_complex::Complex64;
use serde::Serialize;

use crate::contour::{chord_point, BasisFrame, Mesh};
use crate::error::{KatoError, Result};
use crate::matrix::{fro_norm, numerical_rank, CMatrix};
use crate::problems::ProjectorFamily;

/// Default relative step for central differences: `h = 1e-6 (1 + |λ|)`.
pub const FD_REL_STEP: f64 = 1e-6;

/// How the right-hand side obtains `P'(λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DerivativeMode {
    /// The family's closed-form derivative; central differences when the
    /// family has none.
    Exact,
    /// Always central differences with step `rel_step (1 + |λ|)`.
    CentralFd { rel_step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleConfig {
    pub substeps_per_segment: usize,
    pub derivative: DerivativeMode,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            substeps_per_segment: 64,
            derivative: DerivativeMode::Exact,
        }
    }
}

/// Right-hand side of the full or reduced equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KatoForm {
    /// `R' = (P'P - PP')R`
    Full,
    /// `R' = P'R`
    Reduced,
}

/// `P'(λ)`, differentiating along `direction` (unit modulus) when falling
/// back to finite differences. For an analytic family every direction gives
/// the same complex derivative.
pub fn derivative(
    family: &dyn ProjectorFamily,
    lambda: Complex64,
    direction: Complex64,
    mode: DerivativeMode,
) -> Result<CMatrix> {
    let rel = match mode {
        DerivativeMode::Exact => {
            if let Some(d) = family.deriv(lambda) {
                return d;
            }
            FD_REL_STEP
        }
        DerivativeMode::CentralFd { rel_step } => rel_step,
    };
    let dir = if direction.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        direction / direction.norm()
    };
    let step = dir * (rel * (1.0 + lambda.norm()));
    let plus = family.eval(lambda + step)?;
    let minus = family.eval(lambda - step)?;
    let scale = Complex64::new(1.0, 0.0) / (step * 2.0);
    Ok((plus.matrix() - minus.matrix()).scale(scale))
}

/// Generator `G(λ)` with `dR/dλ = G R`.
fn generator(
    family: &dyn ProjectorFamily,
    lambda: Complex64,
    direction: Complex64,
    cfg: &OracleConfig,
    form: KatoForm,
) -> Result<CMatrix> {
    let dp = derivative(family, lambda, direction, cfg.derivative)?;
    match form {
        KatoForm::Reduced => Ok(dp),
        KatoForm::Full => {
            let p = family.eval(lambda)?.into_matrix();
            Ok(&(&dp * &p) - &(&p * &dp))
        }
    }
}

/// RK4 for `dR/dλ = G(λ) R` along every chord of `mesh`. Frames are reported
/// at the mesh points. The initial basis is used as given: callers that need
/// `P(λ₀) r0 = r0` must check it themselves.
pub fn integrate(
    family: &dyn ProjectorFamily,
    mesh: &Mesh,
    r0: &CMatrix,
    cfg: &OracleConfig,
    form: KatoForm,
) -> Result<Vec<BasisFrame>> {
    if cfg.substeps_per_segment == 0 {
        return Err(KatoError::InvalidArgument(
            "substeps_per_segment must be at least 1".into(),
        ));
    }
    if r0.rows() != family.dim() {
        return Err(KatoError::DimensionMismatch {
            op: "integrate",
            left: (family.dim(), family.rank()),
            right: r0.shape(),
        });
    }
    let s = cfg.substeps_per_segment;
    let h = 1.0 / s as f64;
    let mut frames = Vec::with_capacity(mesh.points().len());
    frames.push(BasisFrame {
        lambda: mesh.start(),
        r: r0.clone(),
    });
    let mut r = r0.clone();
    for seg in mesh.points().windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let delta = b - a;
        let g_at =
            |t: f64| -> Result<CMatrix> { Ok(generator(family, chord_point(a, b, t), delta, cfg, form)?.scale(delta)) };
        let mut g_start = g_at(0.0)?;
        for i in 0..s {
            let t = i as f64 * h;
            let g_mid = g_at(t + 0.5 * h)?;
            let g_end = g_at(if i + 1 == s { 1.0 } else { t + h })?;
            let k1 = &g_start * &r;
            let k2 = &g_mid * &r.axpby(1.0, &k1, 0.5 * h);
            let k3 = &g_mid * &r.axpby(1.0, &k2, 0.5 * h);
            let k4 = &g_end * &r.axpby(1.0, &k3, h);
            let incr = k1.axpby(1.0, &k2, 2.0).axpby(1.0, &k3, 2.0).axpby(1.0, &k4, 1.0);
            r = r.axpby(1.0, &incr, h / 6.0);
            if !r.is_finite() {
                return Err(KatoError::NonFiniteState {
                    lambda: chord_point(a, b, t + h),
                });
            }
            g_start = g_end;
        }
        frames.push(BasisFrame {
            lambda: b,
            r: r.clone(),
        });
    }
    Ok(frames)
}

/// Reference solution of `R' = (P'P - PP')R`.
pub fn integrate_kato(
    family: &dyn ProjectorFamily,
    mesh: &Mesh,
    r0: &CMatrix,
    cfg: &OracleConfig,
) -> Result<Vec<BasisFrame>> {
    integrate(family, mesh, r0, cfg, KatoForm::Full)
}

/// Reference solution of `R' = P'R`.
pub fn integrate_reduced_kato(
    family: &dyn ProjectorFamily,
    mesh: &Mesh,
    r0: &CMatrix,
    cfg: &OracleConfig,
) -> Result<Vec<BasisFrame>> {
    integrate(family, mesh, r0, cfg, KatoForm::Reduced)
}

/// Residuals of the reduced solution; all vanish in exact arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prop1Report {
    /// `max_j |P R - R|_F` at the mesh points.
    pub pr_minus_r: f64,
    /// `max_j |P P' R|_F`, i.e. `|P R'|` with `R' = P'R`.
    pub p_rprime: f64,
    /// Endpoint gap between the full and reduced integrations.
    pub kato_vs_reduced: f64,
    pub rank_constant: bool,
}

/// Integrates the reduced equation densely and measures how well the three
/// properties hold: `PR = R`, `PR' = 0`, and agreement with the full
/// equation.
pub fn verify_prop1(
    family: &dyn ProjectorFamily,
    mesh: &Mesh,
    r0: &CMatrix,
    cfg: &OracleConfig,
) -> Result<Prop1Report> {
    let p0 = family.eval(mesh.start())?;
    let tol = 1e-8 * (1.0 + fro_norm(r0));
    let residual = fro_norm(&(p0.matrix() * r0 - r0));
    if residual > tol {
        return Err(KatoError::InitNotInRange { residual, tol });
    }
    let reduced = integrate_reduced_kato(family, mesh, r0, cfg)?;
    let full = integrate_kato(family, mesh, r0, cfg)?;
    let k = numerical_rank(r0, 1e-8);
    let pts = mesh.points();
    let mut pr_minus_r = 0.0f64;
    let mut p_rprime = 0.0f64;
    let mut rank_constant = true;
    for (j, frame) in reduced.iter().enumerate() {
        let p = family.eval(frame.lambda)?.into_matrix();
        let dir = if j + 1 < pts.len() {
            pts[j + 1] - pts[j]
        } else {
            pts[j] - pts[j - 1]
        };
        let dp = derivative(family, frame.lambda, dir, cfg.derivative)?;
        pr_minus_r = pr_minus_r.max(fro_norm(&(&p * &frame.r - &frame.r)));
        p_rprime = p_rprime.max(fro_norm(&(&p * &(&dp * &frame.r))));
        rank_constant &= numerical_rank(&frame.r, 1e-8) == k;
    }
    let kato_vs_reduced = fro_norm(&(&reduced[reduced.len() - 1].r - &full[full.len() - 1].r));
    Ok(Prop1Report {
        pr_minus_r,
        p_rprime,
        kato_vs_reduced,
        rank_constant,
    })
}

/// `max |P P' P|_F / (1 + |P'|_F)` over `samples`.
pub fn check_pprop(family: &dyn ProjectorFamily, samples: &[Complex64], mode: DerivativeMode) -> Result<f64> {
    let mut worst = 0.0f64;
    for &z in samples {
        let p = family.eval(z)?.into_matrix();
        let dp = derivative(family, z, Complex64::new(1.0, 0.0), mode)?;
        let ppp = &(&p * &dp) * &p;
        worst = worst.max(fro_norm(&ppp) / (1.0 + fro_norm(&dp)));
    }
    Ok(worst)
}
