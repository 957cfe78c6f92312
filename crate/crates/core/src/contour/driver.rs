use num_complex::Complex64;
use serde::Serialize;

use super::Mesh;
use crate::error::{KatoError, Result};
use crate::matrix::{fro_norm, numerical_rank, orthonormalize, range_basis, CMatrix};
use crate::problems::ProjectorFamily;
use crate::schemes::{Counters, SchemeSpec, StepContext};

/// Threshold, relative to the largest pivot, below which a basis column is
/// counted as lost.
pub const RANK_COLLAPSE_TOL: f64 = 1e-8;

/// What to do when the initial basis is not in `range P(λ₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitPolicy {
    /// Fail with `InitNotInRange`.
    Require,
    /// Replace `r0` by `orthonormalize(P(λ₀) r0)`.
    Project,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub init_policy: InitPolicy,
    /// Absolute tolerance on `|P(λ₀) r0 - r0|_F`; defaults to `1e-8 (1 + |r0|_F)`.
    pub init_tol: Option<f64>,
    /// Reuse `P(λ_{j+1})` as `P_j` of the next step.
    pub share_evaluations: bool,
    /// Record how far each frame is from orthonormal. Diagnostic only: the
    /// frames themselves are never re-normalized.
    pub record_orthonormality: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            init_policy: InitPolicy::Require,
            init_tol: None,
            share_evaluations: true,
            record_orthonormality: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisFrame {
    pub lambda: Complex64,
    pub r: CMatrix,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub frames: Vec<BasisFrame>,
    pub closed: bool,
    /// `|R_L - R_0|_F` on a closed mesh.
    pub closure_error: Option<f64>,
    /// `max_j |P_j R_j - R_j|_F`.
    pub drift: f64,
    /// `max_j |P_j R_j - R_j|_F / |R_j|_F`.
    pub drift_rel: f64,
    pub rank_ok: bool,
    pub counters: Counters,
    /// `max_j |orthonormalize(R_j) - R_j|_F`, when requested.
    pub orthonormality_defect: Option<f64>,
}

impl RunReport {
    pub fn initial(&self) -> &CMatrix {
        &self.frames[0].r
    }

    pub fn last(&self) -> &CMatrix {
        &self.frames[self.frames.len() - 1].r
    }
}

/// `|R_L - R_0|_F`; a usage error on an open mesh.
pub fn closure_error(report: &RunReport) -> Result<f64> {
    report
        .closure_error
        .ok_or_else(|| KatoError::InvalidArgument("closure error is undefined on an open mesh".into()))
}

/// Orthonormal basis of `range P(λ)`, deterministic by the phase convention
/// of [`orthonormalize`].
pub fn auto_basis(family: &dyn ProjectorFamily, lambda: Complex64) -> Result<CMatrix> {
    let p = family.eval(lambda)?;
    range_basis(p.matrix(), p.rank())
}

/// Advances `r0` around `mesh` with `scheme`.
pub fn continue_basis(
    family: &dyn ProjectorFamily,
    scheme: &SchemeSpec,
    mesh: &Mesh,
    r0: &CMatrix,
    opts: &RunOptions,
) -> Result<RunReport> {
    let n = family.dim();
    if r0.rows() != n || r0.cols() > family.rank() {
        return Err(KatoError::DimensionMismatch {
            op: "continue_basis",
            left: (n, family.rank()),
            right: r0.shape(),
        });
    }
    let k = r0.cols();
    if numerical_rank(r0, RANK_COLLAPSE_TOL) < k {
        return Err(KatoError::InvalidArgument("initial basis is not full rank".into()));
    }

    let mut ctx = StepContext::new(family, opts.share_evaluations);
    let points = mesh.points();
    let p0 = ctx.peek(points[0])?;
    let r0 = match opts.init_policy {
        InitPolicy::Require => {
            let tol = opts.init_tol.unwrap_or(1e-8 * (1.0 + fro_norm(r0)));
            let residual = fro_norm(&(&*p0 * r0 - r0));
            if residual > tol {
                return Err(KatoError::InitNotInRange { residual, tol });
            }
            r0.clone()
        }
        InitPolicy::Project => orthonormalize(&(&*p0 * r0))?,
    };

    let mut drift = 0.0f64;
    let mut drift_rel = 0.0f64;
    let mut ortho: Option<f64> = None;
    let mut observe = |p: &CMatrix, r: &CMatrix| -> Result<()> {
        let d = fro_norm(&(p * r - r));
        drift = drift.max(d);
        drift_rel = drift_rel.max(d / fro_norm(r));
        if opts.record_orthonormality {
            let q = orthonormalize(r)?;
            let defect = fro_norm(&(&q - r));
            ortho = Some(ortho.map_or(defect, |o: f64| o.max(defect)));
        }
        Ok(())
    };
    observe(&p0, &r0)?;

    let mut frames = Vec::with_capacity(points.len());
    frames.push(BasisFrame {
        lambda: points[0],
        r: r0,
    });
    for (j, seg) in points.windows(2).enumerate() {
        let (from, to) = (seg[0], seg[1]);
        let current = &frames[j].r;
        ctx.begin_step(from);
        let next = scheme.advance(&mut ctx, from, to, current)?;
        ctx.end_step();
        if !next.is_finite() {
            return Err(KatoError::NonFiniteState { lambda: to });
        }
        let rank = numerical_rank(&next, RANK_COLLAPSE_TOL);
        if rank < k {
            return Err(KatoError::RankCollapse {
                frame: j + 1,
                rank,
                expected: k,
            });
        }
        let p_next = ctx.peek(to)?;
        observe(&p_next, &next)?;
        frames.push(BasisFrame { lambda: to, r: next });
    }

    let closure = mesh
        .closed()
        .then(|| fro_norm(&(&frames[frames.len() - 1].r - &frames[0].r)));
    Ok(RunReport {
        frames,
        closed: mesh.closed(),
        closure_error: closure,
        drift,
        drift_rel,
        rank_ok: true,
        counters: ctx.counters,
        orthonormality_defect: ortho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::mesh_circle;
    use crate::problems::{ConstantFamily, Moebius, Rank1};
    use crate::spectral::Projector;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn e1() -> CMatrix {
        CMatrix::from_real_rows(&[&[1.0], &[0.0]]).unwrap()
    }

    #[test]
    fn constant_family_is_exact_for_every_scheme() {
        let p = CMatrix::from_real_rows(&[&[1.0, 2.0], &[0.0, 0.0]]).unwrap();
        let family = ConstantFamily::new(Projector::new(p, 1).unwrap());
        let mesh = mesh_circle(c(0.3, 0.1), 0.7, 16).unwrap();
        for scheme in SchemeSpec::BUILTIN {
            let rep = continue_basis(&family, &scheme, &mesh, &e1(), &RunOptions::default()).unwrap();
            assert_eq!(closure_error(&rep).unwrap(), 0.0, "{scheme}");
            assert!(rep.frames.iter().all(|f| f.r == e1()));
        }
    }

    #[test]
    fn moebius_greedy_closes_exactly() {
        let mesh = mesh_circle(c(0.0, 0.0), 1.0, 512).unwrap();
        let rep = continue_basis(&Moebius, &SchemeSpec::Greedy1, &mesh, &e1(), &RunOptions::default()).unwrap();
        assert!(closure_error(&rep).unwrap() <= 1e-12);
        assert_eq!(rep.frames.len(), 513);
    }

    #[test]
    fn require_policy_rejects_out_of_range() {
        let mesh = mesh_circle(c(0.0, 0.0), 0.5, 16).unwrap();
        let e2 = CMatrix::from_real_rows(&[&[0.0], &[1.0]]).unwrap();
        let err = continue_basis(&Rank1, &SchemeSpec::Greedy1, &mesh, &e2, &RunOptions::default()).unwrap_err();
        assert!(matches!(err, KatoError::InitNotInRange { .. }));

        let opts = RunOptions {
            init_policy: InitPolicy::Project,
            ..RunOptions::default()
        };
        let e12 = CMatrix::from_real_rows(&[&[1.0], &[1.0]]).unwrap();
        let rep = continue_basis(&Rank1, &SchemeSpec::Greedy1, &mesh, &e12, &opts).unwrap();
        assert!((fro_norm(rep.initial()) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_crossing_is_reported() {
        let mesh = mesh_circle(c(0.0, 0.0), 2.0, 32).unwrap();
        let r0 = auto_basis(&Rank1, mesh.start());
        assert!(matches!(r0, Err(KatoError::DomainViolation { .. })));
    }

    #[test]
    fn open_mesh_has_no_closure() {
        let mesh = Mesh::new(vec![c(0.0, 0.0), c(0.1, 0.0), c(0.2, 0.1)], false).unwrap();
        let rep = continue_basis(&Rank1, &SchemeSpec::Greedy2, &mesh, &e1(), &RunOptions::default()).unwrap();
        assert!(closure_error(&rep).is_err());
        assert_eq!(rep.counters.steps, 2);
    }

    #[test]
    fn orthonormality_is_recorded_not_applied() {
        let mesh = mesh_circle(c(0.0, 0.0), 0.5, 32).unwrap();
        let opts = RunOptions {
            record_orthonormality: true,
            ..RunOptions::default()
        };
        let r0 = auto_basis(&Rank1, mesh.start()).unwrap();
        let rep = continue_basis(&Rank1, &SchemeSpec::Greedy1, &mesh, &r0, &opts).unwrap();
        let defect = rep.orthonormality_defect.unwrap();
        assert!(defect > 1e-3);
        let plain = continue_basis(&Rank1, &SchemeSpec::Greedy1, &mesh, &r0, &RunOptions::default()).unwrap();
        assert_eq!(plain.last(), rep.last());
    }

    #[test]
    fn wrong_shape_is_usage_error() {
        let mesh = mesh_circle(c(0.0, 0.0), 0.5, 8).unwrap();
        let r0 = CMatrix::identity(3);
        let err = continue_basis(&Rank1, &SchemeSpec::Greedy1, &mesh, &r0, &RunOptions::default()).unwrap_err();
        assert!(!err.is_numerical());
    }
}
