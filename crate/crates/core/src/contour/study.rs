use serde::Serialize;

use super::{continue_basis, ContourSpec, RunOptions};
use crate::error::{KatoError, Result};
use crate::matrix::{fro_norm, CMatrix};
use crate::oracle::{integrate_kato, OracleConfig};
use crate::problems::ProjectorFamily;
use crate::schemes::SchemeSpec;

#[derive(Debug, Clone)]
pub struct StudyConfig {
    /// Coarsest `L`; level `i` uses `base_steps * 2^i`.
    pub base_steps: usize,
    /// Number of doublings; the study runs `refinements + 1` meshes.
    pub refinements: usize,
    /// Reference integrator for `oracle_error`; `None` skips it.
    pub oracle: Option<OracleConfig>,
    pub run: RunOptions,
    /// Run refinement levels on separate threads.
    pub parallel: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            base_steps: 64,
            refinements: 4,
            oracle: Some(OracleConfig::default()),
            run: RunOptions::default(),
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    #[serde(rename = "L")]
    pub steps: usize,
    pub closure_error: Option<f64>,
    pub oracle_error: Option<f64>,
    pub p_evals: u64,
    pub p_evals_computed: u64,
    pub mat_mults: u64,
    /// `log2(e(L/2) / e(L))`; absent on the coarsest level.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyTable {
    pub scheme: String,
    pub nominal_order: u32,
    pub rows: Vec<StudyRow>,
    pub median_order: Option<f64>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

fn run_level(
    family: &dyn ProjectorFamily,
    scheme: &SchemeSpec,
    contour: &ContourSpec,
    r0: &CMatrix,
    steps: usize,
    cfg: &StudyConfig,
) -> Result<StudyRow> {
    let mesh = contour.with_steps(steps).mesh()?;
    let rep = continue_basis(family, scheme, &mesh, r0, &cfg.run)?;
    let oracle_error = match &cfg.oracle {
        Some(oc) => {
            let frames = integrate_kato(family, &mesh, rep.initial(), oc)?;
            Some(fro_norm(&(rep.last() - &frames[frames.len() - 1].r)))
        }
        None => None,
    };
    Ok(StudyRow {
        steps,
        closure_error: rep.closure_error,
        oracle_error,
        p_evals: rep.counters.p_evals,
        p_evals_computed: rep.counters.p_evals_computed,
        mat_mults: rep.counters.mat_mults,
        order: None,
    })
}

/// Runs `scheme` on `L, 2L, 4L, ...` and fits the observed order from
/// successive error ratios: closure errors on closed contours, oracle
/// errors otherwise.
pub fn convergence_study(
    family: &dyn ProjectorFamily,
    scheme: &SchemeSpec,
    contour: &ContourSpec,
    r0: &CMatrix,
    cfg: &StudyConfig,
) -> Result<StudyTable> {
    if cfg.refinements < 2 {
        return Err(KatoError::InvalidArgument(format!(
            "a convergence study needs at least 2 refinements, got {}",
            cfg.refinements
        )));
    }
    if cfg.base_steps == 0 {
        return Err(KatoError::InvalidArgument("base_steps must be positive".into()));
    }
    let levels: Vec<usize> = (0..=cfg.refinements).map(|i| cfg.base_steps << i).collect();
    let results: Vec<Result<StudyRow>> = if cfg.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = levels
                .iter()
                .map(|&l| s.spawn(move || run_level(family, scheme, contour, r0, l, cfg)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("study worker panicked"))
                .collect()
        })
    } else {
        levels
            .iter()
            .map(|&l| run_level(family, scheme, contour, r0, l, cfg))
            .collect()
    };
    let mut rows = results.into_iter().collect::<Result<Vec<_>>>()?;

    let closed = contour.mesh()?.closed();
    let error_of = |row: &StudyRow| if closed { row.closure_error } else { row.oracle_error };
    for i in 1..rows.len() {
        rows[i].order = match (error_of(&rows[i - 1]), error_of(&rows[i])) {
            (Some(coarse), Some(fine)) if coarse > 0.0 && fine > 0.0 => Some((coarse / fine).log2()),
            _ => None,
        };
    }
    let orders: Vec<f64> = rows.iter().filter_map(|r| r.order).collect();
    Ok(StudyTable {
        scheme: scheme.id(),
        nominal_order: scheme.nominal_order(),
        median_order: median(&orders),
        rows,
    })
}

/// Smallest `L` (searched dyadically from `start`, then by bisection) at
/// which the closure error drops to `tol`. `None` if `max_steps` is not
/// enough.
#[allow(clippy::too_many_arguments)]
pub fn steps_to_tolerance(
    family: &dyn ProjectorFamily,
    scheme: &SchemeSpec,
    contour: &ContourSpec,
    r0: &CMatrix,
    tol: f64,
    start: usize,
    max_steps: usize,
    run: &RunOptions,
) -> Result<Option<usize>> {
    let closure_at = |l: usize| -> Result<f64> {
        let mesh = contour.with_steps(l).mesh()?;
        if !mesh.closed() {
            return Err(KatoError::InvalidArgument(
                "steps-to-tolerance needs a closed contour".into(),
            ));
        }
        let rep = continue_basis(family, scheme, &mesh, r0, run)?;
        Ok(rep.closure_error.unwrap_or(f64::INFINITY))
    };
    let mut hi = start.max(3);
    if closure_at(hi)? <= tol {
        // already good at the start; walk down to the smallest passing L
        let mut lo = 3;
        if closure_at(lo)? <= tol {
            return Ok(Some(lo));
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if closure_at(mid)? <= tol {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return Ok(Some(hi));
    }
    let mut lo = hi;
    loop {
        hi = lo * 2;
        if hi > max_steps {
            return Ok(None);
        }
        if closure_at(hi)? <= tol {
            break;
        }
        lo = hi;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if closure_at(mid)? <= tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}
