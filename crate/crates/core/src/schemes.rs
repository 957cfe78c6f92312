//! One-step advance rules `R_j ↦ R_{j+1}` for the reduced Kato equation
//! `R' = P'R`, and the Richardson combinator that lifts an order-`m` rule to
//! order `m + 1`.
//!
//! Every rule is derivative-free: it only samples `P` at the segment ends and
//! at fractional chord points, and every rule ends with a left factor
//! `P_{j+1}`, so the output lies in `range P_{j+1}`.
//!
//! The `step_*` functions are the bare formulas on explicit projector
//! matrices. [`SchemeSpec::advance`] runs the same formulas through a
//! [`StepContext`], which evaluates the family on demand, shares evaluations
//! between consecutive steps and counts projector evaluations and matrix
//! products.

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::contour::chord_point;
use crate::error::{KatoError, Result};
use crate::matrix::{matmul, CMatrix};
use crate::problems::{ConstantFamily, ProjectorFamily};
use crate::spectral::Projector;

/// Deepest lift the command line accepts (overall order ≤ 4).
pub const MAX_CLI_ORDER: u32 = 4;

/// A discretization of the reduced Kato equation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SchemeSpec {
    /// `R_{j+1} = P_{j+1} R_j`
    Greedy1,
    /// `R_{j+1} = P_{j+1}(I + P_j(I - P_{j+1})) R_j`
    BrZ1,
    /// `R_{j+1} = P_{j+1}(I + ½P_j(I - P_{j+1})) R_j`
    Greedy2,
    /// `R_{j+1} = P_{j+1}(2P_{j+1/2} - I) R_j`
    Rich2,
    /// Richardson extrapolation of `Rich2` in closed form, quarter points.
    Rich3,
    /// Richardson extrapolation of `Greedy2` in closed form, half point.
    Greedy3,
    /// Richardson extrapolation of the inner scheme by operator composition.
    Lifted(Box<SchemeSpec>),
}

impl SchemeSpec {
    pub const BUILTIN: [SchemeSpec; 6] = [
        SchemeSpec::Greedy1,
        SchemeSpec::BrZ1,
        SchemeSpec::Greedy2,
        SchemeSpec::Rich2,
        SchemeSpec::Rich3,
        SchemeSpec::Greedy3,
    ];

    pub fn nominal_order(&self) -> u32 {
        match self {
            SchemeSpec::Greedy1 | SchemeSpec::BrZ1 => 1,
            SchemeSpec::Greedy2 | SchemeSpec::Rich2 => 2,
            SchemeSpec::Rich3 | SchemeSpec::Greedy3 => 3,
            SchemeSpec::Lifted(base) => base.nominal_order() + 1,
        }
    }

    pub fn id(&self) -> String {
        self.to_string()
    }

    /// Projector samples and matrix products for one step, measured by
    /// running the scheme once with nothing shared.
    pub fn cost_signature(&self) -> StepCost {
        let p = Projector::new(CMatrix::identity(1), 1).expect("1x1 identity");
        let family = ConstantFamily::new(p);
        let mut ctx = StepContext::new(&family, false);
        let r = CMatrix::identity(1);
        ctx.begin_step(Complex64::new(0.0, 0.0));
        self.advance(&mut ctx, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), &r)
            .expect("constant family cannot fail");
        ctx.end_step();
        StepCost {
            p_evals: ctx.counters.p_evals,
            mat_mults: ctx.counters.mat_mults,
        }
    }

    /// Advances `r` (an approximation of `R(from)`) to `R(to)` along the chord.
    pub fn advance(&self, ctx: &mut StepContext<'_>, from: Complex64, to: Complex64, r: &CMatrix) -> Result<CMatrix> {
        match self {
            SchemeSpec::Greedy1 => {
                let p_next = ctx.projector(to)?;
                greedy1(&mut ctx.counters, &p_next, r)
            }
            SchemeSpec::BrZ1 => {
                let p_j = ctx.projector(from)?;
                let p_next = ctx.projector(to)?;
                brz1_like(&mut ctx.counters, 1.0, &p_j, &p_next, r)
            }
            SchemeSpec::Greedy2 => {
                let p_j = ctx.projector(from)?;
                let p_next = ctx.projector(to)?;
                brz1_like(&mut ctx.counters, 0.5, &p_j, &p_next, r)
            }
            SchemeSpec::Rich2 => {
                let p_half = ctx.projector(chord_point(from, to, 0.5))?;
                let p_next = ctx.projector(to)?;
                rich2(&mut ctx.counters, &p_half, &p_next, r)
            }
            SchemeSpec::Rich3 => {
                let p_q1 = ctx.projector(chord_point(from, to, 0.25))?;
                let p_half = ctx.projector(chord_point(from, to, 0.5))?;
                let p_q3 = ctx.projector(chord_point(from, to, 0.75))?;
                let p_next = ctx.projector(to)?;
                rich3(&mut ctx.counters, &p_q1, &p_half, &p_q3, &p_next, r)
            }
            SchemeSpec::Greedy3 => {
                let p_j = ctx.projector(from)?;
                let p_half = ctx.projector(chord_point(from, to, 0.5))?;
                let p_next = ctx.projector(to)?;
                greedy3(&mut ctx.counters, &p_j, &p_half, &p_next, r)
            }
            SchemeSpec::Lifted(base) => {
                let (fine, coarse) = richardson_coefficients(base.nominal_order());
                let mid = chord_point(from, to, 0.5);
                let first = base.advance(ctx, from, mid, r)?;
                let twice = base.advance(ctx, mid, to, &first)?;
                let once = base.advance(ctx, from, to, r)?;
                Ok(twice.axpby(fine, &once, -coarse))
            }
        }
    }
}

/// Wraps `base` in one level of Richardson extrapolation.
pub fn richardson_lift(base: SchemeSpec) -> SchemeSpec {
    SchemeSpec::Lifted(Box::new(base))
}

/// Weights `(2^m / (2^m - 1), 1 / (2^m - 1))` on the two-half-step and the
/// single-full-step results when lifting an order-`m` scheme.
pub fn richardson_coefficients(order: u32) -> (f64, f64) {
    let p = 2f64.powi(order as i32);
    (p / (p - 1.0), 1.0 / (p - 1.0))
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeSpec::Greedy1 => f.write_str("greedy1"),
            SchemeSpec::BrZ1 => f.write_str("brz1"),
            SchemeSpec::Greedy2 => f.write_str("greedy2"),
            SchemeSpec::Rich2 => f.write_str("rich2"),
            SchemeSpec::Rich3 => f.write_str("rich3"),
            SchemeSpec::Greedy3 => f.write_str("greedy3"),
            SchemeSpec::Lifted(base) => write!(f, "lift:{base}"),
        }
    }
}

impl FromStr for SchemeSpec {
    type Err = KatoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy1" => Ok(SchemeSpec::Greedy1),
            "brz1" => Ok(SchemeSpec::BrZ1),
            "greedy2" => Ok(SchemeSpec::Greedy2),
            "rich2" => Ok(SchemeSpec::Rich2),
            "rich3" => Ok(SchemeSpec::Rich3),
            "greedy3" => Ok(SchemeSpec::Greedy3),
            other => match other.strip_prefix("lift:") {
                Some(base) => Ok(richardson_lift(base.parse()?)),
                None => Err(KatoError::InvalidArgument(format!(
                    "unknown scheme {other:?}; known: greedy1, brz1, greedy2, rich2, rich3, greedy3, lift:<scheme>"
                ))),
            },
        }
    }
}

/// Cost of one step, in the units used for comparing schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StepCost {
    pub p_evals: u64,
    pub mat_mults: u64,
}

impl fmt::Display for StepCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}E+{}M", self.p_evals, self.mat_mults)
    }
}

/// Running totals over a continuation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub steps: u64,
    /// Distinct projector samples read by each step, summed over steps.
    /// This is the unshared count: a sample reused from the previous step
    /// still counts once per step that reads it.
    pub p_evals: u64,
    /// Family evaluations actually performed. With sharing on, `P_{j+1}`
    /// from step `j` is reused as `P_j` of step `j + 1`.
    pub p_evals_computed: u64,
    /// Products of a projector with a basis matrix.
    pub mat_mults: u64,
}

type Key = (u64, u64);

fn key(z: Complex64) -> Key {
    (z.re.to_bits(), z.im.to_bits())
}

/// Per-run evaluation state: projector cache and cost counters.
///
/// Confined to one run; not shared between threads.
pub struct StepContext<'a> {
    family: &'a dyn ProjectorFamily,
    share: bool,
    cache: HashMap<Key, Rc<CMatrix>>,
    touched: Vec<Key>,
    pub counters: Counters,
}

impl<'a> StepContext<'a> {
    /// `share` keeps the projector at the end of a step for the next one.
    pub fn new(family: &'a dyn ProjectorFamily, share: bool) -> Self {
        StepContext {
            family,
            share,
            cache: HashMap::new(),
            touched: Vec::new(),
            counters: Counters::default(),
        }
    }

    pub fn family(&self) -> &'a dyn ProjectorFamily {
        self.family
    }

    /// Starts a step at `from`. Cached samples other than `P(from)` are
    /// dropped; with sharing off the cache is cleared entirely.
    pub fn begin_step(&mut self, from: Complex64) {
        self.touched.clear();
        if self.share {
            let keep = key(from);
            self.cache.retain(|k, _| *k == keep);
        } else {
            self.cache.clear();
        }
    }

    pub fn end_step(&mut self) {
        self.counters.p_evals += self.touched.len() as u64;
        self.counters.steps += 1;
    }

    /// `P(λ)`, from the cache when possible.
    pub fn projector(&mut self, lambda: Complex64) -> Result<Rc<CMatrix>> {
        let k = key(lambda);
        if !self.touched.contains(&k) {
            self.touched.push(k);
        }
        if let Some(p) = self.cache.get(&k) {
            return Ok(Rc::clone(p));
        }
        let p = Rc::new(self.family.eval(lambda)?.into_matrix());
        self.counters.p_evals_computed += 1;
        self.cache.insert(k, Rc::clone(&p));
        Ok(p)
    }

    /// `P(λ)` outside any step accounting (diagnostics, initialization).
    pub fn peek(&mut self, lambda: Complex64) -> Result<Rc<CMatrix>> {
        let k = key(lambda);
        if let Some(p) = self.cache.get(&k) {
            return Ok(Rc::clone(p));
        }
        let p = Rc::new(self.family.eval(lambda)?.into_matrix());
        self.counters.p_evals_computed += 1;
        self.cache.insert(k, Rc::clone(&p));
        Ok(p)
    }
}

fn mul(counters: &mut Counters, a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    counters.mat_mults += 1;
    matmul(a, b)
}

fn greedy1(c: &mut Counters, p_next: &CMatrix, r: &CMatrix) -> Result<CMatrix> {
    mul(c, p_next, r)
}

/// `P_{j+1}(I + w P_j (I - P_{j+1})) R`; `w = 1` is brz1, `w = ½` greedy2.
fn brz1_like(c: &mut Counters, w: f64, p_j: &CMatrix, p_next: &CMatrix, r: &CMatrix) -> Result<CMatrix> {
    let inner = relaxed(c, w, p_j, p_next, r)?;
    mul(c, p_next, &inner)
}

/// `(I + w P_a (I - P_b)) R`, two products.
fn relaxed(c: &mut Counters, w: f64, p_a: &CMatrix, p_b: &CMatrix, r: &CMatrix) -> Result<CMatrix> {
    let pb_r = mul(c, p_b, r)?;
    let resid = r - &pb_r;
    let corr = mul(c, p_a, &resid)?;
    Ok(r.axpby(1.0, &corr, w))
}

/// `(2P - I) R`, one product.
fn reflect(c: &mut Counters, p: &CMatrix, r: &CMatrix) -> Result<CMatrix> {
    let pr = mul(c, p, r)?;
    Ok(pr.axpby(2.0, r, -1.0))
}

fn rich2(c: &mut Counters, p_half: &CMatrix, p_next: &CMatrix, r: &CMatrix) -> Result<CMatrix> {
    let inner = reflect(c, p_half, r)?;
    mul(c, p_next, &inner)
}

fn rich3(
    c: &mut Counters,
    p_q1: &CMatrix,
    p_half: &CMatrix,
    p_q3: &CMatrix,
    p_next: &CMatrix,
    r: &CMatrix,
) -> Result<CMatrix> {
    let a = reflect(c, p_q1, r)?;
    let a = mul(c, p_half, &a)?;
    let a = reflect(c, p_q3, &a)?;
    let b = reflect(c, p_half, r)?;
    let bracket = a.axpby(4.0 / 3.0, &b, -1.0 / 3.0);
    mul(c, p_next, &bracket)
}

fn greedy3(c: &mut Counters, p_j: &CMatrix, p_half: &CMatrix, p_next: &CMatrix, r: &CMatrix) -> Result<CMatrix> {
    let a = relaxed(c, 0.5, p_j, p_half, r)?;
    let a = mul(c, p_half, &a)?;
    let a = relaxed(c, 0.5, p_half, p_next, &a)?;
    let b = relaxed(c, 0.5, p_j, p_next, r)?;
    let bracket = a.axpby(4.0 / 3.0, &b, -1.0 / 3.0);
    mul(c, p_next, &bracket)
}

fn check_square_pair(p: &CMatrix, r: &CMatrix) -> Result<()> {
    if !p.is_square() || p.cols() != r.rows() {
        return Err(KatoError::DimensionMismatch {
            op: "step",
            left: p.shape(),
            right: r.shape(),
        });
    }
    Ok(())
}

fn check_all(ps: &[&CMatrix], r: &CMatrix) -> Result<()> {
    for p in ps {
        check_square_pair(p, r)?;
    }
    Ok(())
}

/// `R_{j+1} = P_{j+1} R_j`.
pub fn step_greedy1(p_next: &CMatrix, r: &CMatrix) -> Result<CMatrix> {
    check_all(&[p_next], r)?;
    greedy1(&mut Counters::default(), p_next, r)
}

/// `R_{j+1} = P_{j+1}(I + P_j(I - P_{j+1})) R_j`.
pub fn step_brz1(p_j: &CMatrix, p_next: &CMatrix, r: &CMatrix) -> Result<CMatrix> {
    check_all(&[p_j, p_next], r)?;
    brz1_like(&mut Counters::default(), 1.0, p_j, p_next, r)
}

/// `R_{j+1} = P_{j+1}(I + ½P_j(I - P_{j+1})) R_j`.
pub fn step_greedy2(p_j: &CMatrix, p_next: &CMatrix, r: &CMatrix) -> Result<CMatrix> {
    check_all(&[p_j, p_next], r)?;
    brz1_like(&mut Counters::default(), 0.5, p_j, p_next, r)
}

/// `R_{j+1} = P_{j+1}(2P_{j+1/2} - I) R_j`.
pub fn step_rich2(p_half: &CMatrix, p_next: &CMatrix, r: &CMatrix) -> Result<CMatrix> {
    check_all(&[p_half, p_next], r)?;
    rich2(&mut Counters::default(), p_half, p_next, r)
}

/// `R_{j+1} = P_{j+1}[⁴⁄₃(2P_{j+3/4} - I)P_{j+1/2}(2P_{j+1/4} - I) - ⅓(2P_{j+1/2} - I)] R_j`.
pub fn step_rich3(p_q1: &CMatrix, p_half: &CMatrix, p_q3: &CMatrix, p_next: &CMatrix, r: &CMatrix) -> Result<CMatrix> {
    check_all(&[p_q1, p_half, p_q3, p_next], r)?;
    rich3(&mut Counters::default(), p_q1, p_half, p_q3, p_next, r)
}

/// `R_{j+1} = P_{j+1}[⁴⁄₃ G(½,1) P_{j+1/2} G(0,½) - ⅓ G(0,1)] R_j` where
/// `G(a,b) = I + ½P_a(I - P_b)`.
pub fn step_greedy3(p_j: &CMatrix, p_half: &CMatrix, p_next: &CMatrix, r: &CMatrix) -> Result<CMatrix> {
    check_all(&[p_j, p_half, p_next], r)?;
    greedy3(&mut Counters::default(), p_j, p_half, p_next, r)
}
