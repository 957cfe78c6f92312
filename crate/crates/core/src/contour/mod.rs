//! Contours, meshes and the continuation driver.
//!
//! Descriptor grammar (also used on the command line):
//!
//! ```text
//! circle:<center_re>,<center_im>:<radius>:<L>
//! polyline:<re>,<im>;<re>,<im>;...:<L_per_edge>
//! ```
//!
//! A polyline whose last vertex equals its first is closed.

mod driver;
mod study;

pub use driver::{auto_basis, closure_error, continue_basis, BasisFrame, InitPolicy, RunOptions, RunReport};
pub use study::{convergence_study, median, steps_to_tolerance, StudyConfig, StudyRow, StudyTable};

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{KatoError, Result};

/// `a + frac (b - a)`: a point on the straight chord, not the arc.
#[inline]
pub fn chord_point(a: Complex64, b: Complex64, frac: f64) -> Complex64 {
    a + (b - a) * frac
}

/// Ordered sample points along a contour.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    points: Vec<Complex64>,
    closed: bool,
}

impl Mesh {
    /// Validates that consecutive points differ and, for a closed mesh, that
    /// the last point is bitwise the first.
    pub fn new(points: Vec<Complex64>, closed: bool) -> Result<Mesh> {
        if points.len() < 2 {
            return Err(KatoError::InvalidArgument("a mesh needs at least two points".into()));
        }
        if points.iter().any(|z| !z.is_finite()) {
            return Err(KatoError::InvalidArgument("mesh points must be finite".into()));
        }
        if let Some(j) = points.windows(2).position(|w| w[0] == w[1]) {
            return Err(KatoError::InvalidArgument(format!(
                "mesh points {j} and {} coincide",
                j + 1
            )));
        }
        if closed {
            let (first, last) = (points[0], points[points.len() - 1]);
            if first.re.to_bits() != last.re.to_bits() || first.im.to_bits() != last.im.to_bits() {
                return Err(KatoError::InvalidArgument(
                    "closed mesh must end on its starting point".into(),
                ));
            }
        }
        Ok(Mesh { points, closed })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn closed(&self) -> bool {
        self.closed
    }

    /// Number of segments `L`.
    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn start(&self) -> Complex64 {
        self.points[0]
    }

    /// Point a fraction `frac` of the way along segment `j`.
    pub fn fractional_point(&self, j: usize, frac: f64) -> Result<Complex64> {
        if j >= self.segments() {
            return Err(KatoError::InvalidArgument(format!(
                "segment {j} out of range for a mesh with {} segments",
                self.segments()
            )));
        }
        if !(0.0..=1.0).contains(&frac) {
            return Err(KatoError::InvalidArgument(format!("fraction {frac} outside [0, 1]")));
        }
        Ok(chord_point(self.points[j], self.points[j + 1], frac))
    }

    pub fn reversed(&self) -> Mesh {
        let mut points = self.points.clone();
        points.reverse();
        Mesh {
            points,
            closed: self.closed,
        }
    }
}

/// `L + 1` points `center + radius e^{2πij/L}`, with the last point stored as
/// the identical value of the first.
pub fn mesh_circle(center: Complex64, radius: f64, steps: usize) -> Result<Mesh> {
    if steps < 3 {
        return Err(KatoError::InvalidArgument(format!(
            "a circle mesh needs at least 3 steps, got {steps}"
        )));
    }
    if radius.is_nan() || radius <= 0.0 || !radius.is_finite() {
        return Err(KatoError::InvalidArgument(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let mut points: Vec<Complex64> = (0..steps)
        .map(|j| center + Complex64::from_polar(radius, TAU * j as f64 / steps as f64))
        .collect();
    points.push(points[0]);
    Mesh::new(points, true)
}

/// Straight edges between vertices, `steps_per_edge` segments each. Closed
/// when the last vertex equals the first.
pub fn mesh_polyline(vertices: &[Complex64], steps_per_edge: usize) -> Result<Mesh> {
    if vertices.len() < 2 {
        return Err(KatoError::InvalidArgument(
            "a polyline needs at least two vertices".into(),
        ));
    }
    if steps_per_edge == 0 {
        return Err(KatoError::InvalidArgument("steps per edge must be positive".into()));
    }
    let closed = vertices[0] == vertices[vertices.len() - 1];
    let mut points = Vec::with_capacity((vertices.len() - 1) * steps_per_edge + 1);
    for w in vertices.windows(2) {
        for j in 0..steps_per_edge {
            points.push(chord_point(w[0], w[1], j as f64 / steps_per_edge as f64));
        }
    }
    points.push(if closed {
        points[0]
    } else {
        vertices[vertices.len() - 1]
    });
    Mesh::new(points, closed)
}

/// Parsed contour descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum ContourSpec {
    Circle {
        center: Complex64,
        radius: f64,
        steps: usize,
    },
    Polyline {
        vertices: Vec<Complex64>,
        steps_per_edge: usize,
    },
}

impl ContourSpec {
    pub fn mesh(&self) -> Result<Mesh> {
        match self {
            ContourSpec::Circle { center, radius, steps } => mesh_circle(*center, *radius, *steps),
            ContourSpec::Polyline {
                vertices,
                steps_per_edge,
            } => mesh_polyline(vertices, *steps_per_edge),
        }
    }

    /// Same contour with the step parameter replaced.
    pub fn with_steps(&self, l: usize) -> ContourSpec {
        match self {
            ContourSpec::Circle { center, radius, .. } => ContourSpec::Circle {
                center: *center,
                radius: *radius,
                steps: l,
            },
            ContourSpec::Polyline { vertices, .. } => ContourSpec::Polyline {
                vertices: vertices.clone(),
                steps_per_edge: l,
            },
        }
    }

    /// The step parameter (`L` for circles, `L_per_edge` for polylines).
    pub fn steps(&self) -> usize {
        match self {
            ContourSpec::Circle { steps, .. } => *steps,
            ContourSpec::Polyline { steps_per_edge, .. } => *steps_per_edge,
        }
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| KatoError::Parse(format!("bad {what} {s:?}")))
}

fn parse_complex(s: &str) -> Result<Complex64> {
    let (re, im) = s
        .split_once(',')
        .ok_or_else(|| KatoError::Parse(format!("expected <re>,<im>, got {s:?}")))?;
    Ok(Complex64::new(
        parse_f64(re, "real part")?,
        parse_f64(im, "imaginary part")?,
    ))
}

fn parse_steps(s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| KatoError::Parse(format!("bad step count {s:?}")))
}

impl FromStr for ContourSpec {
    type Err = KatoError;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| KatoError::Parse(format!("bad contour descriptor {s:?}")))?;
        let fields: Vec<&str> = rest.split(':').collect();
        match kind {
            "circle" => {
                if fields.len() != 3 {
                    return Err(KatoError::Parse(format!(
                        "expected circle:<re>,<im>:<radius>:<L>, got {s:?}"
                    )));
                }
                let spec = ContourSpec::Circle {
                    center: parse_complex(fields[0])?,
                    radius: parse_f64(fields[1], "radius")?,
                    steps: parse_steps(fields[2])?,
                };
                spec.mesh()?;
                Ok(spec)
            }
            "polyline" => {
                if fields.len() != 2 {
                    return Err(KatoError::Parse(format!(
                        "expected polyline:<re>,<im>;...:<L_per_edge>, got {s:?}"
                    )));
                }
                let vertices = fields[0].split(';').map(parse_complex).collect::<Result<Vec<_>>>()?;
                let spec = ContourSpec::Polyline {
                    vertices,
                    steps_per_edge: parse_steps(fields[1])?,
                };
                spec.mesh()?;
                Ok(spec)
            }
            other => Err(KatoError::Parse(format!("unknown contour kind {other:?}"))),
        }
    }
}

impl fmt::Display for ContourSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContourSpec::Circle { center, radius, steps } => {
                write!(f, "circle:{},{}:{}:{}", center.re, center.im, radius, steps)
            }
            ContourSpec::Polyline {
                vertices,
                steps_per_edge,
            } => {
                let vs: Vec<String> = vertices.iter().map(|v| format!("{},{}", v.re, v.im)).collect();
                write!(f, "polyline:{}:{}", vs.join(";"), steps_per_edge)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn circle_quarter_points() {
        let m = mesh_circle(c(0.0, 0.0), 1.0, 4).unwrap();
        let expected = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0), c(1.0, 0.0)];
        assert_eq!(m.points().len(), 5);
        for (p, e) in m.points().iter().zip(expected) {
            assert!((p - e).norm() < 1e-15);
        }
        assert!(m.closed());
        assert_eq!(m.points()[4].re.to_bits(), m.points()[0].re.to_bits());
        assert_eq!(m.points()[4].im.to_bits(), m.points()[0].im.to_bits());
    }

    #[test]
    fn circle_first_point() {
        let m = mesh_circle(c(2.0, 0.0), 0.5, 3).unwrap();
        assert_eq!(m.points()[0], c(2.5, 0.0));
        assert!(mesh_circle(c(0.0, 0.0), 1.0, 2).is_err());
        assert!(mesh_circle(c(0.0, 0.0), 0.0, 8).is_err());
    }

    #[test]
    fn fractional_points() {
        let m = Mesh::new(vec![c(0.0, 0.0), c(4.0, 0.0)], false).unwrap();
        assert_eq!(m.fractional_point(0, 0.25).unwrap(), c(1.0, 0.0));
        assert_eq!(m.fractional_point(0, 0.0).unwrap(), c(0.0, 0.0));
        assert!(m.fractional_point(1, 0.5).is_err());
        assert!(m.fractional_point(0, 1.5).is_err());
    }

    #[test]
    fn mesh_rejects_repeats() {
        assert!(Mesh::new(vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], false).is_err());
        assert!(Mesh::new(vec![c(0.0, 0.0), c(1.0, 0.0)], true).is_err());
    }

    #[test]
    fn parse_descriptors() {
        let s: ContourSpec = "circle:0,0:0.5:64".parse().unwrap();
        assert_eq!(
            s,
            ContourSpec::Circle {
                center: c(0.0, 0.0),
                radius: 0.5,
                steps: 64
            }
        );
        assert_eq!(s.to_string(), "circle:0,0:0.5:64");
        let p: ContourSpec = "polyline:0,0;1,0;1,1;0,0:8".parse().unwrap();
        let m = p.mesh().unwrap();
        assert!(m.closed());
        assert_eq!(m.segments(), 24);
        assert_eq!(p.to_string().parse::<ContourSpec>().unwrap(), p);
        let open: ContourSpec = "polyline:0,0;1,0:4".parse().unwrap();
        assert!(!open.mesh().unwrap().closed());
        for bad in [
            "circle:0:1:8",
            "circle:0,0:1",
            "square:0,0:1:8",
            "circle:0,0:-1:8",
            "polyline:0,0:4",
            "circle:0,0:1:x",
        ] {
            assert!(bad.parse::<ContourSpec>().is_err(), "{bad}");
        }
    }
}
