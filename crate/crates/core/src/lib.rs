//! Continuation of analytically varying invariant subspaces.
//!
//! Given a family of spectral projectors `P(λ)` analytic on a domain, the
//! schemes in [`schemes`] advance a basis `R` of `range P(λ)` along a mesh
//! of a contour so that the discrete path tracks the solution of Kato's
//! equation `R' = (P'P - PP')R`. On a closed contour the exact solution
//! returns to its start, so the closure error `|R_L - R_0|_F` measures the
//! discretization error.
//!
//! ```
//! use kato::contour::{auto_basis, continue_basis, RunOptions};
//! use kato::problems::family_rank1;
//! use kato::schemes::SchemeSpec;
//!
//! let spec = family_rank1();
//! let mesh = spec.contour.mesh().unwrap();
//! let r0 = auto_basis(spec.family.as_ref(), mesh.start()).unwrap();
//! let rep = continue_basis(spec.family.as_ref(), &SchemeSpec::Rich3, &mesh, &r0, &RunOptions::default()).unwrap();
//! assert!(rep.closure_error.unwrap() < 1e-8);
//! ```

pub mod cli;
pub mod contour;
pub mod error;
pub mod matrix;
pub mod oracle;
pub mod problems;
pub mod report;
pub mod schemes;
pub mod spectral;

pub use error::{KatoError, Result};
pub use matrix::CMatrix;
pub use num_complex::Complex64;
