//! Numerical engine for the arbitrary-β two-matrix model in the regime where the
//! wave function is polynomial: Bethe roots of the quantum spectral curve, the
//! variational (Yang–Yang) free energies, and correlators from a matrix-valued
//! topological recursion, together with checks of every identity they satisfy.
//!
//! The modules build on each other bottom-up:
//! [`ratfun`] → [`model`] → [`bethe`] → [`spectral`], [`yangyang`], [`kernel`] → [`recursion`].

pub mod bethe;
pub mod error;
pub mod json;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod ratfun;
pub mod recursion;
pub mod spectral;
pub mod verify;
pub mod yangyang;

pub use bethe::{solve_bethe, BetheSolution, LeadingData};
pub use error::{Error, Result};
pub use kernel::KernelTable;
pub use linalg::{CMat, CVec, C64};
pub use model::{BetheConfig, BetheMode, ModelSpec};
pub use ratfun::{Anchors, Basis, BiPoly, PoleSum, PoleSumMatrix, PoleTensor, Poly};
pub use recursion::CorrelatorStore;
pub use spectral::SpectralCurve;
pub use verify::{run_checks, CheckRecord, Report, VerifyOptions};
pub use yangyang::ExtremalFrame;
