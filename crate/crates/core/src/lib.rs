//! Numerical laboratory for one-point-nonsmooth self-similar singularity
//! candidates of the 2D Boussinesq and 3D axisymmetric Euler equations.
//!
//! The crate implements, at desk scale, the explicit constructions behind a
//! family of `C^{1,α}` self-similar blowup profiles: modified polar
//! coordinates, closed-form approximate profiles, scale-localized cutoff
//! perturbations, the weighted Sobolev/Hölder norms measuring them, the
//! half-plane Biot–Savart law, and a pseudo-spectral Boussinesq solver with
//! BKM-type continuation diagnostics.  Every quantitative claim these
//! constructions rest on is re-checked numerically in the test suite.

pub mod error;
pub mod quad;
pub mod symfn;
pub mod coords;
pub mod grid;
pub mod profiles;
pub mod operators;
pub mod perturbation;
pub mod norms;
pub mod biotsavart;
pub mod solver;
pub mod cli;

pub use error::{Error, Result};
