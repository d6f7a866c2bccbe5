//! Verification laboratory for the relativistic harmonic oscillator.
//!
//! The exact anti-de Sitter oscillator eigenstates live in a family of
//! power-law weighted polynomials and the `O(1/N)` perturbative states in a
//! family of Gaussian weighted polynomials; every claim about them is
//! checked by exact coefficient algebra and Beta/Gamma moment integration.

pub mod algebra;
pub mod error;
pub mod exact;
pub mod measures;
pub mod model;
pub mod perturb;
pub mod polyalg;
pub mod relhermite;

pub use error::{LabError, Result};
pub use measures::{Integrand, MeasureSpec};
pub use model::{EnergyPair, ModelParams, PhysicalParams};
pub use polyalg::{GaussPoly, Poly, WeightedPoly};
