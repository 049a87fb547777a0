//! Viscous linear stability of a cylindrical z-pinch with a vacuum annulus.
//!
//! For every Fourier mode (m, k) the growth rate is obtained from a family of
//! constrained Rayleigh-quotient problems parameterized by an artificial
//! viscosity scale `s`; the physical rate is the fixed point `s = sqrt(-λ(s))`.

pub mod banded;
pub mod config;
pub mod equilibrium;
pub mod error;
pub mod eigen;
pub mod evolve;
pub mod forms;
pub mod growth;
pub mod integrate;
pub mod mesh;
pub mod profile;
pub mod report;
pub mod run;
pub mod scan;
pub mod verify;

pub use error::{Error, Result};
