//! Pseudospectral simulation and analysis of scalar transport by planar
//! helical flows `v(y) = (u(y) sin(2 pi y/L3), u(y) cos(2 pi y/L3), 0)` on the
//! three-dimensional torus.

pub mod diagnostics;
pub mod error;
pub mod flows;
pub mod integrator;
pub mod psi;
pub mod solvers;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
