//! Exact single-excitation dynamics of qubit chains coupled to a
//! one-dimensional waveguide, computed in real space from scattering
//! eigenstates.

pub mod error;
pub mod expint;
pub mod faddeeva;
pub mod linalg;
pub mod dynamics;
pub mod model;
pub mod optimize;
pub mod oracle;
pub mod par;
pub mod poly;
pub mod pulses;
pub mod quad;
pub mod ratfun;
pub mod scattering;
pub mod spectrum;

pub use error::{Error, Result};
pub use model::{ChainSpec, Direction, EvolutionResult, ModePoint, Regime};
pub use num_complex::Complex64 as C64;
