//! Constrained Sylvester-observer equation `TA - FT = GC` with `[C; T]`
//! nonsingular: solvability test, construction, reduced-order observer
//! synthesis and co-simulation.

pub mod error;
pub mod numkernel;
pub mod observer;
mod placement;
pub mod sim;
pub mod stabilize;
pub mod structure;
pub mod sylvsolve;
pub mod testgen;
pub mod tolerance;

pub use error::{Error, Result};
pub use numkernel::{Complex64, RealMatrix, Spectrum};
pub use tolerance::Tolerances;
