pub mod error;
pub mod lie_core;
pub mod pencil;
pub mod quadrature;
pub mod rmatrix;
pub mod schouten;
pub mod vaisman;

pub use error::{Error, Result};
