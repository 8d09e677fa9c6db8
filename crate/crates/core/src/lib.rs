//! Finite element continuous data assimilation for 2D heat, transport and
//! Navier-Stokes problems.

pub mod assembly;
pub mod drivers;
pub mod error;
pub mod fem;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod observation;

pub use error::{Error, Result};
