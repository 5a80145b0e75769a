//! Mode-intrinsic non-Gaussian entanglement witnesses for multimode
//! continuous-variable states.

pub mod error;
pub mod fock;

pub use error::{Error, Result};
pub mod generators;
pub mod mode_basis;
pub mod optimize;
pub mod witness;
pub mod cluster;
pub mod homodyne;
pub mod recipe;
pub mod sweep;
