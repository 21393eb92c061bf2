//! Single-photon transistor physics with Stark-tuned Förster resonances.
//!
//! Units throughout: rad/µs for rates and energies, µm, µs and V/cm.

pub mod atomic_states;
pub mod detection;
pub mod ensemble;
mod error;
pub mod interaction;
pub mod propagation;
pub mod quadrature;
pub mod spinwave;

pub use error::{Error, Result};
