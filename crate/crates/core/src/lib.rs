//! Periodic traveling waves of the Drinfeld–Sokolov–Wilson system
//!
//! ```text
//! u_t + (u v)_x + u_xxx = 0,    v_t + u u_x = 0
//! ```
//!
//! with explicit elliptic-function profiles, their Hill-operator and
//! Hamiltonian stability indices, pseudospectral time evolution, and the
//! bilinear normal-form multiplier.

pub mod cli;
pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod fourier;
pub mod hill;
pub mod index;
pub mod normal_form;
pub mod ode;
pub mod quad;
pub mod spectra;
pub mod wave;

#[cfg(test)]
mod test_oracle;

pub use error::{Error, Result};
