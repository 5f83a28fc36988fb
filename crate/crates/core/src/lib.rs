//! Active-sampling sample-based quantum diagonalization (AS-SQD).
//!
//! Starting from measurement counts, the top-K bitstrings define a subspace in
//! which the Hamiltonian is projected and diagonalized. Active sampling then
//! grows the subspace with the Hamiltonian-connected neighbors that carry the
//! largest first-order (Epstein-Nesbet) energy correction, instead of drawing
//! more shots.

pub mod acquisition;
pub mod bench;
pub mod driver;
pub mod exact;
pub mod linalg;
pub mod models;
pub mod pauli;
pub mod sampler;
pub mod subspace;

mod error;

pub use error::{Error, Result};
