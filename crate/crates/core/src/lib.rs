//! Lattice theta and Epstein-type zeta functions, lattice stability
//! machinery, and a randomized verification harness for a dominance
//! inequality among unit-covolume stable lattices.

pub mod context;
pub mod decompose;
pub mod enumerate;
pub mod error;
pub mod laplacian;
pub mod lattice;
pub mod linalg;
pub mod quad;
pub mod reduce;
pub mod special;
pub mod stability;
pub mod summation;
pub mod tail;
pub mod verify;

pub use context::Context;
pub use error::{Error, Result};
pub use lattice::{GramMatrix, LatticeBasis, LatticeVector};
