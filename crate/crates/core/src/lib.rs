pub mod error;
pub mod experiments;
pub mod exponents;
pub mod geometry;
pub mod greens_wedge;
pub mod lemma_oracles;
pub mod quad;
pub mod solver;
pub mod special;
pub mod weighted_norms;

pub use error::{Error, Result};
