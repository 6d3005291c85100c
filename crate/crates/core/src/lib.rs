//! Transfer protocols between topological boundary states of multidomain
//! Creutz ladders and SSH chains.

pub mod analysis;
pub mod effective;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod protocol;
pub mod pulse;
pub mod rng;
pub mod states;
pub mod timescan;

pub use error::{Error, Result};
