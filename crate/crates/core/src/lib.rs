pub mod config;
pub mod dynamics;
pub mod entanglement;
pub mod error;
pub mod ising;
pub mod linalg;
pub mod mps;
pub mod pipeline;
pub mod spectroscopy;
pub mod state_prep;

pub use error::{Error, ErrorClass, Result};
pub use ising::IsingCouplings;
pub use mps::{inner_product, MatrixProductState, SchmidtSpectrum, TruncationPolicy};
