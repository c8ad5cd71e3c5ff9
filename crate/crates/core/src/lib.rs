//! Trotterized collective-spin dynamics and the kicked top.

pub mod banded;
pub mod chain;
pub mod error;
pub mod floquet;
pub mod krylov;
pub mod linalg;
pub mod observables;
pub mod otoc;
pub mod perturbation;
pub mod rng;
pub mod semiclassical;
pub mod spectral;
pub mod spin;
pub mod twodesign;

pub use error::{Error, Result};
