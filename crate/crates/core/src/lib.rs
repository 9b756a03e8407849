pub mod dynamics;
pub mod eigenanalysis;
pub mod error;
pub mod estimator;
pub mod fockspace;
pub mod linalg;
pub mod model;
pub mod perturbation;
pub mod spectroscopy;

pub use error::{KpoError, Result};
