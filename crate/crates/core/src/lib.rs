//! Volume-preserving deformations of linear Anosov maps on the 3-torus.

pub mod config;
pub mod construction;
pub mod ergodicity;
pub mod error;
pub mod geometry;
pub mod lyapunov;
pub mod manifolds;
pub mod maps;
pub mod presets;
pub mod runner;
pub mod sampling;
pub mod verification;

pub use error::{Error, Result};
