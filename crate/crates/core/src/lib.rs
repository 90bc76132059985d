pub mod angles;
pub mod cli;
pub mod diffusion;
pub mod error;
pub mod fourier;
pub mod frequencies;
pub mod linalg;
pub mod melnikov;
pub mod pendulum;
pub mod quadrature;
pub mod scalar;
pub mod splitting;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision scalar; every documented tolerance refers to it.
pub type F64 = f64;
/// Single-precision scalar.
pub type F32 = f32;
