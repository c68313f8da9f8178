//! Pseudo-spectral laboratory for the three-dimensional elliptic-elliptic
//! Davey-Stewartson equation
//!
//! ```text
//! i u_t + Δu + c1 |u|^α u + c2 E1(|u|²) u = 0,   E1 = F⁻¹ (ξ1²/|ξ|²) F
//! ```
//!
//! on a periodic box. The numerical core is generic over the scalar type
//! ([`Real`], implemented for `f32` and `f64`); the unsuffixed aliases below
//! fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decay;
pub mod error;
pub mod evolution;
pub mod field;
pub mod functionals;
pub mod grid;
pub mod ground_state;
pub mod scalar;
pub mod snapshot;
pub mod spectral;
pub mod symmetry;
pub mod virial;

pub use error::{Error, Result};
pub use field::ComplexField;
pub use grid::GridSpec;
pub use scalar::Real;
pub use spectral::{sigma1_eval, symbol_identity_check, Fft3, Multiplier, SpectralOps, ZeroMode};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Grid = GridSpec<f64>;
pub type Field = ComplexField<f64>;
pub type Spectral = SpectralOps<f64>;
pub type Params = functionals::SimParams<f64>;
