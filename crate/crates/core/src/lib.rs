//! Polynomial surrogates for composite functions `h(x) = g(f(x))`.
//!
//! The cheap inner function `f` is sampled on a tensor Gauss grid. Lanczos
//! iteration on the diagonal matrix of those samples yields a small Gauss rule
//! on the range of `f`, so the expensive outer function `g` is only evaluated
//! at a handful of Ritz values. The resulting values are mapped back to the
//! grid and turned into tensor pseudospectral coefficients.

pub mod composite;
pub mod error;
pub mod measure;
pub mod orthopoly;
pub mod pseudospectral;

pub use error::{BoxError, Error, Result};
