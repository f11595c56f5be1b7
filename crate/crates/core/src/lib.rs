//! Numerical laboratory for band-limited spaces `E_L` spanned by Laplacian
//! eigenfunctions of frequency at most `L` on compact manifolds.
//!
//! Modules follow the pipeline: [`manifold`] supplies exact eigendata and
//! quadrature, [`kernels`] the spectral kernels, [`families`] and
//! [`sampling`] the point families and their frame/Riesz bounds,
//! [`concentration`] and [`density`] the Landau-type analysis, and
//! [`fekete`] approximate Fekete points.

pub mod concentration;
pub mod density;
pub mod error;
pub mod families;
pub mod fekete;
pub mod kernels;
pub mod manifold;
pub mod quadrature;
pub mod sampling;

pub use error::{Error, Result};
