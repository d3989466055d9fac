//! Fourier and Fourier-cosine function spaces on the periodic membrane and
//! the slab beneath it.
//!
//! Every basis function is a Laplacian eigenfunction (periodic on the torus,
//! Neumann in the vertical direction), so differential operators are
//! diagonal and Galerkin projections are exact coefficient truncations.

mod fft;
mod slab;
pub mod snapshot;
mod torus;

pub use slab::{BulkField, SlabGeometry};
pub use torus::{solve_surface_helmholtz, SurfaceField, TorusGeometry};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("expected {expected} samples, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("fields live on different grids: (L={}, N={}) vs (L={}, N={})", left.0, left.1, right.0, right.1)]
    GeometryMismatch { left: (f64, usize), right: (f64, usize) },
    #[error("singular system: right-hand side has mean {mean:e}, must be mean-free")]
    SingularSystem { mean: f64 },
}
