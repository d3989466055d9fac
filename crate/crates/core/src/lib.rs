//! Phase-field simulation of lipid rafts on a periodic membrane coupled to a
//! cytosolic slab through cholesterol exchange.

pub mod exchange;
pub mod exec;
pub mod experiments;
pub mod full;
pub mod model;
pub mod ok;
pub mod reduced;
pub mod spectral;
pub mod stationary;

pub use exchange::{CutoffFunction, ExchangeLaw};
pub use exec::Execution;
pub use model::{DynamicsError, ModelParams};
pub use spectral::{BulkField, SlabGeometry, SpectralError, SurfaceField, TorusGeometry};
