//! Two-layer interfacial wave model with polynomial vertical expansions on a
//! periodic 1-D domain: linear dispersion theory, compatibility-consistent
//! initial data, time evolution, stability monitoring and conservation
//! diagnostics.

pub mod config;
pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod field;
pub mod lintheory;
pub mod operators;
pub mod params;
pub mod selftest;
pub mod spectral;
pub mod stability;
pub mod state;

pub use config::Config;
pub use error::{Error, Result};
pub use field::{Field, PotentialVec};
pub use lintheory::Layer;
pub use params::ModelParams;
pub use spectral::{Grid1D, Spectral};
pub use state::{CanonicalState, State};
