//! Finite-volume engine for the long-range Ising model and its random-field
//! variant.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: sites, volumes, boundaries, dyadic cubes and projections.
//! * [`model`]: couplings, fields, boundary conditions, Hamiltonians and the
//!   spin-flip maps.
//! * [`contour`]: spin boundaries, contour extraction, interiors, origin
//!   census and cube covers.
//! * [`exact`]: log-domain partition functions and Gibbs expectations by
//!   Gray-code enumeration, the free-energy asymmetry `Δ_A(h)` and the bad
//!   event.
//! * [`sampler`]: single-site Metropolis chains, disorder ensembles and
//!   inverse-temperature sweeps.
//! * [`verify`]: the inequality harness producing [`verify::BoundReport`]s
//!   with witness constants.

pub mod contour;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod verify;

pub use error::{Error, Result};
pub use lattice::{Rectangle, Site, Volume};
pub use model::{
    BoundaryCondition, CouplingSpec, FieldRealization, FieldSpec, Model, Norm, Spin, SpinConfig,
};

/// Crate version, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
