//! Mean-field simulation and analysis of cavity-mediated momentum-state solitons.
//!
//! Two momentum wave packets coupled by photon-mediated exchange interactions
//! stay bound and dispersion-free when the collective coupling is tuned to
//! χN = −4E_R. The crate integrates the mean-field equations in one, two and
//! three dimensions, evaluates the dressed dispersion, reconstructs
//! position-space densities, and models interferometric detection and
//! balanced-pump dissipation.
//!
//! All quantities are in natural units ħ = M = k = 1 (see [`units`]).

pub mod dissipation;
pub mod dynamics1d;
pub mod dynamics_hd;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod observables;
pub mod params;
pub mod rk4;
pub mod units;

pub use ensemble::{build_ensemble, MomentumEnsemble};
pub use error::{Error, Result};
pub use params::{EnsembleMode, SimulationParams, Warning};
pub use units::UnitSystem;

pub use num_complex::Complex64 as C64;
