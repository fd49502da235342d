//! Natural units: ħ = M = k = 1.
//!
//! Every quantity in this crate is expressed in these units. Energies are
//! measured in ħk²/M (so the recoil energy is 1/2), momenta in ħk, lengths in
//! 1/k and times in M/(ħk²). Reported dynamics are usually quoted in the
//! characteristic time τ = 2π/(|χ_opt| N).

use std::f64::consts::{PI, TAU};

pub const HBAR: f64 = 1.0;
pub const MASS: f64 = 1.0;
pub const K: f64 = 1.0;

/// E_R = ħk²/2M.
pub const RECOIL_ENERGY: f64 = HBAR * K * K / (2.0 * MASS);

/// Recoil velocity ħk/M.
pub const RECOIL_VELOCITY: f64 = HBAR * K / MASS;

/// Snapshot of the unit system, written into output metadata.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct UnitSystem {
    pub hbar: f64,
    pub mass: f64,
    pub k: f64,
    pub recoil_energy: f64,
    /// τ expressed in natural time units.
    pub tau: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self {
            hbar: HBAR,
            mass: MASS,
            k: K,
            recoil_energy: RECOIL_ENERGY,
            tau: tau(),
        }
    }
}

/// Optimal collective coupling χ_opt(θ)·N = −4 E_R sin²θ.
pub fn chi_opt_n(theta: f64) -> f64 {
    let s = theta.sin();
    -4.0 * RECOIL_ENERGY * s * s
}

/// Optimal single-atom coupling χ_opt(θ) for `n_atoms` atoms.
///
/// Angles outside [0, π] are accepted; only sin²θ enters.
pub fn chi_opt(theta: f64, n_atoms: u64) -> f64 {
    assert!(n_atoms >= 1, "chi_opt needs at least one atom");
    chi_opt_n(theta) / n_atoms as f64
}

/// τ = 2π/(|χ_opt| N) at θ = π/2.
pub fn tau() -> f64 {
    TAU / chi_opt_n(PI / 2.0).abs()
}

/// Spin-dependent Doppler splitting 2kp/M of the two recoil branches.
#[inline]
pub fn doppler(p: f64) -> f64 {
    2.0 * K * p / MASS
}

/// Spin-independent kinetic frequency p²/2Mħ.
#[inline]
pub fn kinetic(p2: f64) -> f64 {
    p2 / (2.0 * MASS * HBAR)
}

/// Minimum-uncertainty position width ħ/(2σ_p) of a Gaussian packet.
pub fn min_uncertainty_width(sigma_p: f64) -> f64 {
    HBAR / (2.0 * sigma_p)
}
