//! Physical and numerical parameters shared by every dynamics module.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::units;

/// Upper bound on `dt` times the largest per-point frequency.
pub const STEP_GUARD: f64 = 0.05;

/// Ratio |χN| / (2kσ_p/M) below which locked-regime analytics are flagged.
pub const LOCKED_REGIME_RATIO: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleMode {
    #[default]
    Grid,
    MonteCarlo,
}

/// Parameters of a mean-field run.
///
/// `dt` and `t_final` are given in units of τ; use [`SimulationParams::dt_natural`]
/// and [`SimulationParams::t_final_natural`] for the integrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationParams {
    /// Collective coupling χN (energy).
    #[serde(rename = "chiN")]
    pub chi_n: f64,
    /// rms momentum spread of the selected ensemble, in ħk.
    pub sigma_p: f64,
    /// Initial polar angle of the Bloch vector.
    pub theta: f64,
    /// Grid points per axis (grid mode) or sample count (Monte Carlo mode).
    pub n_momentum: usize,
    /// Grid half-width as a multiple of `sigma_p`.
    pub p_span: f64,
    /// Integrator step in units of τ.
    pub dt: f64,
    /// Final time in units of τ.
    pub t_final: f64,
    pub dimension: usize,
    pub mode: EnsembleMode,
    pub seed: u64,
    /// Set when the caller relies on locked-regime analytics; enables the
    /// validity warning.
    pub locked_analytics: bool,
}

impl Default for SimulationParams {
    fn default() -> Self {
        Self {
            chi_n: units::chi_opt_n(PI / 2.0),
            sigma_p: 0.05,
            theta: PI / 2.0,
            n_momentum: 201,
            p_span: 5.0,
            dt: 1e-3,
            t_final: 30.0,
            dimension: 1,
            mode: EnsembleMode::Grid,
            seed: 0,
            locked_analytics: false,
        }
    }
}

/// Non-fatal findings from [`SimulationParams::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    LockedRegime { chi_n: f64, doppler_width: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::LockedRegime { chi_n, doppler_width } => write!(
                f,
                "locked regime not satisfied: |chiN| = {:.4} < {} x 2k sigma_p/M = {:.4}",
                chi_n.abs(),
                LOCKED_REGIME_RATIO,
                LOCKED_REGIME_RATIO * doppler_width
            ),
        }
    }
}

impl SimulationParams {
    pub fn dt_natural(&self) -> f64 {
        self.dt * units::tau()
    }

    pub fn t_final_natural(&self) -> f64 {
        self.t_final * units::tau()
    }

    /// Absolute grid half-width in ħk.
    pub fn p_half_width(&self) -> f64 {
        self.p_span * self.sigma_p
    }

    /// Largest |p| expected in the ensemble (grid corner, or 6σ for sampling).
    pub fn nominal_p_max(&self) -> f64 {
        let per_axis = match self.mode {
            EnsembleMode::Grid => self.p_half_width(),
            EnsembleMode::MonteCarlo => 6.0 * self.sigma_p,
        };
        per_axis * (self.dimension as f64).sqrt()
    }

    /// Checks every invariant; returns warnings for soft violations.
    pub fn validate(&self) -> Result<Vec<Warning>> {
        if !(self.sigma_p.is_finite() && self.sigma_p > 0.0) {
            return Err(invalid("sigma_p", format!("must be > 0, got {}", self.sigma_p)));
        }
        if self.n_momentum < 3 {
            return Err(invalid("n_momentum", format!("must be >= 3, got {}", self.n_momentum)));
        }
        if self.n_momentum.is_multiple_of(2) {
            return Err(invalid(
                "n_momentum",
                format!("must be odd so that p = 0 is a grid node, got {}", self.n_momentum),
            ));
        }
        if !(self.p_span.is_finite() && self.p_span > 0.0) {
            return Err(invalid("p_span", format!("must be > 0, got {}", self.p_span)));
        }
        if !(self.theta.is_finite() && (0.0..=PI).contains(&self.theta)) {
            return Err(invalid("theta", format!("must lie in [0, pi], got {}", self.theta)));
        }
        if !self.chi_n.is_finite() {
            return Err(invalid("chiN", "must be finite"));
        }
        if !(1..=3).contains(&self.dimension) {
            return Err(invalid(
                "dimension",
                format!("must be 1, 2 or 3, got {}", self.dimension),
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(invalid("t_final", format!("must be >= 0, got {}", self.t_final)));
        }
        let max_freq = max_frequency(self.chi_n, self.theta, self.nominal_p_max());
        check_step(self.dt_natural(), max_freq)?;

        let mut warnings = Vec::new();
        if self.locked_analytics {
            let doppler_width = units::doppler(self.sigma_p);
            if self.chi_n.abs() < LOCKED_REGIME_RATIO * doppler_width {
                warnings.push(Warning::LockedRegime {
                    chi_n: self.chi_n,
                    doppler_width,
                });
            }
        }
        Ok(warnings)
    }

    /// Reads parameters from a TOML file (or JSON when the extension is `.json`).
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let params: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        Ok(params)
    }
}

/// Largest per-point frequency for a point with momentum magnitude `p_max`.
///
/// Includes the kinetic term, the magnitude of the local effective field and
/// the rotating-frame offset, so it bounds the spectral radius of every
/// per-point Hamiltonian used by the integrators.
pub fn max_frequency(chi_n: f64, theta: f64, p_max: f64) -> f64 {
    let half_chi = 0.5 * chi_n;
    units::kinetic(p_max * p_max) + (p_max * p_max + half_chi * half_chi).sqrt() + (half_chi * theta.cos()).abs()
}

pub(crate) fn check_step(dt: f64, max_freq: f64) -> Result<()> {
    let product = dt * max_freq;
    if product > STEP_GUARD {
        return Err(Error::StepGuard {
            dt,
            max_freq,
            product,
            limit: STEP_GUARD,
        });
    }
    Ok(())
}
