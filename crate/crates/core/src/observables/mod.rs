//! Position-space observables: densities, Gaussian widths, χ sweeps and the
//! two-arm interferometric detection sequence.

mod density;
mod fit;
mod interferometer;

pub use density::{
    default_axis, fringe_density, position_density, position_density_hd, uniform_axis, Branch, DensityProfile,
    Synthesizer, CAPTURE_FRACTION,
};
pub use fit::{fit_gaussian, fit_gaussian_2d, moments, Fit2D, FitResult};
pub use interferometer::{interferometer_sequence, ContrastSample, ContrastSeries, DetectionSetup};

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics1d::{evolve, frame_rate, Coupling, EvolveOptions, SpinorField1D, Trajectory1D};
use crate::dynamics_hd::TrajectoryHD;
use crate::ensemble::{build_ensemble, MomentumEnsemble};
use crate::error::{invalid, Result};
use crate::params::SimulationParams;
use crate::units;

/// Per-branch Gaussian widths over time, normalized by the first sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WidthSeries {
    pub times: Vec<f64>,
    pub down: Vec<FitResult>,
    pub up: Vec<FitResult>,
    pub ratio_down: Vec<f64>,
    pub ratio_up: Vec<f64>,
}

impl WidthSeries {
    /// Largest ratio over both branches and all times.
    pub fn max_ratio(&self) -> f64 {
        self.ratio_down
            .iter()
            .chain(&self.ratio_up)
            .copied()
            .fold(0.0, f64::max)
    }

    pub fn all_converged(&self) -> bool {
        self.down.iter().chain(&self.up).all(|f| f.converged)
    }
}

fn ratios(fits: &[FitResult]) -> Vec<f64> {
    let s0 = fits[0].sigma;
    fits.iter().map(|f| f.sigma / s0).collect()
}

/// Fits both branch densities at every recorded time.
pub fn width_series(trajectory: &Trajectory1D, ensemble: &MomentumEnsemble, z_grid: &[f64]) -> Result<WidthSeries> {
    let synth = Synthesizer::new(ensemble, z_grid)?;
    let fits: Vec<(FitResult, FitResult)> = trajectory
        .samples
        .par_iter()
        .map(|s| {
            let d = synth.branch_1d(s, Branch::Down)?;
            let u = synth.branch_1d(s, Branch::Up)?;
            Ok((fit_gaussian(z_grid, &d.density), fit_gaussian(z_grid, &u.density)))
        })
        .collect::<Result<_>>()?;
    let (down, up): (Vec<_>, Vec<_>) = fits.into_iter().unzip();
    Ok(WidthSeries {
        times: trajectory.times().collect(),
        ratio_down: ratios(&down),
        ratio_up: ratios(&up),
        down,
        up,
    })
}

/// Full-covariance widths of one branch on a 2D tensor grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WidthSeries2D {
    pub times: Vec<f64>,
    pub fits: Vec<Fit2D>,
    /// σ_x(t)/σ_x(0) and σ_z(t)/σ_z(0).
    pub ratio_x: Vec<f64>,
    pub ratio_z: Vec<f64>,
}

impl WidthSeries2D {
    pub fn from_profiles(profiles: &[DensityProfile]) -> Result<Self> {
        if profiles.is_empty() || profiles.iter().any(|p| p.dimension != 2) {
            return Err(invalid("profiles", "need at least one 2D density"));
        }
        let fits: Vec<Fit2D> = profiles
            .par_iter()
            .map(|p| fit_gaussian_2d(&p.axis, &p.density))
            .collect();
        let [sx0, sz0] = fits[0].axis_sigmas();
        Ok(Self {
            times: profiles.iter().map(|p| p.time).collect(),
            ratio_x: fits.iter().map(|f| f.axis_sigmas()[0] / sx0).collect(),
            ratio_z: fits.iter().map(|f| f.axis_sigmas()[1] / sz0).collect(),
            fits,
        })
    }

    /// ⇓-branch widths of a dressed-basis run.
    pub fn from_trajectory(trajectory: &TrajectoryHD, ensemble: &MomentumEnsemble, axis: &[f64]) -> Result<Self> {
        let synth = Synthesizer::new(ensemble, axis)?;
        let profiles = trajectory
            .samples
            .par_iter()
            .map(|s| synth.branch_hd(s, Branch::Down))
            .collect::<Result<Vec<_>>>()?;
        Self::from_profiles(&profiles)
    }

    /// ⇓-branch widths of a two-level run on a 2D ensemble.
    pub fn from_two_level(trajectory: &Trajectory1D, ensemble: &MomentumEnsemble, axis: &[f64]) -> Result<Self> {
        let synth = Synthesizer::new(ensemble, axis)?;
        let profiles = trajectory
            .samples
            .par_iter()
            .map(|s| synth.branch_1d(s, Branch::Down))
            .collect::<Result<Vec<_>>>()?;
        Self::from_profiles(&profiles)
    }
}

/// One χ value of a width sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    #[serde(rename = "chiN")]
    pub chi_n: f64,
    /// Population-weighted mean of the branch ratios σ(t_d)/σ(0).
    pub ratio: f64,
    pub ratio_down: f64,
    pub ratio_up: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub theta: f64,
    pub t_d: f64,
    pub points: Vec<SweepPoint>,
    #[serde(rename = "argmin_chiN")]
    pub argmin_chi_n: f64,
    #[serde(rename = "chi_opt_N")]
    pub chi_opt_n: f64,
    /// False when |χ_opt(θ)N| < 10·2kσ_p/M: the locked regime, and with it
    /// a sharp minimum, is not reachable at this σ_p.
    pub locked_valid: bool,
}

/// Default sweep duration 2π·30/|χ_opt N| at θ = π/2, i.e. 30τ.
pub fn default_sweep_duration() -> f64 {
    30.0 * units::tau()
}

/// Terminal normalized width for each χN in `chi_grid` at polar angle θ.
///
/// Ensemble, step size and z-grid come from `params`; its χN, θ and
/// t_final are ignored. Points run in parallel.
pub fn sweep_width_vs_chi(
    theta: f64,
    chi_grid: &[f64],
    t_d: Option<f64>,
    params: &SimulationParams,
) -> Result<SweepResult> {
    if chi_grid.is_empty() {
        return Err(invalid("chi_grid", "must not be empty"));
    }
    let t_d = t_d.unwrap_or_else(default_sweep_duration);
    let ensemble = build_ensemble(params)?;
    if ensemble.dimension() != 1 {
        return Err(invalid("dimension", "width sweeps run in 1D"));
    }
    let z_grid = default_axis(params.sigma_p, t_d, true, 2048);
    let synth = Synthesizer::new(&ensemble, &z_grid)?;
    let field = SpinorField1D::polar(ensemble.len(), theta, 0.0);
    let (pop_down, pop_up) = field.populations(ensemble.weights());
    let fit0 = |b| synth.branch_1d(&field, b).map(|d| fit_gaussian(&z_grid, &d.density));
    let (s0_down, s0_up) = (fit0(Branch::Down)?, fit0(Branch::Up)?);

    let points = chi_grid
        .par_iter()
        .map(|&chi_n| {
            let opts = EvolveOptions::new(t_d, params.dt_natural()).with_frame_rate(frame_rate(chi_n, theta));
            let traj = evolve(&field, &ensemble, Coupling::Exchange { chi_n }, &opts)?;
            let end = traj.last();
            let fd = fit_gaussian(&z_grid, &synth.branch_1d(end, Branch::Down)?.density);
            let fu = fit_gaussian(&z_grid, &synth.branch_1d(end, Branch::Up)?.density);
            let (rd, ru) = (fd.sigma / s0_down.sigma, fu.sigma / s0_up.sigma);
            Ok(SweepPoint {
                chi_n,
                ratio: (pop_down * rd + pop_up * ru) / (pop_down + pop_up),
                ratio_down: rd,
                ratio_up: ru,
                converged: fd.converged && fu.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let argmin_chi_n = points
        .iter()
        .min_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .map(|p| p.chi_n)
        .expect("non-empty grid");
    let chi_opt_n = units::chi_opt_n(theta);
    Ok(SweepResult {
        theta,
        t_d,
        points,
        argmin_chi_n,
        chi_opt_n,
        // Relative slack so that exact equality survives rounding.
        locked_valid: chi_opt_n.abs() >= 10.0 * units::doppler(params.sigma_p).abs() * (1.0 - 1e-9),
    })
}
