//! Position-space densities by Fourier synthesis over a momentum grid.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::dynamics1d::SpinorField1D;
use crate::dynamics_hd::SpinorFieldHD;
use crate::ensemble::MomentumEnsemble;
use crate::error::{invalid, Error, Result};
use crate::units;

/// Fraction of a branch's population that must fall inside the grid.
pub const CAPTURE_FRACTION: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Down,
    Up,
}

/// Density of one branch on a uniform grid, the same axis in every dimension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityProfile {
    pub dimension: usize,
    pub axis: Vec<f64>,
    pub branch: Branch,
    /// Flattened with the last axis fastest.
    pub density: Vec<f64>,
    pub time: f64,
}

impl DensityProfile {
    pub fn spacing(&self) -> f64 {
        self.axis[1] - self.axis[0]
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dimension as i32)
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.cell_volume()
    }

    /// Density integrated over every axis except `axis`.
    pub fn marginal(&self, axis: usize) -> Vec<f64> {
        let n = self.axis.len();
        let inner = n.pow((self.dimension - axis - 1) as u32);
        let mut out = vec![0.0; n];
        for (i, v) in self.density.iter().enumerate() {
            out[(i / inner) % n] += v;
        }
        let dv = self.spacing().powi(self.dimension as i32 - 1);
        out.iter_mut().for_each(|v| *v *= dv);
        out
    }
}

/// Default axis: span 40 σ_z(0) plus an optional ballistic margin 2ħk t/M.
pub fn default_axis(sigma_p: f64, t_final: f64, drift: bool, points: usize) -> Vec<f64> {
    let span = 40.0 * units::min_uncertainty_width(sigma_p)
        + if drift {
            2.0 * units::RECOIL_VELOCITY * t_final
        } else {
            0.0
        };
    uniform_axis(span, points)
}

/// `points` nodes on [−span/2, span/2].
pub fn uniform_axis(span: f64, points: usize) -> Vec<f64> {
    let step = span / (points - 1) as f64;
    (0..points).map(|i| -0.5 * span + i as f64 * step).collect()
}

/// Precomputed phase tables for one momentum grid and one position axis.
#[derive(Debug, Clone)]
pub struct Synthesizer {
    dimension: usize,
    n_p: usize,
    axis: Vec<f64>,
    /// e^{i p_b z_j}, row-major [b][j].
    phases: Vec<C64>,
    sqrt_weights: Vec<f64>,
    prefactor: f64,
}

impl Synthesizer {
    pub fn new(ensemble: &MomentumEnsemble, axis: &[f64]) -> Result<Self> {
        let p_axis = ensemble.axis().ok_or(Error::NotGridEnsemble)?;
        let dp = ensemble.spacing().ok_or(Error::NotGridEnsemble)?;
        if axis.len() < 2 {
            return Err(invalid("z_grid", "needs at least two points"));
        }
        let dz = axis[1] - axis[0];
        if !(dz > 0.0)
            || axis
                .windows(2)
                .any(|w| ((w[1] - w[0]) - dz).abs() > 1e-9 * dz.abs().max(1.0))
        {
            return Err(invalid("z_grid", "must be uniform and increasing"));
        }
        let span = axis[axis.len() - 1] - axis[0];
        let period = 2.0 * std::f64::consts::PI / dp;
        if span >= period {
            return Err(invalid(
                "z_grid",
                format!("span {span:.4} exceeds the synthesis period 2π/Δp = {period:.4}; refine the momentum grid"),
            ));
        }
        let phases = p_axis
            .iter()
            .flat_map(|p| axis.iter().map(move |z| C64::from_polar(1.0, p * z / units::HBAR)))
            .collect();
        let dimension = ensemble.dimension();
        Ok(Self {
            dimension,
            n_p: p_axis.len(),
            axis: axis.to_vec(),
            phases,
            sqrt_weights: ensemble.weights().iter().map(|w| w.sqrt()).collect(),
            prefactor: (dp / (2.0 * std::f64::consts::PI)).powf(0.5 * dimension as f64),
        })
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    /// Complex field Σ_n √w_n c_n e^{i p_n·r} on the position grid.
    pub fn amplitude(&self, coefficients: &[C64]) -> Vec<C64> {
        let nz = self.axis.len();
        let mut data: Vec<C64> = coefficients
            .iter()
            .zip(&self.sqrt_weights)
            .map(|(c, w)| c * (w * self.prefactor))
            .collect();
        let mut shape = vec![self.n_p; self.dimension];
        for k in 0..self.dimension {
            let outer: usize = shape[..k].iter().product();
            let inner: usize = shape[k + 1..].iter().product();
            let mut out = vec![C64::default(); outer * nz * inner];
            for o in 0..outer {
                for b in 0..self.n_p {
                    let src = &data[(o * self.n_p + b) * inner..(o * self.n_p + b + 1) * inner];
                    let row = &self.phases[b * nz..(b + 1) * nz];
                    for (j, e) in row.iter().enumerate() {
                        let dst = &mut out[(o * nz + j) * inner..(o * nz + j + 1) * inner];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += s * e;
                        }
                    }
                }
            }
            data = out;
            shape[k] = nz;
        }
        data
    }

    pub fn density(&self, coefficients: &[C64]) -> Vec<f64> {
        self.amplitude(coefficients).iter().map(C64::norm_sqr).collect()
    }

    fn profile(&self, branch: Branch, density: Vec<f64>, population: f64, time: f64) -> Result<DensityProfile> {
        let profile = DensityProfile {
            dimension: self.dimension,
            axis: self.axis.clone(),
            branch,
            density,
            time,
        };
        if population > 1e-12 {
            let captured = profile.integral() / population;
            if captured < CAPTURE_FRACTION {
                let span = self.axis[self.axis.len() - 1] - self.axis[0];
                return Err(Error::GridTooSmall {
                    captured,
                    suggested_span: 2.0 * span,
                });
            }
        }
        Ok(profile)
    }

    /// Branch density of a 1D-layout field (also used for the naive 2D scheme).
    pub fn branch_1d(&self, field: &SpinorField1D, branch: Branch) -> Result<DensityProfile> {
        let amps = match branch {
            Branch::Down => &field.psi_down,
            Branch::Up => &field.psi_up,
        };
        if amps.len() != self.sqrt_weights.len() {
            return Err(Error::LengthMismatch {
                what: "spinor field",
                got: amps.len(),
                expected: self.sqrt_weights.len(),
            });
        }
        let population = weighted_population(amps, &self.sqrt_weights);
        self.profile(branch, self.density(amps), population, field.time)
    }

    /// Branch density of a dressed-basis field. The ⇑ branch is the
    /// incoherent sum over the bare recoil states.
    pub fn branch_hd(&self, field: &SpinorFieldHD, branch: Branch) -> Result<DensityProfile> {
        if field.len() != self.sqrt_weights.len() || field.dimension != self.dimension {
            return Err(Error::LengthMismatch {
                what: "dressed spinor field",
                got: field.len(),
                expected: self.sqrt_weights.len(),
            });
        }
        match branch {
            Branch::Down => {
                let amps = field.down();
                let population = weighted_population(&amps, &self.sqrt_weights);
                self.profile(branch, self.density(&amps), population, field.time)
            }
            Branch::Up => {
                let bare: Vec<Vec<C64>> = (0..field.len()).map(|n| field.bare_up(n)).collect();
                let mut total = vec![0.0; self.axis.len().pow(self.dimension as u32)];
                let mut population = 0.0;
                for s in 0..bare[0].len() {
                    let amps: Vec<C64> = bare.iter().map(|b| b[s]).collect();
                    population += weighted_population(&amps, &self.sqrt_weights);
                    for (t, d) in total.iter_mut().zip(self.density(&amps)) {
                        *t += d;
                    }
                }
                self.profile(branch, total, population, field.time)
            }
        }
    }
}

fn weighted_population(amps: &[C64], sqrt_weights: &[f64]) -> f64 {
    amps.iter().zip(sqrt_weights).map(|(a, s)| s * s * a.norm_sqr()).sum()
}

/// Branch density |A_σ(z,t)|² of a 1D field. Carrier momenta ∓ħk do not
/// change a single branch's density and are omitted.
pub fn position_density(
    field: &SpinorField1D,
    ensemble: &MomentumEnsemble,
    z_grid: &[f64],
    branch: Branch,
) -> Result<DensityProfile> {
    Synthesizer::new(ensemble, z_grid)?.branch_1d(field, branch)
}

/// Branch density of a 2D/3D dressed field on a tensor grid built from `axis`.
pub fn position_density_hd(
    field: &SpinorFieldHD,
    ensemble: &MomentumEnsemble,
    axis: &[f64],
    branch: Branch,
) -> Result<DensityProfile> {
    Synthesizer::new(ensemble, axis)?.branch_hd(field, branch)
}

/// Coherent 1D density |A⇓ e^{−ikz} + A⇑ e^{ikz}|² including the
/// interference fringes between the two branches.
pub fn fringe_density(field: &SpinorField1D, ensemble: &MomentumEnsemble, z_grid: &[f64]) -> Result<Vec<f64>> {
    let synth = Synthesizer::new(ensemble, z_grid)?;
    let down = synth.amplitude(&field.psi_down);
    let up = synth.amplitude(&field.psi_up);
    Ok(z_grid
        .iter()
        .zip(down.iter().zip(&up))
        .map(|(z, (d, u))| {
            let carrier = C64::from_polar(1.0, units::K * z);
            (d * carrier.conj() + u * carrier).norm_sqr()
        })
        .collect())
}
