//! Naive two-level 2D scheme: ⇓ at p couples only to ⇑ at p + K for a single
//! recoil vector K, so the flat direction is set by K alone.

use nalgebra::Matrix2;

use crate::dynamics1d::{Coupling, Model1D};
use crate::ensemble::MomentumEnsemble;
use crate::error::{invalid, Result};
use crate::units;

/// Lower-branch dispersion of the naive scheme around p = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveDispersion {
    pub chi_n: f64,
    pub recoil: [f64; 2],
    /// Hessian of E(p) at the origin; the off-diagonal entry is the
    /// p_x p_z cross coefficient.
    pub hessian: Matrix2<f64>,
}

impl NaiveDispersion {
    /// E(p) = p²/2M + sgn(χN)·½√(χN² + (K·p)²).
    pub fn energy(&self, p: [f64; 2]) -> f64 {
        let kp = self.recoil[0] * p[0] + self.recoil[1] * p[1];
        let branch = 0.5 * self.chi_n.signum() * (self.chi_n * self.chi_n + kp * kp).sqrt();
        units::kinetic(p[0] * p[0] + p[1] * p[1]) + branch
    }

    pub fn cross_coefficient(&self) -> f64 {
        self.hessian[(0, 1)]
    }

    /// Eigenvalues of the Hessian, ascending. One of them is always 1/M.
    pub fn principal_curvatures(&self) -> [f64; 2] {
        let ev = self.hessian.symmetric_eigenvalues();
        let (a, b) = (ev[0], ev[1]);
        [a.min(b), a.max(b)]
    }
}

/// Expansion of the naive-scheme energy for recoil vector `recoil` (units of k).
pub fn naive_2d_dispersion(chi_n: f64, recoil: [f64; 2]) -> Result<NaiveDispersion> {
    if !(chi_n.is_finite() && chi_n != 0.0) {
        return Err(invalid("chiN", format!("must be finite and nonzero, got {chi_n}")));
    }
    let k = nalgebra::Vector2::new(recoil[0], recoil[1]) * units::K;
    let hessian = Matrix2::identity() / units::MASS + k * k.transpose() / (2.0 * chi_n.abs()) * chi_n.signum();
    Ok(NaiveDispersion { chi_n, recoil, hessian })
}

/// Two-level exchange model on a 2D ensemble with splitting ±(K·p)/2.
pub fn naive_2d_model(ensemble: &MomentumEnsemble, chi_n: f64, recoil: [f64; 2]) -> Result<Model1D> {
    if ensemble.dimension() != 2 {
        return Err(invalid("ensemble", "naive scheme needs a 2D ensemble"));
    }
    let (down, up) = ensemble
        .points()
        .map(|p| {
            let kin = units::kinetic(p[0] * p[0] + p[1] * p[1]);
            let split = 0.5 * units::K * (recoil[0] * p[0] + recoil[1] * p[1]) / units::MASS;
            (kin - split, kin + split)
        })
        .unzip();
    Model1D::from_frequencies(down, up, ensemble.weights().to_vec(), Coupling::Exchange { chi_n })
}
