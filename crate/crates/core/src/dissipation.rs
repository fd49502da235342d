//! Balanced dual-pump dissipation at the collective (Bloch vector) level.
//!
//! Each pump scatters photons out of the cavity at rate Γ_i. Pump 1 drives
//! ⇓ → ⇑ and pump 2 the reverse, so with Γ1 = Γ2 the collectively enhanced
//! (superradiant) terms cancel and only single-atom damping remains.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::params::check_step;
use crate::rk4::Rk4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityParams {
    pub g: f64,
    #[serde(rename = "Delta0")]
    pub delta0: f64,
    pub kappa: f64,
    pub alpha_sq_1: f64,
    pub alpha_sq_2: f64,
    #[serde(rename = "Delta1")]
    pub delta1: f64,
    #[serde(rename = "Delta2")]
    pub delta2: f64,
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(invalid("kappa", format!("must be > 0, got {}", self.kappa)));
        }
        for (name, v) in [("alpha_sq_1", self.alpha_sq_1), ("alpha_sq_2", self.alpha_sq_2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        if !(self.delta0.is_finite() && self.delta0 != 0.0) {
            return Err(invalid("Delta0", "must be finite and nonzero"));
        }
        Ok(())
    }
}

/// Γ_i = (g²/4Δ₀)² |α_i|² κ / (Δ_i² + (κ/2)²).
pub fn gamma_rates(c: &CavityParams) -> Result<(f64, f64)> {
    c.validate()?;
    let prefactor = (c.g * c.g / (4.0 * c.delta0)).powi(2);
    let lorentz = |delta: f64| c.kappa / (delta * delta + 0.25 * c.kappa * c.kappa);
    Ok((
        prefactor * c.alpha_sq_1 * lorentz(c.delta1),
        prefactor * c.alpha_sq_2 * lorentz(c.delta2),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectiveBloch {
    #[serde(rename = "S_X")]
    pub s_x: f64,
    #[serde(rename = "S_Y")]
    pub s_y: f64,
    #[serde(rename = "S_Z")]
    pub s_z: f64,
    #[serde(rename = "N_atoms")]
    pub n_atoms: u64,
}

impl CollectiveBloch {
    /// Coherent spin state of length N/2 at polar angle θ (from +Z) and azimuth φ.
    pub fn coherent(n_atoms: u64, theta: f64, phi: f64) -> Self {
        let r = 0.5 * n_atoms as f64;
        Self {
            s_x: r * theta.sin() * phi.cos(),
            s_y: r * theta.sin() * phi.sin(),
            s_z: r * theta.cos(),
            n_atoms,
        }
    }

    pub fn length_sq(&self) -> f64 {
        self.s_x * self.s_x + self.s_y * self.s_y + self.s_z * self.s_z
    }

    pub fn transverse(&self) -> f64 {
        self.s_x.hypot(self.s_y)
    }

    fn as_array(&self) -> [f64; 3] {
        [self.s_x, self.s_y, self.s_z]
    }

    fn with(&self, v: [f64; 3]) -> Self {
        Self {
            s_x: v[0],
            s_y: v[1],
            s_z: v[2],
            n_atoms: self.n_atoms,
        }
    }
}

fn check_rates(gamma1: f64, gamma2: f64) -> Result<()> {
    for (name, g) in [("Gamma1", gamma1), ("Gamma2", gamma2)] {
        if !(g.is_finite() && g >= 0.0) {
            return Err(invalid(name, format!("must be >= 0, got {g}")));
        }
    }
    Ok(())
}

fn raw_derivative(s: [f64; 3], chi: f64, gamma1: f64, gamma2: f64) -> [f64; 3] {
    let [x, y, z] = s;
    let precession = -2.0 * chi * z;
    let transverse_damping = 0.5 * (gamma1 + gamma2);
    // Factorized ⟨S₊S₋⟩ drift; vanishes when the pumps are balanced. The
    // transverse part keeps the drift norm-preserving.
    let drift = gamma2 - gamma1;
    [
        -precession * y + (drift * z - transverse_damping) * x,
        precession * x + (drift * z - transverse_damping) * y,
        -drift * (x * x + y * y) - (gamma1 + gamma2) * z,
    ]
}

/// dS/dt under the unitary precession and pump-induced damping.
///
/// `chi_n` is (χ₁+χ₂)N; the precession rate about Z is −2(χ₁+χ₂)S_Z.
pub fn bloch_derivative(s: &CollectiveBloch, chi_n: f64, gamma1: f64, gamma2: f64) -> Result<CollectiveBloch> {
    check_rates(gamma1, gamma2)?;
    if s.n_atoms == 0 {
        return Err(invalid("N_atoms", "must be positive"));
    }
    let chi = chi_n / s.n_atoms as f64;
    Ok(s.with(raw_derivative(s.as_array(), chi, gamma1, gamma2)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlochSample {
    pub t: f64,
    #[serde(rename = "S_X")]
    pub s_x: f64,
    #[serde(rename = "S_Y")]
    pub s_y: f64,
    #[serde(rename = "S_Z")]
    pub s_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlochTrajectory {
    pub n_atoms: u64,
    pub samples: Vec<BlochSample>,
}

impl BlochTrajectory {
    pub fn state(&self, i: usize) -> CollectiveBloch {
        let s = &self.samples[i];
        CollectiveBloch {
            s_x: s.s_x,
            s_y: s.s_y,
            s_z: s.s_z,
            n_atoms: self.n_atoms,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }
}

/// RK4 integration of [`bloch_derivative`], recording every step.
pub fn evolve_bloch(
    s0: &CollectiveBloch,
    chi_n: f64,
    gamma1: f64,
    gamma2: f64,
    t_final: f64,
    dt: f64,
) -> Result<BlochTrajectory> {
    check_rates(gamma1, gamma2)?;
    if s0.n_atoms == 0 {
        return Err(invalid("N_atoms", "must be positive"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid("dt", format!("must be > 0, got {dt}")));
    }
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(invalid("t_final", format!("must be >= 0, got {t_final}")));
    }
    let half_n = 0.5 * s0.n_atoms as f64;
    let chi = chi_n / s0.n_atoms as f64;
    let max_rate = 2.0 * chi.abs() * half_n + gamma1 + gamma2 + (gamma2 - gamma1).abs() * half_n;
    let steps = (t_final / dt).round() as usize;
    let dt = if steps == 0 { dt } else { t_final / steps as f64 };
    check_step(dt, max_rate)?;

    let mut y = s0.as_array();
    let mut rk = Rk4::new(3);
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(BlochSample {
        t: 0.0,
        s_x: y[0],
        s_y: y[1],
        s_z: y[2],
    });
    for step in 1..=steps {
        rk.step(&mut y, dt, |v, dv| {
            let d = raw_derivative([v[0], v[1], v[2]], chi, gamma1, gamma2);
            dv.copy_from_slice(&d);
        });
        let t = step as f64 * dt;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalAbort {
                time: t,
                detail: "non-finite Bloch vector".into(),
            });
        }
        samples.push(BlochSample {
            t,
            s_x: y[0],
            s_y: y[1],
            s_z: y[2],
        });
    }
    Ok(BlochTrajectory {
        n_atoms: s0.n_atoms,
        samples,
    })
}

/// Least-squares slope of ln|v| against t, returned as a positive decay rate.
///
/// Points where |v| is not positive are skipped.
pub fn fit_decay_rate(times: &[f64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| v.abs() > 0.0)
        .map(|(t, v)| (*t, v.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}
