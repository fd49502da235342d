//! One-dimensional two-branch mean-field dynamics.
//!
//! Each ensemble point p_n carries a pseudospin made of the recoil branches
//! |p−ħk⟩ (⇓) and |p+ħk⟩ (⇑). In the frame rotating at the Zeeman splitting
//! the per-point Hamiltonian is
//!
//! ```text
//! ω⇓(p) = p²/2Mħ − kp/M + Δ/2,   ω⇑(p) = p²/2Mħ + kp/M − Δ/2
//! ```
//!
//! where Δ = χN cos θ is the optional rotation that keeps the collective field
//! stationary for a tilted initial Bloch vector. The exchange term couples the
//! branches through the weighted ensemble coherence D = Σ_m w_m ψ⇑*(p_m) ψ⇓(p_m).

mod closed_form;
pub mod dicke;
mod dispersion;

pub use closed_form::closed_form_solution;
pub use dispersion::{
    branch_curvature, branch_energy, dispersion, effective_mass, polyfit, sound_speed, DispersionCurve,
};

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::ensemble::MomentumEnsemble;
use crate::error::{Error, Result};
use crate::params::check_step;
use crate::rk4::Rk4;
use crate::units;

/// Per-point amplitudes on the ⇓ and ⇑ branches.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpinorField1D {
    pub psi_down: Vec<C64>,
    pub psi_up: Vec<C64>,
    pub time: f64,
}

impl SpinorField1D {
    /// Every point in the state cos(θ/2)|⇓⟩ + e^{iφ} sin(θ/2)|⇑⟩.
    pub fn polar(len: usize, theta: f64, phi: f64) -> Self {
        let down = C64::new((0.5 * theta).cos(), 0.0);
        let up = C64::from_polar((0.5 * theta).sin(), phi);
        Self {
            psi_down: vec![down; len],
            psi_up: vec![up; len],
            time: 0.0,
        }
    }

    /// State prepared by a π/2 Bragg pulse.
    pub fn equal_superposition(len: usize) -> Self {
        Self::polar(len, std::f64::consts::FRAC_PI_2, 0.0)
    }

    pub fn len(&self) -> usize {
        self.psi_down.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi_down.is_empty()
    }

    pub fn norms(&self) -> impl Iterator<Item = f64> + '_ {
        self.psi_down
            .iter()
            .zip(&self.psi_up)
            .map(|(d, u)| d.norm_sqr() + u.norm_sqr())
    }

    /// Weighted S_Z per atom, Σ_n w_n (|ψ⇑|² − |ψ⇓|²)/2.
    pub fn magnetization(&self, weights: &[f64]) -> f64 {
        self.psi_down
            .iter()
            .zip(&self.psi_up)
            .zip(weights)
            .map(|((d, u), w)| 0.5 * w * (u.norm_sqr() - d.norm_sqr()))
            .sum()
    }

    /// Ensemble coherence D = Σ_n w_n ψ⇑* ψ⇓.
    pub fn coherence(&self, weights: &[f64]) -> C64 {
        coherence(&self.psi_down, &self.psi_up, weights)
    }

    /// Weighted branch populations (⇓, ⇑).
    pub fn populations(&self, weights: &[f64]) -> (f64, f64) {
        let down = self.psi_down.iter().zip(weights).map(|(a, w)| w * a.norm_sqr()).sum();
        let up = self.psi_up.iter().zip(weights).map(|(a, w)| w * a.norm_sqr()).sum();
        (down, up)
    }

    /// Rotation by φ about Z: ψ⇑ → e^{iφ} ψ⇑.
    pub fn rotate_z(&mut self, phi: f64) {
        let phase = C64::from_polar(1.0, phi);
        self.psi_up.iter_mut().for_each(|u| *u *= phase);
    }

    /// Instantaneous π rotation about the equatorial axis at azimuth `axis_phase`.
    pub fn pi_pulse(&mut self, axis_phase: f64) {
        pi_pulse_pair(&mut self.psi_down, &mut self.psi_up, axis_phase);
    }

    fn to_flat(&self) -> Vec<C64> {
        let mut y = Vec::with_capacity(2 * self.len());
        y.extend_from_slice(&self.psi_down);
        y.extend_from_slice(&self.psi_up);
        y
    }

    fn from_flat(y: &[C64], time: f64) -> Self {
        let n = y.len() / 2;
        Self {
            psi_down: y[..n].to_vec(),
            psi_up: y[n..].to_vec(),
            time,
        }
    }
}

pub(crate) fn coherence(down: &[C64], up: &[C64], weights: &[f64]) -> C64 {
    down.iter()
        .zip(up)
        .zip(weights)
        .map(|((d, u), w)| u.conj() * d * *w)
        .sum()
}

/// exp(−iπ n̂·σ/2) with n̂ = (cos φ, sin φ, 0), in the (⇑, ⇓) Pauli convention.
pub(crate) fn pi_pulse_pair(down: &mut [C64], up: &mut [C64], axis_phase: f64) {
    let to_up = C64::from_polar(1.0, -axis_phase) * -C64::i();
    let to_down = C64::from_polar(1.0, axis_phase) * -C64::i();
    for (d, u) in down.iter_mut().zip(up.iter_mut()) {
        let (old_d, old_u) = (*d, *u);
        *u = to_up * old_d;
        *d = to_down * old_u;
    }
}

/// How the two branches of a point are coupled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Coupling {
    /// Self-consistent cavity exchange with strength χN.
    Exchange { chi_n: f64 },
    /// External transverse drive with Rabi frequency Ω (no self-consistency).
    Drive { omega: f64 },
}

impl Coupling {
    fn strength(&self) -> f64 {
        match *self {
            Coupling::Exchange { chi_n } => chi_n,
            Coupling::Drive { omega } => omega,
        }
    }
}

/// Precomputed single-particle frequencies for one ensemble and coupling.
#[derive(Debug, Clone)]
pub struct Model1D {
    omega_down: Vec<f64>,
    omega_up: Vec<f64>,
    weights: Vec<f64>,
    coupling: Coupling,
}

impl Model1D {
    /// `frame_rate` is the rotating-frame rate Δ (use [`frame_rate`]).
    pub fn new(ensemble: &MomentumEnsemble, coupling: Coupling, frame_rate: f64) -> Result<Self> {
        if ensemble.dimension() != 1 {
            return Err(crate::error::invalid(
                "ensemble",
                "one-dimensional dynamics need a 1D ensemble",
            ));
        }
        let (omega_down, omega_up) = ensemble
            .points()
            .map(|p| {
                let kin = units::kinetic(p[0] * p[0]);
                let split = 0.5 * (units::doppler(p[0]) - frame_rate);
                (kin - split, kin + split)
            })
            .unzip();
        Ok(Self {
            omega_down,
            omega_up,
            weights: ensemble.weights().to_vec(),
            coupling,
        })
    }

    /// Two-level model with explicit per-point frequencies, for ensembles of
    /// any dimension.
    pub fn from_frequencies(
        omega_down: Vec<f64>,
        omega_up: Vec<f64>,
        weights: Vec<f64>,
        coupling: Coupling,
    ) -> Result<Self> {
        if omega_down.len() != weights.len() || omega_up.len() != weights.len() {
            return Err(Error::LengthMismatch {
                what: "frequency table",
                got: omega_down.len().max(omega_up.len()),
                expected: weights.len(),
            });
        }
        Ok(Self {
            omega_down,
            omega_up,
            weights,
            coupling,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Bound on the spectral radius of every per-point Hamiltonian.
    pub fn max_frequency(&self) -> f64 {
        let off = 0.5 * self.coupling.strength().abs();
        self.omega_down
            .iter()
            .zip(&self.omega_up)
            .map(|(d, u)| {
                let mean = 0.5 * (d + u);
                let half = 0.5 * (u - d);
                mean.abs() + (half * half + off * off).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Off-diagonal element coupling ψ⇑ into the ⇓ equation.
    fn field(&self, down: &[C64], up: &[C64]) -> C64 {
        match self.coupling {
            Coupling::Exchange { chi_n } => coherence(down, up, &self.weights) * chi_n,
            Coupling::Drive { omega } => C64::new(0.5 * omega, 0.0),
        }
    }

    /// Writes H ψ (that is, i dψ/dt) for the flat layout [ψ⇓..., ψ⇑...].
    fn apply_hamiltonian(&self, y: &[C64], out: &mut [C64]) {
        let n = self.len();
        let (down, up) = y.split_at(n);
        let (out_down, out_up) = out.split_at_mut(n);
        let field = self.field(down, up);
        let field_conj = field.conj();
        for i in 0..n {
            out_down[i] = down[i] * self.omega_down[i] + up[i] * field;
            out_up[i] = up[i] * self.omega_up[i] + down[i] * field_conj;
        }
    }

    fn rhs(&self, y: &[C64], dy: &mut [C64]) {
        self.apply_hamiltonian(y, dy);
        let minus_i = -C64::i();
        dy.iter_mut().for_each(|v| *v *= minus_i);
    }

    /// Mean-field energy functional; conserved by [`evolve`].
    pub fn energy(&self, field: &SpinorField1D) -> f64 {
        let single: f64 = (0..self.len())
            .map(|i| {
                self.weights[i]
                    * (self.omega_down[i] * field.psi_down[i].norm_sqr()
                        + self.omega_up[i] * field.psi_up[i].norm_sqr())
            })
            .sum();
        let coh = field.coherence(&self.weights);
        let interaction = match self.coupling {
            Coupling::Exchange { chi_n } => chi_n * coh.norm_sqr(),
            Coupling::Drive { omega } => omega * coh.re,
        };
        single + interaction
    }
}

/// Rotating-frame rate Δ = χN cos θ that freezes the collective field.
pub fn frame_rate(chi_n: f64, theta: f64) -> f64 {
    let c = theta.cos();
    // cos(π/2) is not exactly zero in floating point.
    if c.abs() < 1e-15 {
        0.0
    } else {
        chi_n * c
    }
}

fn check_len(field: &SpinorField1D, ensemble: &MomentumEnsemble) -> Result<()> {
    if field.psi_down.len() != ensemble.len() || field.psi_up.len() != ensemble.len() {
        return Err(Error::LengthMismatch {
            what: "spinor field",
            got: field.psi_down.len().max(field.psi_up.len()),
            expected: ensemble.len(),
        });
    }
    Ok(())
}

fn hamiltonian_action(field: &SpinorField1D, model: &Model1D) -> SpinorField1D {
    let y = field.to_flat();
    let mut out = vec![C64::default(); y.len()];
    model.apply_hamiltonian(&y, &mut out);
    SpinorField1D::from_flat(&out, field.time)
}

/// i dψ/dt under the exchange equations of motion.
///
/// `theta_frame` selects the rotating frame Δ = χN cos θ_frame.
pub fn derivative(
    field: &SpinorField1D,
    ensemble: &MomentumEnsemble,
    chi_n: f64,
    theta_frame: f64,
) -> Result<SpinorField1D> {
    check_len(field, ensemble)?;
    let model = Model1D::new(ensemble, Coupling::Exchange { chi_n }, frame_rate(chi_n, theta_frame))?;
    Ok(hamiltonian_action(field, &model))
}

/// i dψ/dt with the exchange term replaced by a fixed transverse drive Ω/2.
pub fn drive_flatband_derivative(
    field: &SpinorField1D,
    ensemble: &MomentumEnsemble,
    omega: f64,
) -> Result<SpinorField1D> {
    check_len(field, ensemble)?;
    let model = Model1D::new(ensemble, Coupling::Drive { omega }, 0.0)?;
    Ok(hamiltonian_action(field, &model))
}

/// Integration settings. Times are in natural units.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    pub t_final: f64,
    pub dt: f64,
    /// Spacing of recorded samples; zero records only the endpoints.
    pub sample_interval: f64,
    /// Rotating-frame rate Δ.
    pub frame_rate: f64,
    /// Azimuth of a spin-echo π pulse applied at t_final/2.
    pub echo_axis: Option<f64>,
}

impl EvolveOptions {
    pub fn new(t_final: f64, dt: f64) -> Self {
        Self {
            t_final,
            dt,
            sample_interval: 0.0,
            frame_rate: 0.0,
            echo_axis: None,
        }
    }

    pub fn sample_every(mut self, interval: f64) -> Self {
        self.sample_interval = interval;
        self
    }

    pub fn with_frame_rate(mut self, rate: f64) -> Self {
        self.frame_rate = rate;
        self
    }

    pub fn with_echo(mut self, axis_phase: f64) -> Self {
        self.echo_axis = Some(axis_phase);
        self
    }
}

/// Step schedule shared by the 1D and higher-dimensional drivers.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Schedule {
    pub steps: usize,
    pub dt: f64,
    pub stride: usize,
    pub echo_step: Option<usize>,
}

impl Schedule {
    pub fn new(t_final: f64, dt: f64, sample_interval: f64, echo: bool) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(crate::error::invalid("dt", format!("must be > 0, got {dt}")));
        }
        if !(t_final.is_finite() && t_final >= 0.0) {
            return Err(crate::error::invalid("t_final", format!("must be >= 0, got {t_final}")));
        }
        let mut steps = (t_final / dt).round() as usize;
        if t_final > 0.0 {
            steps = steps.max(1);
        }
        if echo && steps % 2 == 1 {
            steps += 1;
        }
        let dt = if steps == 0 { dt } else { t_final / steps as f64 };
        let stride = if sample_interval > 0.0 {
            ((sample_interval / dt).round() as usize).max(1)
        } else {
            usize::MAX
        };
        Ok(Self {
            steps,
            dt,
            stride,
            echo_step: echo.then_some(steps / 2),
        })
    }

    pub fn record(&self, step: usize) -> bool {
        step == self.steps || step.is_multiple_of(self.stride)
    }
}

pub(crate) fn ensure_finite(y: &[C64], time: f64) -> Result<()> {
    if let Some(i) = y.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NumericalAbort {
            time,
            detail: format!("non-finite amplitude at component {i}"),
        });
    }
    Ok(())
}

/// Recorded states of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory1D {
    pub samples: Vec<SpinorField1D>,
}

impl Trajectory1D {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.time)
    }

    pub fn last(&self) -> &SpinorField1D {
        self.samples.last().expect("trajectory always holds the initial state")
    }
}

/// Integrates the mean-field equations with fixed-step RK4.
pub fn evolve(
    field: &SpinorField1D,
    ensemble: &MomentumEnsemble,
    coupling: Coupling,
    opts: &EvolveOptions,
) -> Result<Trajectory1D> {
    check_len(field, ensemble)?;
    let model = Model1D::new(ensemble, coupling, opts.frame_rate)?;
    evolve_model(field, &model, opts)
}

/// [`evolve`] for a prebuilt model.
pub fn evolve_model(field: &SpinorField1D, model: &Model1D, opts: &EvolveOptions) -> Result<Trajectory1D> {
    if field.len() != model.len() {
        return Err(Error::LengthMismatch {
            what: "spinor field",
            got: field.len(),
            expected: model.len(),
        });
    }
    let schedule = Schedule::new(opts.t_final, opts.dt, opts.sample_interval, opts.echo_axis.is_some())?;
    check_step(schedule.dt, model.max_frequency())?;

    let n = model.len();
    let t0 = field.time;
    let mut y = field.to_flat();
    ensure_finite(&y, t0)?;
    let mut rk = Rk4::new(y.len());
    let mut samples = vec![field.clone()];
    for step in 1..=schedule.steps {
        rk.step(&mut y, schedule.dt, |y, dy| model.rhs(y, dy));
        let t = t0 + step as f64 * schedule.dt;
        if Some(step) == schedule.echo_step {
            let (down, up) = y.split_at_mut(n);
            pi_pulse_pair(down, up, opts.echo_axis.unwrap_or(0.0));
        }
        if schedule.record(step) {
            ensure_finite(&y, t)?;
            samples.push(SpinorField1D::from_flat(&y, t));
        }
    }
    Ok(Trajectory1D { samples })
}
