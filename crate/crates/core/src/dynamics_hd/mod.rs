//! Two- and three-dimensional dynamics in the dressed recoil basis.
//!
//! An atom at momentum p couples its internal ⇓ state at p to the 2^d recoil
//! states at p + (±ħk, ±ħk[, ±ħk]). Only the symmetric combination ⇑_sym
//! couples to the cavity exchange; the Doppler shifts mix ⇑_sym with the
//! singly antisymmetric combinations A_i at rate k p_i/M. Per point the
//! amplitudes are stored in the order
//!
//! ```text
//! [⇓, ⇑_sym, A_1, …, A_d, R]
//! ```
//!
//! where R stands in for the combinations that never couple (A_3 in 2D).

mod naive;

pub use naive::{naive_2d_dispersion, naive_2d_model, NaiveDispersion};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::dynamics1d::{ensure_finite, Schedule};
use crate::ensemble::MomentumEnsemble;
use crate::error::{invalid, Error, Result};
use crate::params::check_step;
use crate::rk4::Rk4;
use crate::units;

/// Number of dressed components per point for dimension `d`.
pub const fn components(dimension: usize) -> usize {
    dimension + 3
}

const DOWN: usize = 0;
const SYM: usize = 1;

/// Real symmetric single-point coupling matrix in the dressed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrixHD {
    pub dimension: usize,
    pub chi_n: f64,
    pub matrix: DMatrix<f64>,
}

impl CouplingMatrixHD {
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Closed-form ground eigenvalue −√((χN/2)² + Σ_i (k p_i/M)²).
    pub fn ground_closed_form(p: &[f64], chi_n: f64) -> f64 {
        let s: f64 = p.iter().map(|pi| (units::K * pi / units::MASS).powi(2)).sum();
        -(0.25 * chi_n * chi_n + s).sqrt()
    }
}

/// Builds the (d+3)×(d+3) matrix for momentum `p`.
pub fn build_coupling_matrix(p: &[f64], chi_n: f64, dimension: usize) -> Result<CouplingMatrixHD> {
    if !(2..=3).contains(&dimension) {
        return Err(invalid("dimension", format!("must be 2 or 3, got {dimension}")));
    }
    if p.len() != dimension {
        return Err(Error::LengthMismatch {
            what: "momentum vector",
            got: p.len(),
            expected: dimension,
        });
    }
    let n = components(dimension);
    let mut m = DMatrix::zeros(n, n);
    m[(DOWN, SYM)] = 0.5 * chi_n;
    m[(SYM, DOWN)] = 0.5 * chi_n;
    for (i, pi) in p.iter().enumerate() {
        let c = units::K * pi / units::MASS;
        m[(SYM, 2 + i)] = c;
        m[(2 + i, SYM)] = c;
    }
    Ok(CouplingMatrixHD {
        dimension,
        chi_n,
        matrix: m,
    })
}

/// Bare-to-dressed transform for the four 2D recoil states.
///
/// Bare order is (μ_x, μ_z) = ++, +−, −+, −−; dressed order is
/// (⇑_sym, A_1, A_2, A_3). The matrix is symmetric and orthogonal, so the
/// same call maps dressed amplitudes back.
pub fn dressed_basis_transform(bare: [C64; 4]) -> [C64; 4] {
    let [a, b, c, d] = bare;
    [
        (a + b + c + d) * 0.5,
        (a + b - c - d) * 0.5,
        (a - b + c - d) * 0.5,
        (a - b - c + d) * 0.5,
    ]
}

/// Bare-to-dressed transform for the eight 3D recoil states.
///
/// Bare index bits (x, y, z) = (bit 2, bit 1, bit 0), a set bit meaning μ = −1.
/// Dressed index bits mark which axes are antisymmetric: 0 is ⇑_sym, 4/2/1 are
/// the single-axis states A_x/A_y/A_z, the rest never couple.
pub fn dressed_basis_transform_3d(bare: [C64; 8]) -> [C64; 8] {
    let norm = 1.0 / 8f64.sqrt();
    std::array::from_fn(|row| {
        bare.iter()
            .enumerate()
            .map(|(col, v)| if (row & col).count_ones() % 2 == 0 { *v } else { -*v })
            .sum::<C64>()
            * norm
    })
}

/// Per-point amplitude vectors in the dressed basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpinorFieldHD {
    pub dimension: usize,
    /// Point-major amplitudes, `components(dimension)` per point.
    pub amplitudes: Vec<C64>,
    pub time: f64,
}

impl SpinorFieldHD {
    /// (|⇓⟩ + |⇑_sym⟩)/√2 at every point, as prepared by a Raman π/2 pulse.
    pub fn raman_superposition(dimension: usize, len: usize) -> Self {
        let n = components(dimension);
        let mut amplitudes = vec![C64::default(); n * len];
        let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        for point in amplitudes.chunks_exact_mut(n) {
            point[DOWN] = a;
            point[SYM] = a;
        }
        Self {
            dimension,
            amplitudes,
            time: 0.0,
        }
    }

    pub fn components(&self) -> usize {
        components(self.dimension)
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len() / self.components()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn point(&self, n: usize) -> &[C64] {
        let c = self.components();
        &self.amplitudes[n * c..(n + 1) * c]
    }

    /// Amplitudes of dressed component `c` across the ensemble.
    pub fn component(&self, c: usize) -> Vec<C64> {
        self.amplitudes
            .iter()
            .skip(c)
            .step_by(self.components())
            .copied()
            .collect()
    }

    pub fn down(&self) -> Vec<C64> {
        self.component(DOWN)
    }

    pub fn norms(&self) -> impl Iterator<Item = f64> + '_ {
        self.amplitudes
            .chunks_exact(self.components())
            .map(|p| p.iter().map(C64::norm_sqr).sum())
    }

    /// Weighted (P⇑ − P⇓)/2, with P⇑ summed over every recoil component.
    pub fn magnetization(&self, weights: &[f64]) -> f64 {
        self.amplitudes
            .chunks_exact(self.components())
            .zip(weights)
            .map(|(p, w)| {
                let up: f64 = p[SYM..].iter().map(C64::norm_sqr).sum();
                0.5 * w * (up - p[DOWN].norm_sqr())
            })
            .sum()
    }

    /// Σ_n w_n ψ_sym* ψ⇓.
    pub fn coherence(&self, weights: &[f64]) -> C64 {
        coherence(&self.amplitudes, self.components(), weights)
    }

    /// Bare recoil amplitudes of point `n` (2D: 4 entries, 3D: 8 entries).
    ///
    /// In 3D the inert remainder is assigned to the doubly antisymmetric
    /// xy combination.
    pub fn bare_up(&self, n: usize) -> Vec<C64> {
        let p = self.point(n);
        match self.dimension {
            2 => dressed_basis_transform([p[1], p[2], p[3], p[4]]).to_vec(),
            3 => {
                let mut dressed = [C64::default(); 8];
                dressed[0] = p[1];
                dressed[4] = p[2];
                dressed[2] = p[3];
                dressed[1] = p[4];
                dressed[6] = p[5];
                dressed_basis_transform_3d(dressed).to_vec()
            }
            _ => unreachable!("dimension validated on construction"),
        }
    }
}

fn coherence(y: &[C64], ncomp: usize, weights: &[f64]) -> C64 {
    y.chunks_exact(ncomp)
        .zip(weights)
        .map(|(p, w)| p[SYM].conj() * p[DOWN] * *w)
        .sum()
}

/// Precomputed per-point couplings for the dressed-basis dynamics.
#[derive(Debug, Clone)]
pub struct ModelHD {
    dimension: usize,
    kinetic: Vec<f64>,
    /// k p_i/M per point, `dimension` entries each.
    doppler: Vec<f64>,
    weights: Vec<f64>,
    chi_n: f64,
}

impl ModelHD {
    pub fn new(ensemble: &MomentumEnsemble, chi_n: f64) -> Result<Self> {
        let dimension = ensemble.dimension();
        if !(2..=3).contains(&dimension) {
            return Err(invalid("ensemble", "dressed-basis dynamics need a 2D or 3D ensemble"));
        }
        let kinetic = ensemble
            .points()
            .map(|p| units::kinetic(p.iter().map(|c| c * c).sum()))
            .collect();
        let doppler = ensemble
            .points()
            .flat_map(|p| p.iter().map(|c| units::K * c / units::MASS))
            .collect();
        Ok(Self {
            dimension,
            kinetic,
            doppler,
            weights: ensemble.weights().to_vec(),
            chi_n,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn max_frequency(&self) -> f64 {
        let half = 0.5 * self.chi_n;
        self.kinetic
            .iter()
            .zip(self.doppler.chunks_exact(self.dimension))
            .map(|(k, d)| k + (half * half + d.iter().map(|c| c * c).sum::<f64>()).sqrt())
            .fold(0.0, f64::max)
    }

    fn apply_hamiltonian(&self, y: &[C64], out: &mut [C64]) {
        let d = self.dimension;
        let nc = components(d);
        let field = coherence(y, nc, &self.weights) * self.chi_n;
        let field_conj = field.conj();
        for (n, (psi, h)) in y.chunks_exact(nc).zip(out.chunks_exact_mut(nc)).enumerate() {
            let kin = self.kinetic[n];
            let dop = &self.doppler[n * d..(n + 1) * d];
            for (hc, pc) in h.iter_mut().zip(psi) {
                *hc = pc * kin;
            }
            h[DOWN] += psi[SYM] * field;
            h[SYM] += psi[DOWN] * field_conj;
            for (i, c) in dop.iter().enumerate() {
                h[SYM] += psi[2 + i] * *c;
                h[2 + i] += psi[SYM] * *c;
            }
        }
    }

    fn rhs(&self, y: &[C64], dy: &mut [C64]) {
        self.apply_hamiltonian(y, dy);
        let minus_i = -C64::i();
        dy.iter_mut().for_each(|v| *v *= minus_i);
    }

    /// Mean-field energy functional.
    pub fn energy(&self, field: &SpinorFieldHD) -> f64 {
        let nc = components(self.dimension);
        let mut h = vec![C64::default(); field.amplitudes.len()];
        let no_exchange = Self {
            chi_n: 0.0,
            ..self.clone()
        };
        no_exchange.apply_hamiltonian(&field.amplitudes, &mut h);
        let single: f64 = field
            .amplitudes
            .chunks_exact(nc)
            .zip(h.chunks_exact(nc))
            .zip(&self.weights)
            .map(|((psi, hp), w)| w * psi.iter().zip(hp).map(|(a, b)| (a.conj() * b).re).sum::<f64>())
            .sum();
        single + self.chi_n * field.coherence(&self.weights).norm_sqr()
    }
}

/// Recorded states of a dressed-basis run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryHD {
    pub samples: Vec<SpinorFieldHD>,
}

impl TrajectoryHD {
    pub fn last(&self) -> &SpinorFieldHD {
        self.samples.last().expect("trajectory always holds the initial state")
    }
}

/// Integrates the dressed-basis mean-field equations with fixed-step RK4.
///
/// `sample_interval` of zero records only the endpoints.
pub fn evolve_hd(
    field: &SpinorFieldHD,
    ensemble: &MomentumEnsemble,
    chi_n: f64,
    t_final: f64,
    dt: f64,
    sample_interval: f64,
) -> Result<TrajectoryHD> {
    if field.dimension != ensemble.dimension() || field.len() != ensemble.len() {
        return Err(Error::LengthMismatch {
            what: "dressed spinor field",
            got: field.len(),
            expected: ensemble.len(),
        });
    }
    let model = ModelHD::new(ensemble, chi_n)?;
    let schedule = Schedule::new(t_final, dt, sample_interval, false)?;
    check_step(schedule.dt, model.max_frequency())?;

    let t0 = field.time;
    let mut y = field.amplitudes.clone();
    ensure_finite(&y, t0)?;
    let mut rk = Rk4::new(y.len());
    let mut samples = vec![field.clone()];
    for step in 1..=schedule.steps {
        rk.step(&mut y, schedule.dt, |y, dy| model.rhs(y, dy));
        if schedule.record(step) {
            let t = t0 + step as f64 * schedule.dt;
            ensure_finite(&y, t)?;
            samples.push(SpinorFieldHD {
                dimension: field.dimension,
                amplitudes: y.clone(),
                time: t,
            });
        }
    }
    Ok(TrajectoryHD { samples })
}
