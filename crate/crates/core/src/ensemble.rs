//! Momentum ensembles sampled from the selected Gaussian Wigner marginal.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::params::{EnsembleMode, SimulationParams};

/// Momentum points p_n with probability weights w_n.
///
/// Points are stored flat, `dimension` components per point. Grid ensembles
/// are tensor products with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentumEnsemble {
    dimension: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    mode: EnsembleMode,
    /// Per-axis nodes for grid ensembles.
    axis: Option<Vec<f64>>,
}

impl MomentumEnsemble {
    /// Builds an ensemble from explicit points and (unnormalized) weights.
    pub fn from_points(dimension: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dimension == 0 || points.len() != dimension * weights.len() {
            return Err(invalid("points", "point count does not match weights and dimension"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(invalid("weights", "weights must be finite, non-negative, not all zero"));
        }
        Ok(Self {
            dimension,
            points,
            weights: weights.iter().map(|w| w / total).collect(),
            mode: EnsembleMode::MonteCarlo,
            axis: None,
        })
    }

    /// Single point carrying all the weight.
    pub fn single(p: &[f64]) -> Self {
        Self {
            dimension: p.len(),
            points: p.to_vec(),
            weights: vec![1.0],
            mode: EnsembleMode::MonteCarlo,
            axis: None,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn mode(&self) -> EnsembleMode {
        self.mode
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, n: usize) -> &[f64] {
        &self.points[n * self.dimension..(n + 1) * self.dimension]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dimension)
    }

    /// Grid nodes along one axis, for grid ensembles.
    pub fn axis(&self) -> Option<&[f64]> {
        self.axis.as_deref()
    }

    /// Uniform node spacing of a grid ensemble.
    pub fn spacing(&self) -> Option<f64> {
        self.axis.as_ref().map(|a| a[1] - a[0])
    }

    /// Largest |p| over the ensemble.
    pub fn max_abs_momentum(&self) -> f64 {
        self.points()
            .map(|p| p.iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Index of the point closest to p = 0.
    pub fn origin_index(&self) -> usize {
        let mut best = (0, f64::INFINITY);
        for (n, p) in self.points().enumerate() {
            let r2: f64 = p.iter().map(|c| c * c).sum();
            if r2 < best.1 {
                best = (n, r2);
            }
        }
        best.0
    }

    /// Weighted rms of the first momentum component about zero.
    pub fn rms_momentum(&self) -> f64 {
        self.points()
            .zip(&self.weights)
            .map(|(p, w)| w * p[0] * p[0])
            .sum::<f64>()
            .sqrt()
    }
}

/// Builds the momentum ensemble described by `params`.
pub fn build_ensemble(params: &SimulationParams) -> Result<MomentumEnsemble> {
    if !(params.sigma_p.is_finite() && params.sigma_p > 0.0) {
        return Err(invalid("sigma_p", format!("must be > 0, got {}", params.sigma_p)));
    }
    if params.n_momentum < 3 || params.n_momentum.is_multiple_of(2) {
        return Err(invalid(
            "n_momentum",
            format!("must be odd and >= 3, got {}", params.n_momentum),
        ));
    }
    if !(1..=3).contains(&params.dimension) {
        return Err(invalid(
            "dimension",
            format!("must be 1, 2 or 3, got {}", params.dimension),
        ));
    }
    match params.mode {
        EnsembleMode::Grid => Ok(gaussian_grid(
            params.dimension,
            params.n_momentum,
            params.p_half_width(),
            params.sigma_p,
        )),
        EnsembleMode::MonteCarlo => Ok(gaussian_samples(
            params.dimension,
            params.n_momentum,
            params.sigma_p,
            params.seed,
        )),
    }
}

/// Tensor-product grid on [−half_width, half_width]^d with Gaussian weights.
pub fn gaussian_grid(dimension: usize, n_axis: usize, half_width: f64, sigma_p: f64) -> MomentumEnsemble {
    let half = (n_axis / 2) as f64;
    let axis: Vec<f64> = (0..n_axis).map(|i| half_width * (i as f64 - half) / half).collect();
    let total = n_axis.pow(dimension as u32);
    let mut points = Vec::with_capacity(total * dimension);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; dimension];
    for _ in 0..total {
        let mut r2 = 0.0;
        for &i in &idx {
            points.push(axis[i]);
            r2 += axis[i] * axis[i];
        }
        weights.push((-r2 / (2.0 * sigma_p * sigma_p)).exp());
        for d in (0..dimension).rev() {
            idx[d] += 1;
            if idx[d] < n_axis {
                break;
            }
            idx[d] = 0;
        }
    }
    let norm: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= norm);
    MomentumEnsemble {
        dimension,
        points,
        weights,
        mode: EnsembleMode::Grid,
        axis: Some(axis),
    }
}

/// `count` i.i.d. Gaussian momenta with equal weights.
pub fn gaussian_samples(dimension: usize, count: usize, sigma_p: f64, seed: u64) -> MomentumEnsemble {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma_p).expect("sigma_p validated positive");
    let points: Vec<f64> = (0..count * dimension).map(|_| normal.sample(&mut rng)).collect();
    MomentumEnsemble {
        dimension,
        points,
        weights: vec![1.0 / count as f64; count],
        mode: EnsembleMode::MonteCarlo,
        axis: None,
    }
}
