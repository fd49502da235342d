//! Levenberg–Marquardt Gaussian fits without an offset term.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::Serialize;

pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub amplitude: f64,
    pub center: f64,
    /// rms width
    pub sigma: f64,
    /// ‖ρ − model‖ / ‖ρ‖
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Two-dimensional fit A·exp(−½ (r−r₀)ᵀ Σ⁻¹ (r−r₀)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit2D {
    pub amplitude: f64,
    pub center: [f64; 2],
    pub covariance: [[f64; 2]; 2],
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl Fit2D {
    /// rms widths along the grid axes (x, z).
    pub fn axis_sigmas(&self) -> [f64; 2] {
        [self.covariance[0][0].sqrt(), self.covariance[1][1].sqrt()]
    }

    /// rms widths along the principal axes, ascending.
    pub fn principal_sigmas(&self) -> [f64; 2] {
        let c = self.covariance;
        let ev = Matrix2::new(c[0][0], c[0][1], c[1][0], c[1][1]).symmetric_eigenvalues();
        let (a, b) = (ev[0].max(0.0).sqrt(), ev[1].max(0.0).sqrt());
        [a.min(b), a.max(b)]
    }
}

struct LmOutcome {
    params: Vec<f64>,
    residual: f64,
    converged: bool,
    iterations: usize,
}

/// Generic LM loop. `model` fills residuals r = data − f and the Jacobian of f.
/// `scale` gives the size against which each parameter update is judged.
fn levenberg_marquardt(
    init: Vec<f64>,
    data_norm: f64,
    mut model: impl FnMut(&[f64], &mut DVector<f64>, Option<&mut DMatrix<f64>>) -> bool,
    scale: impl Fn(&[f64]) -> Vec<f64>,
    m: usize,
) -> LmOutcome {
    let k = init.len();
    let mut params = init;
    let mut r = DVector::zeros(m);
    let mut jac = DMatrix::zeros(m, k);
    if !model(&params, &mut r, Some(&mut jac)) {
        return LmOutcome {
            residual: f64::INFINITY,
            params,
            converged: false,
            iterations: 0,
        };
    }
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut trial_r = DVector::zeros(m);
    for iter in 1..=MAX_ITERATIONS {
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..k {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params.iter().zip(delta.iter()).map(|(p, d)| p + d).collect();
            if model(&trial, &mut trial_r, None) && trial_r.norm_squared() <= cost {
                let s = scale(&params);
                let rel = delta.iter().zip(&s).map(|(d, s)| d.abs() / s).fold(0.0, f64::max);
                params = trial;
                cost = trial_r.norm_squared();
                lambda = (lambda / 10.0).max(1e-12);
                model(&params, &mut r, Some(&mut jac));
                accepted = true;
                if rel < TOLERANCE {
                    return LmOutcome {
                        params,
                        residual: cost.sqrt() / data_norm,
                        converged: true,
                        iterations: iter,
                    };
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step left: a minimum, exact or otherwise.
            let residual = cost.sqrt() / data_norm;
            let gradient = jtr.norm() / (jtj.norm().sqrt() * data_norm).max(1e-300);
            return LmOutcome {
                params,
                residual,
                converged: gradient < 1e-6,
                iterations: iter,
            };
        }
    }
    LmOutcome {
        residual: cost.sqrt() / data_norm,
        params,
        converged: false,
        iterations: MAX_ITERATIONS,
    }
}

/// Weighted mean and standard deviation of a non-negative density.
pub fn moments(z: &[f64], rho: &[f64]) -> (f64, f64) {
    let mass: f64 = rho.iter().sum();
    let mean = z.iter().zip(rho).map(|(z, r)| z * r).sum::<f64>() / mass;
    let var = z.iter().zip(rho).map(|(z, r)| (z - mean).powi(2) * r).sum::<f64>() / mass;
    (mean, var.sqrt())
}

/// Fits A·exp(−(z−z₀)²/2σ²) to `rho` sampled at `z`, starting from moments.
///
/// On failure the moment estimates are returned with `converged = false`.
pub fn fit_gaussian(z: &[f64], rho: &[f64]) -> FitResult {
    assert_eq!(z.len(), rho.len(), "grid and density lengths differ");
    let data_norm = rho.iter().map(|v| v * v).sum::<f64>().sqrt();
    let peak = rho.iter().copied().fold(0.0, f64::max);
    let (mean, sd) = moments(z, rho);
    let fallback = FitResult {
        amplitude: peak,
        center: mean,
        sigma: sd,
        residual_norm: f64::NAN,
        converged: false,
        iterations: 0,
    };
    if !(data_norm > 0.0 && sd > 0.0) || rho.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return fallback;
    }
    let model = |p: &[f64], r: &mut DVector<f64>, jac: Option<&mut DMatrix<f64>>| {
        let (a, z0, s) = (p[0], p[1], p[2]);
        if !(s > 0.0) {
            return false;
        }
        let inv = 1.0 / (s * s);
        let mut jac = jac;
        for (i, (zi, ri)) in z.iter().zip(rho).enumerate() {
            let dz = zi - z0;
            let e = (-0.5 * dz * dz * inv).exp();
            r[i] = ri - a * e;
            if let Some(j) = jac.as_deref_mut() {
                j[(i, 0)] = e;
                j[(i, 1)] = a * e * dz * inv;
                j[(i, 2)] = a * e * dz * dz * inv / s;
            }
        }
        true
    };
    let out = levenberg_marquardt(
        vec![peak, mean, sd],
        data_norm,
        model,
        |p| vec![p[0].abs().max(1e-300), p[2].abs(), p[2].abs()],
        z.len(),
    );
    if !out.converged || !(out.params[2] > 0.0) {
        return FitResult {
            residual_norm: out.residual,
            iterations: out.iterations,
            ..fallback
        };
    }
    FitResult {
        amplitude: out.params[0],
        center: out.params[1],
        sigma: out.params[2],
        residual_norm: out.residual,
        converged: true,
        iterations: out.iterations,
    }
}

/// Full-covariance fit of a density on the tensor grid `axis × axis`
/// (x index slow, z index fast).
pub fn fit_gaussian_2d(axis: &[f64], rho: &[f64]) -> Fit2D {
    let n = axis.len();
    assert_eq!(rho.len(), n * n, "density is not on the square grid");
    let mass: f64 = rho.iter().sum();
    let coord = |i: usize| (axis[i / n], axis[i % n]);
    let (mut mx, mut mz) = (0.0, 0.0);
    for (i, r) in rho.iter().enumerate() {
        let (x, z) = coord(i);
        mx += x * r;
        mz += z * r;
    }
    mx /= mass;
    mz /= mass;
    let (mut cxx, mut cxz, mut czz) = (0.0, 0.0, 0.0);
    for (i, r) in rho.iter().enumerate() {
        let (x, z) = coord(i);
        cxx += (x - mx) * (x - mx) * r;
        cxz += (x - mx) * (z - mz) * r;
        czz += (z - mz) * (z - mz) * r;
    }
    let (cxx, cxz, czz) = (cxx / mass, cxz / mass, czz / mass);
    let peak = rho.iter().copied().fold(0.0, f64::max);
    let data_norm = rho.iter().map(|v| v * v).sum::<f64>().sqrt();
    let fallback = Fit2D {
        amplitude: peak,
        center: [mx, mz],
        covariance: [[cxx, cxz], [cxz, czz]],
        residual_norm: f64::NAN,
        converged: false,
        iterations: 0,
    };
    let det = cxx * czz - cxz * cxz;
    if !(data_norm > 0.0 && det > 0.0) || rho.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return fallback;
    }
    // Precision matrix entries (a, b, c).
    let init = vec![peak, mx, mz, czz / det, -cxz / det, cxx / det];
    let model = |p: &[f64], r: &mut DVector<f64>, jac: Option<&mut DMatrix<f64>>| {
        let (amp, x0, z0, a, b, c) = (p[0], p[1], p[2], p[3], p[4], p[5]);
        if !(a > 0.0 && c > 0.0 && a * c > b * b) {
            return false;
        }
        let mut jac = jac;
        for (i, ri) in rho.iter().enumerate() {
            let (x, z) = coord(i);
            let (dx, dz) = (x - x0, z - z0);
            let e = (-0.5 * (a * dx * dx + 2.0 * b * dx * dz + c * dz * dz)).exp();
            r[i] = ri - amp * e;
            if let Some(j) = jac.as_deref_mut() {
                let ae = amp * e;
                j[(i, 0)] = e;
                j[(i, 1)] = ae * (a * dx + b * dz);
                j[(i, 2)] = ae * (b * dx + c * dz);
                j[(i, 3)] = -0.5 * ae * dx * dx;
                j[(i, 4)] = -ae * dx * dz;
                j[(i, 5)] = -0.5 * ae * dz * dz;
            }
        }
        true
    };
    let out = levenberg_marquardt(
        init,
        data_norm,
        model,
        |p| {
            let width = (1.0 / p[3]).sqrt().max((1.0 / p[5]).sqrt());
            let curv = (p[3] * p[5]).sqrt();
            vec![p[0].abs().max(1e-300), width, width, curv, curv, curv]
        },
        rho.len(),
    );
    if !out.converged {
        return Fit2D {
            residual_norm: out.residual,
            iterations: out.iterations,
            ..fallback
        };
    }
    let p = &out.params;
    let det = p[3] * p[5] - p[4] * p[4];
    Fit2D {
        amplitude: p[0],
        center: [p[1], p[2]],
        covariance: [[p[5] / det, -p[4] / det], [-p[4] / det, p[3] / det]],
        residual_norm: out.residual,
        converged: true,
        iterations: out.iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(span: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| -0.5 * span + span * i as f64 / (n - 1) as f64).collect()
    }

    fn gauss(z: &[f64], a: f64, z0: f64, s: f64) -> Vec<f64> {
        z.iter()
            .map(|z| a * (-(z - z0).powi(2) / (2.0 * s * s)).exp())
            .collect()
    }

    #[test]
    fn exact_gaussian_recovered() {
        let z = grid(200.0, 1001);
        let rho = gauss(&z, 0.7, 3.2, 11.5);
        let f = fit_gaussian(&z, &rho);
        assert!(f.converged);
        assert!((f.amplitude - 0.7).abs() < 1e-9);
        assert!((f.center - 3.2).abs() < 1e-9);
        assert!((f.sigma - 11.5).abs() < 1e-9);
        assert!(f.residual_norm < 1e-9);
    }

    #[test]
    fn bimodal_is_flagged() {
        let z = grid(400.0, 2001);
        let a = gauss(&z, 1.0, -60.0, 10.0);
        let b = gauss(&z, 1.0, 60.0, 10.0);
        let rho: Vec<f64> = a.iter().zip(&b).map(|(a, b)| a + b).collect();
        let f = fit_gaussian(&z, &rho);
        assert!(
            !f.converged || f.residual_norm > 0.1 || (f.sigma - 60.0).abs() < 15.0,
            "{f:?}"
        );
        assert!(f.residual_norm > 0.1 || !f.converged);
    }

    #[test]
    fn non_finite_input_falls_back() {
        let z = grid(10.0, 11);
        let mut rho = gauss(&z, 1.0, 0.0, 1.0);
        rho[3] = f64::NAN;
        assert!(!fit_gaussian(&z, &rho).converged);
    }

    #[test]
    fn two_d_exact() {
        let axis = grid(100.0, 81);
        let (sx, sz, rho_c) = (8.0, 12.0, 0.4);
        let cov = [[sx * sx, rho_c * sx * sz], [rho_c * sx * sz, sz * sz]];
        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[0][1];
        let data: Vec<f64> = (0..81 * 81)
            .map(|i| {
                let (x, z) = (axis[i / 81] - 1.0, axis[i % 81] + 2.0);
                let q = (cov[1][1] * x * x - 2.0 * cov[0][1] * x * z + cov[0][0] * z * z) / det;
                0.3 * (-0.5 * q).exp()
            })
            .collect();
        let f = fit_gaussian_2d(&axis, &data);
        assert!(f.converged);
        assert!((f.center[0] - 1.0).abs() < 1e-8 && (f.center[1] + 2.0).abs() < 1e-8);
        let [a, b] = f.axis_sigmas();
        assert!((a - sx).abs() < 1e-8 && (b - sz).abs() < 1e-8);
        assert!((f.covariance[0][1] - cov[0][1]).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn perturbed_gaussian_width(s in 3.0f64..20.0, z0 in -10.0f64..10.0, phase in 0.0f64..6.0) {
            let z = grid(200.0, 801);
            let clean = gauss(&z, 1.0, z0, s);
            // 1% deterministic additive ripple.
            let rho: Vec<f64> = clean.iter().zip(&z)
                .map(|(r, z)| (r + 0.01 * (0.5 + 0.5 * (0.37 * z + phase).sin())).max(0.0))
                .collect();
            let f = fit_gaussian(&z, &rho);
            prop_assert!((f.sigma / s - 1.0).abs() < 0.02, "{:?}", f);
        }
    }
}
