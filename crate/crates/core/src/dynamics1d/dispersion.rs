use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::units;

/// Dressed-branch energies and derived effective-mass quantities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionCurve {
    pub chi_n: f64,
    pub theta: f64,
    pub p_values: Vec<f64>,
    pub energies: Vec<f64>,
    /// Analytic d²E/dp² at each momentum.
    pub curvature: Vec<f64>,
    /// M/(1 + 4E_R sin²θ/χN); infinite at the flat-band coupling.
    pub effective_mass: f64,
    /// √(N|χ|/2M*).
    pub c_s: f64,
    /// Degree-4 least-squares coefficients c₀..c₄ of E(p) over `p_values`.
    pub fit_coefficients: Vec<f64>,
    /// 1/(2c₂) from the fit.
    pub fitted_effective_mass: f64,
}

/// Sign of the branch occupied by the Bragg-prepared state: the lower branch
/// for χN ≤ 0, the upper one for χN > 0.
fn branch_sign(chi_n: f64) -> f64 {
    if chi_n > 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn field_components(p: f64, chi_n: f64, theta: f64) -> (f64, f64) {
    let transverse = chi_n * theta.sin();
    let longitudinal = units::doppler(p) - super::frame_rate(chi_n, theta);
    (transverse, longitudinal)
}

/// E_p = ±½√((χN sinθ)² + (2kp/M − χN cosθ)²) + p²/2Mħ.
pub fn branch_energy(p: f64, chi_n: f64, theta: f64) -> f64 {
    let (a, b) = field_components(p, chi_n, theta);
    branch_sign(chi_n) * 0.5 * a.hypot(b) + units::kinetic(p * p)
}

/// Analytic second derivative of [`branch_energy`].
pub fn branch_curvature(p: f64, chi_n: f64, theta: f64) -> f64 {
    let (a, b) = field_components(p, chi_n, theta);
    let r = a.hypot(b);
    let k = 2.0 * units::K / units::MASS;
    let field_term = if r > 0.0 {
        0.5 * k * k * a * a / (r * r * r)
    } else {
        0.0
    };
    branch_sign(chi_n) * field_term + 1.0 / (units::MASS * units::HBAR)
}

/// M* = M/(1 + 4E_R sin²θ/χN).
pub fn effective_mass(chi_n: f64, theta: f64) -> f64 {
    let s = theta.sin();
    let denom = 1.0 + 4.0 * units::RECOIL_ENERGY * s * s / chi_n;
    if denom == 0.0 || denom.abs() < 1e-14 {
        f64::INFINITY
    } else {
        units::MASS / denom
    }
}

/// Effective speed of light c_s = √(|χN|/(2M*)).
pub fn sound_speed(chi_n: f64, effective_mass: f64) -> f64 {
    (chi_n.abs() / (2.0 * effective_mass)).sqrt()
}

/// Least-squares polynomial coefficients c₀..c_degree.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Vec<f64> {
    assert_eq!(x.len(), y.len());
    assert!(x.len() > degree, "need more samples than coefficients");
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let a = DMatrix::from_fn(x.len(), degree + 1, |i, j| (x[i] / scale).powi(j as i32));
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let c = svd.solve(&b, 1e-14).expect("SVD computed with U and V");
    c.iter().enumerate().map(|(j, v)| v / scale.powi(j as i32)).collect()
}

/// Evaluates the relevant branch on `p_values` and fits its low-order expansion.
pub fn dispersion(p_values: &[f64], chi_n: f64, theta: f64) -> DispersionCurve {
    let energies: Vec<f64> = p_values.iter().map(|&p| branch_energy(p, chi_n, theta)).collect();
    let curvature = p_values.iter().map(|&p| branch_curvature(p, chi_n, theta)).collect();
    let fit_coefficients = if p_values.len() > 4 {
        polyfit(p_values, &energies, 4)
    } else {
        Vec::new()
    };
    let fitted_effective_mass =
        fit_coefficients
            .get(2)
            .map_or(f64::NAN, |c2| if *c2 == 0.0 { f64::INFINITY } else { 1.0 / (2.0 * c2) });
    let m_star = effective_mass(chi_n, theta);
    DispersionCurve {
        chi_n,
        theta,
        p_values: p_values.to_vec(),
        energies,
        curvature,
        effective_mass: m_star,
        c_s: sound_speed(chi_n, m_star),
        fit_coefficients,
        fitted_effective_mass,
    }
}
