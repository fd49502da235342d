use num_complex::Complex64 as C64;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::units;

/// Locked-regime amplitudes (ψ⇓, ψ⇑) at time `t` for an equal superposition
/// evolving under the static transverse field χN/2.
pub fn closed_form_solution(p: f64, chi_n: f64, t: f64) -> (C64, C64) {
    let doppler = units::doppler(p);
    let rate = (doppler * doppler + chi_n * chi_n).sqrt();
    let half = 0.5 * rate * t;
    // sin(Ωt/2)/Ω, continuous at Ω = 0.
    let sinc = if rate > 0.0 { half.sin() / rate } else { 0.5 * t };
    let global = C64::from_polar(FRAC_1_SQRT_2, -units::kinetic(p * p) * t);
    let down = C64::new(half.cos(), (doppler - chi_n) * sinc);
    let up = C64::new(half.cos(), -(doppler + chi_n) * sinc);
    (global * down, global * up)
}
