//! Two-arm detection: a reference arm under a fixed flat-band drive and a
//! probe arm under the exchange interaction, recombined by a closing pulse.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics1d::{evolve_model, frame_rate, Coupling, EvolveOptions, Model1D, SpinorField1D};
use crate::ensemble::build_ensemble;
use crate::error::{invalid, Result};
use crate::params::SimulationParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionSetup {
    /// Exchange strength χN of the probe arm.
    #[serde(rename = "chiN_arm")]
    pub chi_n_arm: f64,
    /// Drive strength Ω of the reference arm.
    #[serde(rename = "Omega_arm")]
    pub omega_arm: f64,
    /// Insert a π pulse in both arms halfway to each readout time.
    pub echo: bool,
    /// Spacing of readout times (natural units).
    pub sample_interval: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContrastSample {
    pub t: f64,
    /// |O(t)|
    pub contrast: f64,
    /// (1 + Re Õ)/2 after the closing pulse.
    pub population: f64,
    pub overlap_re: f64,
    pub overlap_im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastSeries {
    pub setup: DetectionSetup,
    pub samples: Vec<ContrastSample>,
}

impl ContrastSeries {
    pub fn final_contrast(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.contrast)
    }

    pub fn min_contrast(&self) -> f64 {
        self.samples.iter().map(|s| s.contrast).fold(f64::INFINITY, f64::min)
    }
}

fn compare(a: &SpinorField1D, b: &SpinorField1D, weights: &[f64], origin: usize) -> ContrastSample {
    let overlap: C64 = weights
        .iter()
        .enumerate()
        .map(|(n, w)| (a.psi_down[n].conj() * b.psi_down[n] + a.psi_up[n].conj() * b.psi_up[n]) * *w)
        .sum();
    let reference = (a.psi_down[origin].conj() * b.psi_down[origin]).arg();
    let referenced = overlap * C64::from_polar(1.0, -reference);
    ContrastSample {
        t: a.time,
        contrast: overlap.norm().min(1.0),
        population: 0.5 * (1.0 + referenced.re),
        overlap_re: referenced.re,
        overlap_im: referenced.im,
    }
}

/// Contrast and closing-pulse signal at readout times 0, Δt, 2Δt, … up to
/// `params.t_final`. Both arms start from the polar state at `params.theta`.
pub fn interferometer_sequence(params: &SimulationParams, setup: DetectionSetup) -> Result<ContrastSeries> {
    if !(setup.sample_interval > 0.0) {
        return Err(invalid("sample_interval", "must be > 0"));
    }
    let ensemble = build_ensemble(params)?;
    if ensemble.dimension() != 1 {
        return Err(invalid("dimension", "the detection sequence runs in 1D"));
    }
    let origin = ensemble.origin_index();
    let weights = ensemble.weights();
    let field = SpinorField1D::polar(ensemble.len(), params.theta, 0.0);
    let reference = Model1D::new(&ensemble, Coupling::Drive { omega: setup.omega_arm }, 0.0)?;
    let probe = Model1D::new(
        &ensemble,
        Coupling::Exchange { chi_n: setup.chi_n_arm },
        frame_rate(setup.chi_n_arm, params.theta),
    )?;
    let t_final = params.t_final_natural();
    let dt = params.dt_natural();

    let samples = if setup.echo {
        let count = (t_final / setup.sample_interval).round() as usize;
        (0..=count)
            .into_par_iter()
            .map(|k| {
                let t = (k as f64 * setup.sample_interval).min(t_final);
                let opts = EvolveOptions::new(t, dt).with_echo(0.0);
                let a = evolve_model(&field, &reference, &opts)?;
                let b = evolve_model(&field, &probe, &opts)?;
                Ok(compare(a.last(), b.last(), weights, origin))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let opts = EvolveOptions::new(t_final, dt).sample_every(setup.sample_interval);
        let (a, b) = rayon::join(
            || evolve_model(&field, &reference, &opts),
            || evolve_model(&field, &probe, &opts),
        );
        let (a, b) = (a?, b?);
        a.samples
            .iter()
            .zip(&b.samples)
            .map(|(x, y)| compare(x, y, weights, origin))
            .collect()
    };
    Ok(ContrastSeries { setup, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units;

    fn params() -> SimulationParams {
        SimulationParams {
            n_momentum: 101,
            t_final: 5.0,
            dt: 2e-3,
            ..SimulationParams::default()
        }
    }

    #[test]
    fn starts_at_unit_contrast_and_stays_bounded() {
        for echo in [false, true] {
            let setup = DetectionSetup {
                chi_n_arm: 0.0,
                omega_arm: units::chi_opt_n(std::f64::consts::FRAC_PI_2),
                echo,
                sample_interval: units::tau(),
            };
            let s = interferometer_sequence(&params(), setup).unwrap();
            assert_eq!(s.samples.len(), 6);
            assert!((s.samples[0].contrast - 1.0).abs() < 1e-12);
            assert!((s.samples[0].population - 1.0).abs() < 1e-12);
            for c in &s.samples {
                assert!((0.0..=1.0).contains(&c.contrast));
                assert!((0.0..=1.0 + 1e-12).contains(&c.population));
            }
        }
    }

    #[test]
    fn matched_arms_keep_contrast() {
        let chi = units::chi_opt_n(std::f64::consts::FRAC_PI_2);
        let setup = DetectionSetup {
            chi_n_arm: chi,
            omega_arm: chi,
            echo: false,
            sample_interval: units::tau(),
        };
        let s = interferometer_sequence(&params(), setup).unwrap();
        assert!(s.min_contrast() > 0.99);
    }
}
