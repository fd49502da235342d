use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::{Path, PathBuf};

use cavity_soliton::dissipation::{evolve_bloch, fit_decay_rate, gamma_rates, BlochTrajectory, CollectiveBloch};
use cavity_soliton::dynamics1d::{dispersion, evolve, frame_rate, Coupling, EvolveOptions, SpinorField1D};
use cavity_soliton::dynamics_hd::{evolve_hd, SpinorFieldHD};
use cavity_soliton::ensemble::{build_ensemble, gaussian_grid};
use cavity_soliton::io::{self, fmt, Metadata};
use cavity_soliton::observables::{
    default_axis, fit_gaussian, interferometer_sequence, sweep_width_vs_chi, Branch, DetectionSetup, Synthesizer,
    WidthSeries2D,
};
use cavity_soliton::{units, UnitSystem};
use log::info;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CliError, Experiment, ExperimentSpec};

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

/// Bundle description written as `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub code_version: String,
    pub params_sha256: String,
    pub units: UnitSystem,
    pub unit_notes: Vec<String>,
    pub spec: ExperimentSpec,
    pub summary: Value,
    pub files: Vec<FileEntry>,
}

fn unit_notes() -> Vec<String> {
    vec![
        "natural units: hbar = M = k = 1; E_R = 1/2, recoil velocity = 1".into(),
        "tau = 2 pi / |chi_opt N| = pi; config times (dt, t_final, intervals) are in tau".into(),
        "exported times, positions and momenta are in natural units".into(),
    ]
}

struct Bundle {
    dir: PathBuf,
    meta: Metadata,
    files: Vec<String>,
}

impl Bundle {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }
}

fn io_err(context: String) -> impl FnOnce(std::io::Error) -> CliError {
    move |source| CliError::Io { context, source }
}

/// Runs one experiment and writes its bundle under `<output_dir>/<name>/`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Manifest, CliError> {
    let dir = spec.bundle_dir();
    fs::create_dir_all(&dir).map_err(io_err(format!("creating {}", dir.display())))?;
    // Where the bundle lands is not part of the run's identity.
    let mut hashed = spec.config.clone();
    hashed.output_dir = None;
    let meta = Metadata::for_params(&hashed)?;
    let mut bundle = Bundle {
        dir,
        meta,
        files: Vec::new(),
    };
    info!("running {} into {}", spec.name, bundle.dir.display());
    let summary = match spec.name {
        Experiment::Fig2 => fig2(spec, &mut bundle)?,
        Experiment::Fig3 => fig3(spec, &mut bundle)?,
        Experiment::Fig4 => fig4(spec, &mut bundle)?,
        Experiment::Detect => detect(spec, &mut bundle)?,
        Experiment::Dissipation => dissipation(spec, &mut bundle)?,
        Experiment::Dispersion => dispersion_tables(spec, &mut bundle)?,
    };
    let files = bundle
        .files
        .iter()
        .map(|f| {
            Ok(FileEntry {
                path: f.clone(),
                sha256: io::sha256_file(&bundle.dir.join(f))?,
            })
        })
        .collect::<Result<Vec<_>, cavity_soliton::Error>>()?;
    let manifest = Manifest {
        experiment: spec.name.name().to_string(),
        code_version: bundle.meta.code_version.clone(),
        params_sha256: bundle.meta.params_sha256.clone(),
        units: UnitSystem::default(),
        unit_notes: unit_notes(),
        spec: spec.clone(),
        summary,
        files,
    };
    let path = bundle.dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(cavity_soliton::Error::from)?;
    fs::write(&path, text + "\n").map_err(io_err(format!("writing {}", path.display())))?;
    Ok(manifest)
}

fn label_chi(chi_n: f64) -> String {
    format!("{chi_n:+.3}")
        .replace('+', "p")
        .replace('-', "m")
        .replace('.', "_")
}

fn fig2(spec: &ExperimentSpec, b: &mut Bundle) -> Result<Value, CliError> {
    let p = &spec.params;
    let o = &spec.config.fig2;
    let ensemble = build_ensemble(p)?;
    let tau = units::tau();
    let t_final = p.t_final_natural();
    let chi_opt = units::chi_opt_n(p.theta);
    let cases = [("free", 0.0), ("soliton", chi_opt), ("antisoliton", -chi_opt)];
    let field = SpinorField1D::polar(ensemble.len(), p.theta, 0.0);
    let fit_axis = default_axis(p.sigma_p, t_final, true, o.fit_points);
    let map_axis = default_axis(p.sigma_p, t_final, true, o.heatmap_points);
    let fit_synth = Synthesizer::new(&ensemble, &fit_axis)?;
    let map_synth = Synthesizer::new(&ensemble, &map_axis)?;

    let mut summary = serde_json::Map::new();
    for (label, chi_n) in cases {
        info!("fig2: {label} (chiN = {chi_n})");
        let opts = EvolveOptions::new(t_final, p.dt_natural())
            .sample_every(o.sample_interval * tau)
            .with_frame_rate(frame_rate(chi_n, p.theta));
        let traj = evolve(&field, &ensemble, Coupling::Exchange { chi_n }, &opts)?;

        let maps = traj
            .samples
            .par_iter()
            .map(|s| {
                Ok((
                    map_synth.branch_1d(s, Branch::Down)?,
                    map_synth.branch_1d(s, Branch::Up)?,
                ))
            })
            .collect::<Result<Vec<_>, cavity_soliton::Error>>()?;
        let rows = maps.iter().flat_map(|(d, u)| {
            map_axis
                .iter()
                .enumerate()
                .map(move |(i, z)| vec![fmt(d.time), fmt(*z), fmt(d.density[i]), fmt(u.density[i])])
        });
        io::write_csv(
            &b.path(&format!("density_{label}.csv")),
            &b.meta,
            &["t", "z", "rho_down", "rho_up"],
            rows,
        )?;

        let fits = traj
            .samples
            .par_iter()
            .map(|s| {
                let d = fit_synth.branch_1d(s, Branch::Down)?;
                let u = fit_synth.branch_1d(s, Branch::Up)?;
                Ok((fit_gaussian(&fit_axis, &d.density), fit_gaussian(&fit_axis, &u.density)))
            })
            .collect::<Result<Vec<_>, cavity_soliton::Error>>()?;
        let (s0d, s0u) = (fits[0].0.sigma, fits[0].1.sigma);
        let rows = traj.samples.iter().zip(&fits).map(|(s, (d, u))| {
            vec![
                fmt(s.time),
                fmt(d.sigma),
                fmt(u.sigma),
                fmt(d.sigma / s0d),
                fmt(u.sigma / s0u),
                fmt(d.residual_norm),
                fmt(u.residual_norm),
                d.converged.to_string(),
                u.converged.to_string(),
            ]
        });
        io::write_csv(
            &b.path(&format!("widths_{label}.csv")),
            &b.meta,
            &[
                "t",
                "sigma_down",
                "sigma_up",
                "ratio_down",
                "ratio_up",
                "residual_down",
                "residual_up",
                "converged_down",
                "converged_up",
            ],
            rows,
        )?;
        let max_ratio = fits
            .iter()
            .map(|(d, u)| (d.sigma / s0d).max(u.sigma / s0u))
            .fold(0.0, f64::max);
        let (d, u) = fits.last().expect("initial sample always present");
        summary.insert(
            label.to_string(),
            json!({
                "chiN": chi_n,
                "max_width_ratio": max_ratio,
                "final_ratio_down": d.sigma / s0d,
                "final_ratio_up": u.sigma / s0u,
            }),
        );
    }
    Ok(Value::Object(summary))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn fig3(spec: &ExperimentSpec, b: &mut Bundle) -> Result<Value, CliError> {
    let o = &spec.config.fig3;
    let chi_grid = linspace(o.chi_min, o.chi_max, o.chi_points);
    let t_d = spec.params.t_final_natural();
    let mut sweeps = Vec::new();
    for &theta in &o.thetas {
        info!("fig3: theta = {theta:.4}");
        sweeps.push(sweep_width_vs_chi(theta, &chi_grid, Some(t_d), &spec.params)?);
    }
    let rows = sweeps.iter().flat_map(|s| {
        s.points.iter().map(move |pt| {
            vec![
                fmt(s.theta),
                fmt(pt.chi_n),
                fmt(pt.ratio),
                fmt(pt.ratio_down),
                fmt(pt.ratio_up),
                pt.converged.to_string(),
            ]
        })
    });
    io::write_csv(
        &b.path("width_grid.csv"),
        &b.meta,
        &["theta", "chiN", "ratio", "ratio_down", "ratio_up", "converged"],
        rows,
    )?;
    let rows = sweeps.iter().map(|s| {
        vec![
            fmt(s.theta),
            fmt(s.argmin_chi_n),
            fmt(s.chi_opt_n),
            s.locked_valid.to_string(),
        ]
    });
    io::write_csv(
        &b.path("optimal_curve.csv"),
        &b.meta,
        &["theta", "argmin_chiN", "chi_opt_N", "locked_valid"],
        rows,
    )?;
    let step = chi_grid[1] - chi_grid[0];
    let argmins: Vec<Value> = sweeps
        .iter()
        .map(|s| json!({"theta": s.theta, "argmin_chiN": s.argmin_chi_n, "chi_opt_N": s.chi_opt_n, "locked_valid": s.locked_valid}))
        .collect();
    let at_half_pi = sweeps
        .iter()
        .find(|s| (s.theta - FRAC_PI_2).abs() < 1e-9)
        .map(|s| s.argmin_chi_n);
    Ok(json!({
        "t_d": t_d,
        "chi_step": step,
        "argmin": argmins,
        "argmin_chiN_theta_pi_2": at_half_pi,
    }))
}

fn fig4(spec: &ExperimentSpec, b: &mut Bundle) -> Result<Value, CliError> {
    let p = &spec.params;
    let o = &spec.config.fig4;
    let tau = units::tau();
    let t_final = o.t_final * tau;
    let ensemble = gaussian_grid(2, o.n_axis, p.p_half_width(), p.sigma_p);
    let axis = default_axis(p.sigma_p, t_final, false, o.grid_points);
    let field = SpinorFieldHD::raman_superposition(2, ensemble.len());
    let mut results = Vec::new();
    for &chi_n in &o.chi_values {
        info!("fig4: chiN = {chi_n}");
        let traj = evolve_hd(&field, &ensemble, chi_n, t_final, o.dt * tau, o.sample_interval * tau)?;
        let widths = WidthSeries2D::from_trajectory(&traj, &ensemble, &axis)?;
        let synth = Synthesizer::new(&ensemble, &axis)?;
        let last = synth.branch_hd(traj.last(), Branch::Down)?;
        let n = axis.len();
        let rows = last
            .density
            .iter()
            .enumerate()
            .map(|(i, rho)| vec![fmt(axis[i / n]), fmt(axis[i % n]), fmt(*rho)]);
        io::write_csv(
            &b.path(&format!("density_chi_{}.csv", label_chi(chi_n))),
            &b.meta,
            &["x", "z", "rho_down"],
            rows,
        )?;
        results.push((chi_n, widths));
    }
    let rows = results.iter().flat_map(|(chi_n, w)| {
        w.times.iter().enumerate().map(move |(i, t)| {
            vec![
                fmt(*chi_n),
                fmt(*t),
                fmt(w.ratio_x[i]),
                fmt(w.ratio_z[i]),
                w.fits[i].converged.to_string(),
            ]
        })
    });
    io::write_csv(
        &b.path("sigma_series.csv"),
        &b.meta,
        &["chiN", "t", "sigma_x_ratio", "sigma_z_ratio", "converged"],
        rows,
    )?;
    let rows = results.iter().map(|(chi_n, w)| {
        let i = w.times.len() - 1;
        vec![fmt(*chi_n), fmt(w.ratio_x[i]), fmt(w.ratio_z[i])]
    });
    io::write_csv(
        &b.path("sigma_vs_chi.csv"),
        &b.meta,
        &["chiN", "sigma_x_star", "sigma_z_star"],
        rows,
    )?;
    let table: Vec<Value> = results
        .iter()
        .map(|(chi_n, w)| {
            let i = w.times.len() - 1;
            json!({"chiN": chi_n, "sigma_x_star": w.ratio_x[i], "sigma_z_star": w.ratio_z[i]})
        })
        .collect();
    Ok(json!({ "t_d": t_final, "sigma_star": table }))
}

fn detect(spec: &ExperimentSpec, b: &mut Bundle) -> Result<Value, CliError> {
    let p = &spec.params;
    let chi_opt = units::chi_opt_n(p.theta);
    let interval = spec.config.detect.sample_interval * units::tau();
    let cases: Vec<(&str, f64, bool)> = vec![
        ("chi_opt", chi_opt, false),
        ("zero", 0.0, false),
        ("minus_chi_opt", -chi_opt, false),
        ("chi_opt_echo", chi_opt, true),
        ("zero_echo", 0.0, true),
        ("minus_chi_opt_echo", -chi_opt, true),
    ];
    let mut series = Vec::new();
    for (label, chi_n_arm, echo) in cases {
        info!("detect: {label}");
        let setup = DetectionSetup {
            chi_n_arm,
            omega_arm: chi_opt,
            echo,
            sample_interval: interval,
        };
        series.push((label, interferometer_sequence(p, setup)?));
    }
    let rows = series.iter().flat_map(|(label, s)| {
        s.samples.iter().map(move |c| {
            vec![
                label.to_string(),
                fmt(s.setup.chi_n_arm),
                s.setup.echo.to_string(),
                fmt(c.t),
                fmt(c.contrast),
                fmt(c.population),
                fmt(c.overlap_re),
                fmt(c.overlap_im),
            ]
        })
    });
    io::write_csv(
        &b.path("contrast.csv"),
        &b.meta,
        &[
            "case",
            "chiN_arm",
            "echo",
            "t",
            "contrast",
            "population",
            "overlap_re",
            "overlap_im",
        ],
        rows,
    )?;
    let summary: serde_json::Map<String, Value> = series
        .iter()
        .map(|(label, s)| {
            (
                label.to_string(),
                json!({"chiN_arm": s.setup.chi_n_arm, "echo": s.setup.echo, "final_contrast": s.final_contrast(), "min_contrast": s.min_contrast()}),
            )
        })
        .collect();
    Ok(Value::Object(summary))
}

fn write_bloch(path: &Path, meta: &Metadata, traj: &BlochTrajectory, stride: usize) -> Result<(), CliError> {
    let thinned = BlochTrajectory {
        n_atoms: traj.n_atoms,
        samples: traj
            .samples
            .iter()
            .enumerate()
            .filter(|(i, _)| i % stride == 0 || *i + 1 == traj.samples.len())
            .map(|(_, s)| s.clone())
            .collect(),
    };
    io::write_bloch_csv(path, meta, &thinned)?;
    Ok(())
}

fn dissipation(spec: &ExperimentSpec, b: &mut Bundle) -> Result<Value, CliError> {
    let o = &spec.config.dissipation;
    let chi_n = spec.params.chi_n;
    let tau = units::tau();
    let (t_final, dt) = (o.t_final * tau, o.dt * tau);
    let stride = ((o.sample_interval / o.dt).round() as usize).max(1);
    let s0 = CollectiveBloch::coherent(o.n_atoms, o.theta, 0.0);
    let (g1, g2) = match &o.cavity {
        Some(c) => gamma_rates(c)?,
        None => (o.gamma, o.gamma),
    };
    let balanced_gamma = 0.5 * (g1 + g2);
    info!("dissipation: balanced Gamma = {balanced_gamma}");
    let balanced = evolve_bloch(&s0, chi_n, balanced_gamma, balanced_gamma, t_final, dt)?;
    let unbalanced = evolve_bloch(&s0, chi_n, 0.0, g1 + g2, t_final, dt)?;
    write_bloch(&b.path("bloch_balanced.csv"), &b.meta, &balanced, stride)?;
    write_bloch(&b.path("bloch_unbalanced.csv"), &b.meta, &unbalanced, stride)?;

    let times = balanced.times();
    let perp: Vec<f64> = (0..balanced.samples.len())
        .map(|i| balanced.state(i).transverse())
        .collect();
    let z: Vec<f64> = balanced.samples.iter().map(|s| s.s_z).collect();
    let end = unbalanced.state(unbalanced.samples.len() - 1);
    Ok(json!({
        "Gamma1": g1,
        "Gamma2": g2,
        "balanced_Gamma": balanced_gamma,
        "fitted_transverse_rate": fit_decay_rate(&times, &perp),
        "fitted_S_Z_rate": fit_decay_rate(&times, &z),
        "unbalanced_final_S_Z": end.s_z,
    }))
}

fn dispersion_tables(spec: &ExperimentSpec, b: &mut Bundle) -> Result<Value, CliError> {
    let o = &spec.config.dispersion;
    let theta = spec.params.theta;
    let chis = if o.chi_values.is_empty() {
        vec![spec.params.chi_n]
    } else {
        o.chi_values.clone()
    };
    // Odd point count keeps p = 0 on the grid.
    let points = o.points | 1;
    let p = linspace(-o.p_max, o.p_max, points);
    let curves: Vec<_> = chis.iter().map(|&c| dispersion(&p, c, theta)).collect();
    let rows = curves.iter().flat_map(|c| {
        c.p_values.iter().enumerate().map(move |(i, p)| {
            vec![
                fmt(c.chi_n),
                fmt(c.theta),
                fmt(*p),
                fmt(c.energies[i]),
                fmt(c.curvature[i]),
            ]
        })
    });
    io::write_csv(
        &b.path("dispersion.csv"),
        &b.meta,
        &["chiN", "theta", "p", "E", "curvature"],
        rows,
    )?;
    let rows = curves.iter().map(|c| {
        vec![
            fmt(c.chi_n),
            fmt(c.theta),
            fmt(c.effective_mass),
            fmt(c.fitted_effective_mass),
            fmt(c.c_s),
        ]
    });
    io::write_csv(
        &b.path("mass_table.csv"),
        &b.meta,
        &["chiN", "theta", "effective_mass", "fitted_effective_mass", "c_s"],
        rows,
    )?;
    let mid = points / 2;
    let table: Vec<Value> = curves
        .iter()
        .map(|c| json!({"chiN": c.chi_n, "curvature_at_0": c.curvature[mid], "effective_mass": c.effective_mass, "c_s": c.c_s}))
        .collect();
    Ok(json!({ "theta": theta, "curves": table }))
}
