//! Acceptance criteria. Each test prints one PASS/FAIL line; tolerances and
//! runtime budgets are the constants at the top of each test.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use cavity_soliton::dissipation::{bloch_derivative, evolve_bloch, fit_decay_rate, CollectiveBloch};
use cavity_soliton::dynamics1d::{
    closed_form_solution, dicke, dispersion, evolve, evolve_model, frame_rate, Coupling, EvolveOptions, Model1D,
    SpinorField1D,
};
use cavity_soliton::dynamics_hd::{
    build_coupling_matrix, evolve_hd, naive_2d_dispersion, naive_2d_model, CouplingMatrixHD, ModelHD, SpinorFieldHD,
};
use cavity_soliton::ensemble::gaussian_grid;
use cavity_soliton::observables::{
    default_axis, interferometer_sequence, sweep_width_vs_chi, width_series, DetectionSetup, WidthSeries2D,
};
use cavity_soliton::{units, SimulationParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Serializes the criteria so each runtime budget measures one criterion.
static SERIAL: Mutex<()> = Mutex::new(());

fn report(id: u32, name: &str, pass: bool, detail: String, elapsed: Duration, budget: Duration) {
    let within = elapsed <= budget;
    let verdict = if pass && within { "PASS" } else { "FAIL" };
    // Written to the raw handle so the verdict shows up even when output is captured.
    let line = format!(
        "criterion {id:>2} [{verdict}] {name}: {detail}; runtime {:.2}s (budget {:.0}s)\n",
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} failed: {detail}");
    assert!(within, "criterion {id} exceeded its runtime budget");
}

fn lock() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn criterion_01_flat_band_curvature() {
    const P_MAX: f64 = 0.1;
    const C2_LIMIT: f64 = 1e-3 * 0.5;
    let _g = lock();
    let start = Instant::now();
    let p = linspace(-P_MAX, P_MAX, 201);
    let curve = dispersion(&p, -4.0 * units::RECOIL_ENERGY, FRAC_PI_2);
    let c2 = curve.fit_coefficients[2];
    let origin = curve.curvature[100];
    let pass = c2.abs() < C2_LIMIT && origin.abs() < 1e-12;
    report(
        1,
        "flat band at chiN = -4E_R",
        pass,
        format!("|c2| = {:.3e} (< {C2_LIMIT:.1e}), E''(0) = {origin:.2e}", c2.abs()),
        start.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_02_soliton_width() {
    const SOLITON_MAX: f64 = 1.05;
    const FREE_TOL: f64 = 0.02;
    const ANTI_TOL: f64 = 0.05;
    let _g = lock();
    let start = Instant::now();
    let tau = units::tau();
    let sigma_p = 0.05;
    let e = gaussian_grid(1, 201, 5.0 * sigma_p, sigma_p);
    let field = SpinorField1D::equal_superposition(e.len());
    let s0 = units::min_uncertainty_width(sigma_p);
    let run = |chi_n: f64, t: f64| {
        let opts = EvolveOptions::new(t, 1e-3 * tau).sample_every(0.5 * tau);
        let traj = evolve(&field, &e, Coupling::Exchange { chi_n }, &opts).unwrap();
        width_series(&traj, &e, &default_axis(sigma_p, t, true, 2048)).unwrap()
    };
    let chi_opt = units::chi_opt_n(FRAC_PI_2);

    let soliton = run(chi_opt, 30.0 * tau);
    let soliton_max = soliton.max_ratio();

    let law = |t: f64, m: f64| (1.0 + (sigma_p * t / (m * s0)).powi(2)).sqrt();
    let worst = |ws: &cavity_soliton::observables::WidthSeries, m: f64| {
        ws.times
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let want = law(*t, m);
                (ws.ratio_down[i] / want - 1.0)
                    .abs()
                    .max((ws.ratio_up[i] / want - 1.0).abs())
            })
            .fold(0.0, f64::max)
    };
    let free = run(0.0, 30.0 * tau);
    let free_err = worst(&free, units::MASS);
    let anti = run(-chi_opt, 10.0 * tau);
    let m_star = dispersion(&[0.0], -chi_opt, FRAC_PI_2).effective_mass;
    let anti_err = worst(&anti, m_star);

    let pass = soliton_max <= SOLITON_MAX
        && free_err <= FREE_TOL
        && anti_err <= ANTI_TOL
        && (m_star - 0.5 * units::MASS).abs() < 1e-12
        && soliton.all_converged();
    report(
        2,
        "soliton width",
        pass,
        format!(
            "max ratio at chi_opt {soliton_max:.4} (<= {SOLITON_MAX}), free-law error {free_err:.4} (<= {FREE_TOL}), \
             M*=M/2 law error {anti_err:.4} (<= {ANTI_TOL})"
        ),
        start.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_03_theta_scan() {
    const GRID_POINTS: usize = 41;
    let _g = lock();
    let start = Instant::now();
    let chi_grid = linspace(-4.0, 0.0, GRID_POINTS);
    let step = chi_grid[1] - chi_grid[0];
    let params = SimulationParams::default();
    let mut pass = true;
    let mut detail = Vec::new();
    for theta in [FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4] {
        let r = sweep_width_vs_chi(theta, &chi_grid, None, &params).unwrap();
        let target = -4.0 * units::RECOIL_ENERGY * theta.sin().powi(2);
        let ok = (r.argmin_chi_n - target).abs() <= step + 1e-12 && r.locked_valid;
        pass &= ok;
        detail.push(format!("theta={theta:.4}: argmin {:.2} vs {target:.2}", r.argmin_chi_n));
    }
    report(
        3,
        "theta scan argmin",
        pass,
        format!("{} (step {step:.2})", detail.join(", ")),
        start.elapsed(),
        Duration::from_secs(600),
    );
}

#[test]
fn criterion_04_2d_eigenstructure() {
    const TOL: f64 = 1e-12;
    let _g = lock();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut inert_zero = true;
    for _ in 0..100 {
        let p = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        let chi_n = rng.random_range(-6.0..-0.1);
        let m = build_coupling_matrix(&p, chi_n, 2).unwrap();
        let ground = m.eigenvalues()[0];
        worst = worst.max((ground - CouplingMatrixHD::ground_closed_form(&p, chi_n)).abs());
        inert_zero &= m
            .matrix
            .row(4)
            .iter()
            .chain(m.matrix.column(4).iter())
            .all(|v| *v == 0.0);
    }
    report(
        4,
        "2D eigenstructure",
        worst < TOL && inert_zero,
        format!("max ground-eigenvalue error {worst:.2e} (< {TOL:.0e}), A3 row/column zero: {inert_zero}"),
        start.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_05_2d_soliton() {
    const INITIAL_TOL: f64 = 0.05;
    const ISOTROPY_TOL: f64 = 0.02;
    const FREE_TOL: f64 = 0.02;
    let _g = lock();
    let start = Instant::now();
    let tau = units::tau();
    let sigma_p = 0.05;
    let t = 100.0 * tau;
    let e = gaussian_grid(2, 41, 5.0 * sigma_p, sigma_p);
    let axis = default_axis(sigma_p, t, false, 128);
    let field = SpinorFieldHD::raman_superposition(2, e.len());
    let run = |chi_n: f64| {
        let traj = evolve_hd(&field, &e, chi_n, t, 1e-2 * tau, 5.0 * tau).unwrap();
        WidthSeries2D::from_trajectory(&traj, &e, &axis).unwrap()
    };

    let sol = run(-4.0 * units::RECOIL_ENERGY);
    let n = sol.times.len() - 1;
    let (rx, rz) = (sol.ratio_x[n], sol.ratio_z[n]);
    let sol_ok =
        (rx - 1.0).abs() <= INITIAL_TOL && (rz - 1.0).abs() <= INITIAL_TOL && (rx / rz - 1.0).abs() <= ISOTROPY_TOL;

    let free = run(0.0);
    let s0 = units::min_uncertainty_width(sigma_p);
    let free_err = free
        .times
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let want = (1.0 + (sigma_p * t / s0).powi(2)).sqrt();
            (free.ratio_x[i] / want - 1.0)
                .abs()
                .max((free.ratio_z[i] / want - 1.0).abs())
        })
        .fold(0.0, f64::max);
    report(
        5,
        "2D soliton",
        sol_ok && free_err <= FREE_TOL,
        format!(
            "sigma_x*/sigma_x(0) = {rx:.4}, sigma_z*/sigma_z(0) = {rz:.4} at 100 tau (within {INITIAL_TOL}, \
             mutual {ISOTROPY_TOL}); free-law error {free_err:.4} (<= {FREE_TOL})"
        ),
        start.elapsed(),
        Duration::from_secs(600),
    );
}

#[test]
fn criterion_06_naive_control() {
    const ANISOTROPY_MIN: f64 = 1.1;
    let _g = lock();
    let start = Instant::now();
    let recoil = [1.0, 1.0];

    let mut coeff_ok = true;
    for chi_n in linspace(-8.0, 8.0, 33).into_iter().filter(|c| c.abs() > 1e-9) {
        let d = naive_2d_dispersion(chi_n, recoil).unwrap();
        let want = recoil[0] * recoil[1] / (2.0 * chi_n);
        let h = 1e-4;
        let fd = (d.energy([h, h]) - d.energy([h, -h]) - d.energy([-h, h]) + d.energy([-h, -h])) / (4.0 * h * h);
        coeff_ok &= (d.cross_coefficient() - want).abs() < 1e-14 && (fd - want).abs() < 1e-6 && want != 0.0;
    }

    let tau = units::tau();
    let sigma_p = 0.05;
    let t = 30.0 * tau;
    // 61 nodes per axis keep the synthesis period above the drift span.
    let e = gaussian_grid(2, 61, 5.0 * sigma_p, sigma_p);
    // Flattest achievable direction for this recoil vector: χN = −|K|²/2.
    let chi_n = -0.5 * (recoil[0] * recoil[0] + recoil[1] * recoil[1]);
    let model = naive_2d_model(&e, chi_n, recoil).unwrap();
    let field = SpinorField1D::equal_superposition(e.len());
    let traj = evolve_model(&field, &model, &EvolveOptions::new(t, 1e-2 * tau)).unwrap();
    let axis = default_axis(sigma_p, t, true, 160);
    let widths = WidthSeries2D::from_two_level(&traj, &e, &axis).unwrap();
    let last = widths.fits.last().unwrap();
    let [minor, major] = last.principal_sigmas();
    let ratio = major / minor;
    report(
        6,
        "naive single-recoil control",
        coeff_ok && ratio > ANISOTROPY_MIN && last.converged,
        format!("cross coefficient kx*kz/(2 chiN) on all 32 chiN values: {coeff_ok}; axis ratio at 30 tau {ratio:.4} (> {ANISOTROPY_MIN})"),
        start.elapsed(),
        Duration::from_secs(600),
    );
}

#[test]
fn criterion_07_closed_form_oracle() {
    const TOL: f64 = 1e-5;
    let _g = lock();
    let start = Instant::now();
    let tau = units::tau();
    let chi_n = units::chi_opt_n(FRAC_PI_2);
    let mut detail = Vec::new();
    let mut pass = true;
    for sigma_p in [1e-2, 1e-3, 1e-4] {
        let e = gaussian_grid(1, 201, 5.0 * sigma_p, sigma_p);
        let field = SpinorField1D::equal_superposition(e.len());
        let opts = EvolveOptions::new(30.0 * tau, 1e-3 * tau).sample_every(tau);
        let traj = evolve(&field, &e, Coupling::Exchange { chi_n }, &opts).unwrap();
        let mut worst = 0.0f64;
        for s in &traj.samples {
            for (n, p) in e.points().enumerate() {
                let (d, u) = closed_form_solution(p[0], chi_n, s.time);
                worst = worst.max((s.psi_down[n] - d).norm()).max((s.psi_up[n] - u).norm());
            }
        }
        pass &= worst <= TOL;
        detail.push(format!("sigma_p={sigma_p:.0e}: {worst:.2e}"));
    }
    // Same comparison with the collective field frozen at χN/2: isolates the
    // integrator from the mean-field correction.
    let sigma_p = 1e-2;
    let e = gaussian_grid(1, 201, 5.0 * sigma_p, sigma_p);
    let field = SpinorField1D::equal_superposition(e.len());
    let opts = EvolveOptions::new(30.0 * tau, 1e-3 * tau);
    let frozen = evolve(&field, &e, Coupling::Drive { omega: chi_n }, &opts).unwrap();
    let end = frozen.last();
    let frozen_err = e
        .points()
        .enumerate()
        .map(|(n, p)| {
            let (d, u) = closed_form_solution(p[0], chi_n, end.time);
            (end.psi_down[n] - d).norm().max((end.psi_up[n] - u).norm())
        })
        .fold(0.0, f64::max);
    detail.push(format!("fixed-field run at sigma_p=1e-2: {frozen_err:.2e}"));
    report(
        7,
        "closed-form oracle",
        pass,
        format!("max amplitude error over 30 tau: {} (<= {TOL:.0e})", detail.join(", ")),
        start.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_08_dicke_gap() {
    const TOL: f64 = 1e-12;
    let _g = lock();
    let start = Instant::now();
    let chi = -0.37;
    let n = 4;
    let gap = dicke::manifold_gap(n, chi, 0.0).unwrap();
    let levels = dicke::exchange_spectrum(n, chi);
    let formula_err = levels
        .iter()
        .map(|l| {
            (l.energy - chi * (l.total_spin * (l.total_spin + 1.0) - l.magnetization.powi(2) + l.magnetization)).abs()
        })
        .fold(0.0, f64::max);
    let gap_err = (gap - n as f64 * chi).abs();
    report(
        8,
        "Dicke gap",
        gap_err < TOL && formula_err < TOL && levels.len() == 16,
        format!("gap error {gap_err:.1e}, spectrum formula error {formula_err:.1e} (< {TOL:.0e})"),
        start.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_09_conservation() {
    const DRIFT_PER_TAU: f64 = 1e-8;
    const U1_TOL: f64 = 1e-10;
    let _g = lock();
    let start = Instant::now();
    let tau = units::tau();
    let sigma_p = 0.05;
    let mut worst = 0.0f64;

    let e1 = gaussian_grid(1, 201, 5.0 * sigma_p, sigma_p);
    for (chi_n, theta) in [
        (-2.0, FRAC_PI_2),
        (0.0, FRAC_PI_2),
        (2.0, FRAC_PI_2),
        (-1.5, PI / 3.0),
        (-1.0, FRAC_PI_4),
    ] {
        let field = SpinorField1D::polar(e1.len(), theta, 0.3);
        let rate = frame_rate(chi_n, theta);
        let model = Model1D::new(&e1, Coupling::Exchange { chi_n }, rate).unwrap();
        let opts = EvolveOptions::new(30.0 * tau, 1e-3 * tau)
            .sample_every(tau)
            .with_frame_rate(rate);
        let traj = evolve_model(&field, &model, &opts).unwrap();
        let (m0, en0) = (field.magnetization(e1.weights()), model.energy(&field));
        for s in traj.samples.iter().skip(1) {
            let per_tau = tau / s.time;
            let norm = s.norms().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
            let dm = (s.magnetization(e1.weights()) - m0).abs();
            let de = (model.energy(s) - en0).abs();
            worst = worst.max(norm.max(dm).max(de) * per_tau);
        }
    }

    let e2 = gaussian_grid(2, 21, 5.0 * sigma_p, sigma_p);
    let f2 = SpinorFieldHD::raman_superposition(2, e2.len());
    let m2 = ModelHD::new(&e2, -2.0).unwrap();
    let traj = evolve_hd(&f2, &e2, -2.0, 10.0 * tau, 1e-2 * tau, tau).unwrap();
    let (mz0, en0) = (f2.magnetization(e2.weights()), m2.energy(&f2));
    for s in traj.samples.iter().skip(1) {
        let per_tau = tau / s.time;
        let norm = s.norms().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
        let dm = (s.magnetization(e2.weights()) - mz0).abs();
        let de = (m2.energy(s) - en0).abs();
        worst = worst.max(norm.max(dm).max(de) * per_tau);
    }

    // U(1): rotating the initial state about Z commutes with the evolution.
    let phi = 0.7;
    let base = SpinorField1D::polar(e1.len(), PI / 3.0, 0.0);
    let mut rotated = base.clone();
    rotated.rotate_z(phi);
    let opts = EvolveOptions::new(10.0 * tau, 1e-3 * tau);
    let a = evolve(&base, &e1, Coupling::Exchange { chi_n: -2.0 }, &opts).unwrap();
    let b = evolve(&rotated, &e1, Coupling::Exchange { chi_n: -2.0 }, &opts).unwrap();
    let mut a_end = a.last().clone();
    a_end.rotate_z(phi);
    let b_end = b.last();
    let u1 = a_end
        .psi_down
        .iter()
        .zip(&b_end.psi_down)
        .chain(a_end.psi_up.iter().zip(&b_end.psi_up))
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);

    report(
        9,
        "conservation",
        worst <= DRIFT_PER_TAU && u1 <= U1_TOL,
        format!("worst norm/S_Z/energy drift per tau {worst:.2e} (<= {DRIFT_PER_TAU:.0e}), U(1) mismatch {u1:.2e} (<= {U1_TOL:.0e})"),
        start.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_10_dissipation_rates() {
    const RATE_TOL: f64 = 0.01;
    const LINEARITY_TOL: f64 = 0.01;
    let _g = lock();
    let start = Instant::now();
    let chi_opt = units::chi_opt_n(FRAC_PI_2);
    let mut detail = Vec::new();
    let mut pass = true;
    for scale in [1e-3, 1e-2] {
        let g = scale * chi_opt.abs();
        let t_final = 3.0 / g;
        let dt = (t_final / 20_000.0).min(0.02);
        let eq = evolve_bloch(
            &CollectiveBloch::coherent(1000, FRAC_PI_2, 0.0),
            chi_opt,
            g,
            g,
            t_final,
            dt,
        )
        .unwrap();
        let perp: Vec<f64> = (0..eq.samples.len()).map(|i| eq.state(i).transverse()).collect();
        let g_perp = fit_decay_rate(&eq.times(), &perp).unwrap();
        let tilt = evolve_bloch(
            &CollectiveBloch::coherent(1000, PI / 3.0, 0.0),
            chi_opt,
            g,
            g,
            t_final,
            dt,
        )
        .unwrap();
        let z: Vec<f64> = tilt.samples.iter().map(|s| s.s_z).collect();
        let g_z = fit_decay_rate(&tilt.times(), &z).unwrap();
        let ok = (g_perp / g - 1.0).abs() <= RATE_TOL && (g_z / (2.0 * g) - 1.0).abs() <= RATE_TOL;
        pass &= ok;
        detail.push(format!(
            "Gamma={g:.0e}: transverse {:.5}, S_Z {:.5}",
            g_perp / g,
            g_z / (2.0 * g)
        ));
    }

    // Normalized drift d(S_Z/(N/2))/dt on the equator grows ∝ N.
    let g2 = 1e-3 * chi_opt.abs();
    let drift = |n: u64| {
        let s = CollectiveBloch::coherent(n, FRAC_PI_2, 0.0);
        bloch_derivative(&s, chi_opt, 0.0, g2).unwrap().s_z / (0.5 * n as f64)
    };
    let (d2, d3, d4) = (drift(100), drift(1000), drift(10_000));
    let linear = ((d3 / d2) / 10.0 - 1.0).abs() <= LINEARITY_TOL && ((d4 / d3) / 10.0 - 1.0).abs() <= LINEARITY_TOL;
    let balanced_n_free = {
        let rate = |n: u64| {
            let s = CollectiveBloch::coherent(n, PI / 3.0, 0.0);
            bloch_derivative(&s, chi_opt, g2, g2).unwrap().s_z / s.s_z
        };
        (rate(100) - rate(10_000)).abs() < 1e-15
    };
    pass &= linear && balanced_n_free;
    report(
        10,
        "dissipation rates",
        pass,
        format!(
            "fitted/input {}; unbalanced drift ratios per decade {:.4}, {:.4}; balanced rate N-independent: {balanced_n_free}",
            detail.join(", "),
            d3 / d2,
            d4 / d3
        ),
        start.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_11_detection_ordering() {
    const MATCHED_MIN: f64 = 0.99;
    let _g = lock();
    let start = Instant::now();
    let chi_opt = units::chi_opt_n(FRAC_PI_2);
    let params = SimulationParams {
        t_final: 30.0,
        ..SimulationParams::default()
    };
    let run = |chi_n_arm: f64| {
        let setup = DetectionSetup {
            chi_n_arm,
            omega_arm: chi_opt,
            echo: true,
            sample_interval: units::tau(),
        };
        interferometer_sequence(&params, setup).unwrap()
    };
    let matched = run(chi_opt);
    let free = run(0.0);
    let anti = run(-chi_opt);
    let (c_opt, c_free, c_anti) = (matched.final_contrast(), free.final_contrast(), anti.final_contrast());
    let min_opt = matched.min_contrast();
    report(
        11,
        "detection ordering (with echo)",
        c_opt > c_free && c_free > c_anti && min_opt >= MATCHED_MIN,
        format!(
            "C(30 tau): chi_opt {c_opt:.4} > zero {c_free:.4} > -chi_opt {c_anti:.4}; min C(chi_opt) {min_opt:.4} (>= {MATCHED_MIN})"
        ),
        start.elapsed(),
        Duration::from_secs(300),
    );
}
