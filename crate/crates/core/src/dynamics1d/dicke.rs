//! Exact diagonalization of the exchange Hamiltonian χ S₊S₋ for a few spins.
//!
//! Independent of the mean-field code: it checks the many-body gap between
//! the symmetric Dicke manifold and the next-lower total spin.

use nalgebra::{DMatrix, SymmetricEigen};

/// One eigenstate of χ S₊S₋ labelled by its total spin S and magnetization M.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DickeLevel {
    pub energy: f64,
    pub total_spin: f64,
    pub magnetization: f64,
}

/// Closed-form eigenvalue χ(S(S+1) − M² + M).
pub fn level_energy(chi: f64, total_spin: f64, magnetization: f64) -> f64 {
    chi * (total_spin * (total_spin + 1.0) - magnetization * magnetization + magnetization)
}

fn lowering(n_spins: usize) -> DMatrix<f64> {
    let dim = 1usize << n_spins;
    let mut s_minus = DMatrix::zeros(dim, dim);
    for state in 0..dim {
        for bit in 0..n_spins {
            if state & (1 << bit) != 0 {
                s_minus[(state ^ (1 << bit), state)] += 1.0;
            }
        }
    }
    s_minus
}

/// All 2^N eigenstates of χ S₊S₋ for `n_spins` spin-1/2 particles.
pub fn exchange_spectrum(n_spins: usize, chi: f64) -> Vec<DickeLevel> {
    assert!((1..=12).contains(&n_spins), "exact diagonalization limited to 12 spins");
    let dim = 1usize << n_spins;
    let s_minus = lowering(n_spins);
    let s_plus = s_minus.transpose();
    let splus_sminus = &s_plus * &s_minus;
    let sz = |state: usize| state.count_ones() as f64 - 0.5 * n_spins as f64;

    let mut levels = Vec::with_capacity(dim);
    // S_Z is conserved, so diagonalize each magnetization block separately.
    for up in 0..=n_spins {
        let block: Vec<usize> = (0..dim).filter(|s| s.count_ones() as usize == up).collect();
        let m = sz(block[0]);
        let h = DMatrix::from_fn(block.len(), block.len(), |i, j| {
            chi * splus_sminus[(block[i], block[j])]
        });
        let s2 = DMatrix::from_fn(block.len(), block.len(), |i, j| {
            let diag = if i == j { m * m - m } else { 0.0 };
            splus_sminus[(block[i], block[j])] + diag
        });
        let eig = SymmetricEigen::new(h);
        for (k, &energy) in eig.eigenvalues.iter().enumerate() {
            let v = eig.eigenvectors.column(k);
            let s2_val = (v.transpose() * &s2 * v)[(0, 0)];
            let total_spin = 0.5 * (-1.0 + (1.0 + 4.0 * s2_val).sqrt());
            levels.push(DickeLevel {
                energy,
                total_spin: (2.0 * total_spin).round() / 2.0,
                magnetization: m,
            });
        }
    }
    levels
}

/// Gap between the S = N/2 and S = N/2 − 1 manifolds at magnetization `m`.
pub fn manifold_gap(n_spins: usize, chi: f64, m: f64) -> Option<f64> {
    let top = 0.5 * n_spins as f64;
    let levels = exchange_spectrum(n_spins, chi);
    let find = |s: f64| {
        levels
            .iter()
            .find(|l| l.total_spin == s && l.magnetization == m)
            .map(|l| l.energy)
    };
    Some(find(top)? - find(top - 1.0)?)
}
