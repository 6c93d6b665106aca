use nalgebra::{DMatrix, DVector};

use super::omp::{OmpCoder, SparseCode};
use super::{Dictionary, KsvdConfig};
use crate::error::{Error, Result};
use crate::frame::train_subsample;

const POWER_ITERATIONS: usize = 60;
const POWER_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct KsvdOutcome {
    pub dictionary: Dictionary,
    /// `||X - D alpha||_F^2` after coding and after each update sweep.
    pub error_trace: Vec<f64>,
}

/// `||X - D alpha||_F^2` for column codes.
pub fn reconstruction_error(x: &DMatrix<f64>, dict: &Dictionary, codes: &[SparseCode]) -> f64 {
    residual_matrix(x, dict, codes).norm_squared()
}

fn residual_matrix(x: &DMatrix<f64>, dict: &Dictionary, codes: &[SparseCode]) -> DMatrix<f64> {
    let mut r = x.clone();
    for (j, code) in codes.iter().enumerate() {
        let mut col = r.column_mut(j);
        for (&a, &c) in code.indices.iter().zip(&code.coefficients) {
            col.axpy(-c, &dict.atoms().column(a), 1.0);
        }
    }
    r
}

/// Leading left singular vector of `e` by power iteration on `e e^T`,
/// started from `start`. The Rayleigh quotient never decreases, so the
/// result explains at least as much energy as `start`.
fn leading_direction(e: &DMatrix<f64>, start: &DVector<f64>) -> DVector<f64> {
    let mut u = start.clone();
    let mut energy = e.tr_mul(&u).norm_squared();
    for _ in 0..POWER_ITERATIONS {
        let mut next = e * e.tr_mul(&u);
        let n = next.norm();
        if n == 0.0 {
            break;
        }
        next /= n;
        let next_energy = e.tr_mul(&next).norm_squared();
        if next_energy < energy {
            break;
        }
        let step = (&next - &u).norm();
        u = next;
        let gained = next_energy - energy;
        energy = next_energy;
        if step < POWER_TOL || gained <= POWER_TOL * energy {
            break;
        }
    }
    u
}

/// One dictionary-update sweep with supports held fixed.
///
/// Atoms are visited in index order; each used atom and its coefficients are
/// replaced by the leading singular pair of the residual restricted to the
/// columns that use it. Returns the indices of atoms no code uses.
pub fn ksvd_sweep(x: &DMatrix<f64>, dict: &mut Dictionary, codes: &mut [SparseCode]) -> Result<Vec<usize>> {
    if x.ncols() != codes.len() || x.nrows() != dict.atom_dim() {
        return Err(Error::mismatch(
            format!("{}x{}", dict.atom_dim(), codes.len()),
            format!("{}x{}", x.nrows(), x.ncols()),
        ));
    }
    let atoms = dict.atom_count();
    // users[a] = (column, position within that column's code)
    let mut users: Vec<Vec<(usize, usize)>> = vec![Vec::new(); atoms];
    for (j, code) in codes.iter().enumerate() {
        for (pos, &a) in code.indices.iter().enumerate() {
            users[a].push((j, pos));
        }
    }
    let mut residual = residual_matrix(x, dict, codes);
    let mut dead = Vec::new();
    for (a, used_by) in users.iter().enumerate() {
        if used_by.is_empty() {
            dead.push(a);
            continue;
        }
        let atom = dict.atoms().column(a).clone_owned();
        let mut e = DMatrix::zeros(x.nrows(), used_by.len());
        for (t, &(j, pos)) in used_by.iter().enumerate() {
            let mut col = e.column_mut(t);
            col.copy_from(&residual.column(j));
            col.axpy(codes[j].coefficients[pos], &atom, 1.0);
        }
        let u = leading_direction(&e, &atom);
        let coef = e.tr_mul(&u);
        for (t, &(j, pos)) in used_by.iter().enumerate() {
            codes[j].coefficients[pos] = coef[t];
            let mut col = residual.column_mut(j);
            col.copy_from(&e.column(t));
            col.axpy(-coef[t], &u, 1.0);
        }
        dict.atoms_mut().set_column(a, &u);
    }
    for (j, code) in codes.iter_mut().enumerate() {
        code.residual_norm = residual.column(j).norm();
    }
    Ok(dead)
}

/// Replaces unused atoms with the normalized worst-represented columns whose
/// residual exceeds `residual_tol`.
fn reseed_dead_atoms(x: &DMatrix<f64>, dict: &mut Dictionary, codes: &[SparseCode], dead: &[usize], residual_tol: f64) {
    if dead.is_empty() {
        return;
    }
    let residual = residual_matrix(x, dict, codes);
    let mut order: Vec<(usize, f64)> = residual
        .column_iter()
        .map(|c| c.norm())
        .enumerate()
        .filter(|&(_, n)| n > residual_tol && n > 0.0)
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (&a, &(j, n)) in dead.iter().zip(&order) {
        let col = residual.column(j) / n;
        dict.atoms_mut().set_column(a, &col);
    }
}

pub fn ksvd_train(x: &DMatrix<f64>, k1: usize, k2: usize, cfg: &KsvdConfig) -> Result<Dictionary> {
    Ok(ksvd_train_with_trace(x, k1, k2, cfg)?.dictionary)
}

/// K-SVD from a seeded random dictionary. `x` holds vectorized `k1 x k2`
/// patches as columns.
pub fn ksvd_train_with_trace(x: &DMatrix<f64>, k1: usize, k2: usize, cfg: &KsvdConfig) -> Result<KsvdOutcome> {
    if x.ncols() == 0 {
        return Err(Error::EmptyInput("no training patches".into()));
    }
    if x.nrows() != k1 * k2 {
        return Err(Error::mismatch(format!("{} rows", k1 * k2), x.nrows()));
    }
    let x = train_subsample(x, cfg.training_patch_cap, cfg.seed);
    let atom_count = cfg.atom_count.unwrap_or(4 * k1 * k2);
    let mut dict = Dictionary::random(k1, k2, atom_count, cfg.seed)?;
    let tol = cfg.residual_tol();
    let mut trace = Vec::with_capacity(2 * cfg.iterations);
    for _ in 0..cfg.iterations {
        let mut codes = OmpCoder::new(&dict).encode_columns(&x, cfg.target_sparsity, tol)?;
        trace.push(reconstruction_error(&x, &dict, &codes));
        let dead = ksvd_sweep(&x, &mut dict, &mut codes)?;
        trace.push(codes.iter().map(|c| c.residual_norm * c.residual_norm).sum());
        reseed_dead_atoms(&x, &mut dict, &codes, &dead, tol);
    }
    Ok(KsvdOutcome { dictionary: dict, error_trace: trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(seed: u64, dim: usize, n: usize) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(dim, n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn sweep_never_increases_error() {
        let x = random_data(1, 9, 200);
        let mut dict = Dictionary::random(3, 3, 18, 2).unwrap();
        let mut codes = OmpCoder::new(&dict).encode_columns(&x, 3, 0.0).unwrap();
        let before = reconstruction_error(&x, &dict, &codes);
        ksvd_sweep(&x, &mut dict, &mut codes).unwrap();
        let after = reconstruction_error(&x, &dict, &codes);
        assert!(after <= before + 1e-10, "{before} -> {after}");
        assert!(dict.max_norm_error() < 1e-10);
    }

    #[test]
    fn atoms_stay_unit_norm() {
        let x = random_data(3, 9, 300);
        let cfg = KsvdConfig { patch_size: 3, atom_count: Some(20), target_sparsity: 2, iterations: 4, ..Default::default() };
        let out = ksvd_train_with_trace(&x, 3, 3, &cfg).unwrap();
        assert!(out.dictionary.max_norm_error() < 1e-10);
        for pair in out.error_trace.chunks(2) {
            assert!(pair[1] <= pair[0] + 1e-9);
        }
    }

    #[test]
    fn no_signal_leaves_dictionary_unchanged() {
        let x = random_data(4, 4, 50);
        let cfg = KsvdConfig {
            patch_size: 2,
            atom_count: Some(8),
            noise_sigma: 1e6,
            iterations: 2,
            seed: 9,
            ..Default::default()
        };
        let dict = ksvd_train(&x, 2, 2, &cfg).unwrap();
        assert_eq!(dict, Dictionary::random(2, 2, 8, 9).unwrap());
    }

    #[test]
    fn unused_atoms_are_reseeded() {
        let x = random_data(5, 4, 60);
        let mut dict = Dictionary::random(2, 2, 8, 1).unwrap();
        let codes = vec![SparseCode::default(); 60];
        let before = dict.clone();
        reseed_dead_atoms(&x, &mut dict, &codes, &[2, 5], 0.0);
        assert_ne!(dict.atoms().column(2), before.atoms().column(2));
        assert_eq!(dict.atoms().column(0), before.atoms().column(0));
        assert!(dict.max_norm_error() < 1e-12);
        // worst column first
        let worst = (0..60).max_by(|&a, &b| x.column(a).norm().total_cmp(&x.column(b).norm())).unwrap();
        let expect = x.column(worst) / x.column(worst).norm();
        assert!((dict.atoms().column(2) - expect).norm() < 1e-12);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let x = random_data(6, 4, 100);
        let cfg = KsvdConfig { patch_size: 2, atom_count: Some(6), target_sparsity: 2, iterations: 3, seed: 4, ..Default::default() };
        let a = ksvd_train(&x, 2, 2, &cfg).unwrap();
        let b = ksvd_train(&x, 2, 2, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
