//! Independent brute-force oracles for the closed-form steps.

use ddtf_core::frame::{dct_init, hard_threshold, update_dictionary, CoefficientMatrix, FilterBank};
use ddtf_core::ksvd::{ksvd_train, omp_encode, Dictionary, KsvdConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let qr = gaussian(rng, n, n).qr();
    let (q, r) = (qr.q(), qr.r());
    // fix column signs so the distribution is Haar
    DMatrix::from_fn(n, n, |i, j| q[(i, j)] * r[(j, j)].signum())
}

/// Keeps the constant low-pass column and rotates the high-pass block.
fn rotate_highpass(bank: &FilterBank, q: &DMatrix<f64>) -> FilterBank {
    let k = bank.patch_dim();
    let w = bank.matrix();
    let a2 = w.columns(1, k - 1) * q;
    let mut out = w.clone();
    out.columns_mut(1, k - 1).copy_from(&a2);
    FilterBank::from_matrix(bank.k1(), bank.k2(), out).unwrap()
}

#[test]
fn hard_threshold_is_the_exhaustive_l0_minimizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let lambda: f64 = rng.random_range(0.0..2.0);
        let c: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * 1.5).collect();
        let cost = |a: &[f64]| -> f64 {
            c.iter().zip(a).map(|(x, y)| (x - y).powi(2)).sum::<f64>()
                + lambda * lambda * a.iter().filter(|v| **v != 0.0).count() as f64
        };
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            // on a fixed support the optimum copies c
            let a: Vec<f64> = (0..n).map(|i| if mask >> i & 1 == 1 { c[i] } else { 0.0 }).collect();
            best = best.min(cost(&a));
        }
        let m = CoefficientMatrix(DMatrix::from_column_slice(n, 1, &c));
        let t = hard_threshold(&m, lambda, false);
        let got = cost(t.0.as_slice());
        assert!((got - best).abs() <= 1e-12 * (1.0 + best), "n={n} lambda={lambda} got {got} best {best}");
    }
}

#[test]
fn update_dictionary_beats_orthogonal_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..50 {
        let (k1, k2) = [(2, 2), (3, 3), (4, 4), (2, 4)][trial % 4];
        let k = k1 * k2;
        let n = rng.random_range(k..6 * k);
        let x = gaussian(&mut rng, k, n);
        let start = rotate_highpass(&dct_init(k1, k2).unwrap(), &random_orthogonal(&mut rng, k - 1));
        let lambda = rng.random_range(0.0..1.5);
        let coeffs = hard_threshold(&CoefficientMatrix(start.matrix().transpose() * &x), lambda, true);
        let fit = |b: &FilterBank| (&x - b.matrix() * &coeffs.0).norm_squared();
        // round-off floor for fits that are numerically zero
        let floor = 1e-12 * x.norm_squared();
        let updated = update_dictionary(&x, &coeffs, &start).unwrap();
        let best = fit(&updated);
        assert!(best <= fit(&start) + floor, "trial {trial}: {best} > {}", fit(&start));
        for probe in 0..100 {
            // half small rotations near the optimum, half arbitrary ones
            let q = if probe % 2 == 0 {
                let g = gaussian(&mut rng, k - 1, k - 1) * 0.05;
                let skew = &g - g.transpose();
                (DMatrix::identity(k - 1, k - 1) + skew).qr().q()
            } else {
                random_orthogonal(&mut rng, k - 1)
            };
            let other = fit(&rotate_highpass(&updated, &q));
            assert!(best <= other * (1.0 + 1e-10) + floor, "trial {trial} probe {probe}: {best} > {other}");
        }
    }
}

fn unit_atoms(rng: &mut ChaCha8Rng, dim: usize, count: usize) -> DMatrix<f64> {
    let mut d = gaussian(rng, dim, count);
    for mut c in d.column_iter_mut() {
        c.normalize_mut();
    }
    d
}

/// Best least-squares residual over every support of size <= s, with the
/// support that attains it.
fn exhaustive_residual(d: &DMatrix<f64>, x: &DVector<f64>, s: usize) -> (f64, Vec<usize>) {
    let m = d.ncols();
    let mut best = (x.norm(), Vec::new());
    for mask in 1u32..(1 << m) {
        if mask.count_ones() as usize > s {
            continue;
        }
        let cols: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let sub = d.select_columns(&cols);
        let coef = sub.clone().svd(true, true).solve(x, 1e-12).unwrap();
        let r = (x - sub * coef).norm();
        if r < best.0 {
            best = (r, cols);
        }
    }
    best
}

#[test]
fn omp_never_beats_the_exhaustive_optimum_and_matches_it_on_the_same_support() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (dim, atoms, s) = (6, 10, 2);
    let mut same_support = 0;
    for _ in 0..1000 {
        let d = unit_atoms(&mut rng, dim, atoms);
        let x: DVector<f64> = gaussian(&mut rng, dim, 1).column(0).into();
        let dict = Dictionary::new(dim, 1, d.clone()).unwrap();
        let code = omp_encode(&dict, x.as_slice(), s, 0.0).unwrap();
        assert!(code.len() <= s);
        let (oracle, support) = exhaustive_residual(&d, &x, s);
        assert!(code.residual_norm >= oracle - 1e-10 * x.norm());
        let mut picked = code.indices.clone();
        picked.sort_unstable();
        if picked == support {
            same_support += 1;
            assert!((code.residual_norm - oracle).abs() <= 1e-10 * x.norm());
        }
    }
    assert!(same_support > 0);
}

#[test]
fn rank_one_data_recovers_its_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let v = gaussian(&mut rng, 16, 1).column(0).normalize();
    // every column equal to v, scaled
    let x = DMatrix::from_fn(16, 200, |r, c| v[r] * (1.0 + (c % 7) as f64));
    let cfg = KsvdConfig {
        patch_size: 4,
        atom_count: Some(20),
        target_sparsity: 1,
        iterations: 5,
        ..Default::default()
    };
    let dict = ksvd_train(&x, 4, 4, &cfg).unwrap();
    // independent power iteration on X X^T
    let g = &x * x.transpose();
    let mut u = DVector::from_element(16, 1.0).normalize();
    for _ in 0..200 {
        u = (&g * &u).normalize();
    }
    assert!((u.dot(&v).abs() - 1.0).abs() < 1e-12);
    let best = dict
        .atoms()
        .column_iter()
        .map(|a| (a - &u).norm().min((a + &u).norm()))
        .fold(f64::INFINITY, f64::min);
    assert!(best < 1e-6, "closest atom is {best} away");
}
