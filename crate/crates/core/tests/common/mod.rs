//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Pseudo-inverse through the SVD of `a` itself.
pub fn pinv_svd(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let top = svd.singular_values.max();
    svd.pseudo_inverse(1e-10 * top.max(1e-300)).unwrap()
}

pub fn max_column_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols()).map(|j| a.column(j).norm()).fold(0.0, f64::max)
}

/// `‖A‖₂²·‖W·A⁺‖_F²`: squared workload error at unit privacy constant.
pub fn unit_p_squared(w: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    let wa = w * pinv_svd(a);
    max_column_norm(a).powi(2) * wa.norm_squared()
}

/// `(Σ √σ_i)² / n` from the singular values of `W`.
pub fn svdb(w: &DMatrix<f64>) -> f64 {
    let s: f64 = w.singular_values().iter().sum();
    s * s / w.ncols() as f64
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Random orthogonal matrix from the QR factorization of a Gaussian-like matrix.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    random_matrix(n, n, rng).qr().q()
}

pub fn random_permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        p.swap(i, j);
    }
    p
}

/// Row-major multi-index of a cell.
pub fn unravel(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
    out
}

/// Per-attribute `[lo, hi]` bounds if the row is the 0/1 indicator of an
/// axis-aligned box of cells.
pub fn decode_box(row: &[f64], dims: &[usize]) -> Option<Vec<(usize, usize)>> {
    if row.iter().any(|&v| v != 0.0 && v != 1.0) {
        return None;
    }
    let cells: Vec<usize> = (0..row.len()).filter(|&i| row[i] == 1.0).collect();
    if cells.is_empty() {
        return None;
    }
    let mut bounds: Vec<(usize, usize)> = vec![(usize::MAX, 0); dims.len()];
    for &c in &cells {
        for (k, &v) in unravel(c, dims).iter().enumerate() {
            bounds[k].0 = bounds[k].0.min(v);
            bounds[k].1 = bounds[k].1.max(v);
        }
    }
    let volume: usize = bounds.iter().map(|(l, h)| h - l + 1).product();
    (volume == cells.len()).then_some(bounds)
}

/// Zipf-distributed counts `round(total / (H·r^s))` for ranks `r = 1..=n`.
pub fn zipf_counts(n: usize, s: f64, total: f64) -> Vec<u64> {
    let h: f64 = (1..=n).map(|r| (r as f64).powf(-s)).sum();
    (1..=n)
        .map(|r| (total / h * (r as f64).powf(-s)).round() as u64)
        .collect()
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
