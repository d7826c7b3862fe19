//! Fixed strategies used as comparison points.

use nalgebra::DMatrix;

use crate::domain::{DomainShape, Workload};
use crate::error::{Error, Result};
use crate::mechanism::{sensitivity_l2, PrivacyParams};
use crate::strategy::{Provenance, Strategy};

pub fn identity_strategy(n: usize) -> Result<Strategy> {
    if n == 0 {
        return Err(Error::InvalidArgument("identity strategy needs n >= 1".into()));
    }
    Strategy::new(DMatrix::identity(n, n), Provenance::Identity)
}

/// Unnormalized Haar matrix over `d = 2^k` cells: the total, then for each
/// level the ±1 half-differences of every block.
fn haar(d: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(d, d);
    h.row_mut(0).fill(1.0);
    let mut row = 1;
    let mut blocks = 1;
    while blocks < d {
        let width = d / blocks;
        for b in 0..blocks {
            let start = b * width;
            for j in start..start + width / 2 {
                h[(row, j)] = 1.0;
            }
            for j in start + width / 2..start + width {
                h[(row, j)] = -1.0;
            }
            row += 1;
        }
        blocks *= 2;
    }
    h
}

/// Kronecker product of per-attribute matrices in attribute order, which
/// matches row-major cell linearization.
fn tensor(factors: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut out = DMatrix::from_element(1, 1, 1.0);
    for f in factors {
        out = out.kronecker(f);
    }
    out
}

/// Haar wavelet per attribute, composed by tensor product. Every attribute
/// must have a power-of-two bucket count.
pub fn wavelet_strategy(shape: &DomainShape) -> Result<Strategy> {
    if let Some(&d) = shape.dims().iter().find(|d| !d.is_power_of_two()) {
        return Err(Error::UnsupportedShape(format!(
            "wavelet strategy needs power-of-two dimensions, {shape} has {d}"
        )));
    }
    let factors: Vec<_> = shape.dims().iter().map(|&d| haar(d)).collect();
    Strategy::new(tensor(&factors), Provenance::Wavelet)
}

/// Node intervals `[lo, hi)` of a `fanout`-ary tree over `d` cells, breadth
/// first, root first. A node of length `len` splits into `fanout` parts whose
/// lengths differ by at most one, longer parts first.
fn tree_intervals(d: usize, fanout: usize) -> Vec<(usize, usize)> {
    let mut out = vec![(0, d)];
    let mut head = 0;
    while head < out.len() {
        let (lo, hi) = out[head];
        head += 1;
        let len = hi - lo;
        if len <= 1 {
            continue;
        }
        let parts = fanout.min(len);
        let (base, extra) = (len / parts, len % parts);
        let mut start = lo;
        for k in 0..parts {
            let width = base + usize::from(k < extra);
            out.push((start, start + width));
            start += width;
        }
    }
    out
}

fn hierarchy_matrix(d: usize, fanout: usize) -> DMatrix<f64> {
    let nodes = tree_intervals(d, fanout);
    let mut h = DMatrix::zeros(nodes.len(), d);
    for (r, &(lo, hi)) in nodes.iter().enumerate() {
        for j in lo..hi {
            h[(r, j)] = 1.0;
        }
    }
    h
}

/// Tree of interval counts per attribute (root = all cells, leaves = single
/// cells), composed by tensor product.
pub fn hierarchy_strategy(shape: &DomainShape, fanout: usize) -> Result<Strategy> {
    if fanout < 2 {
        return Err(Error::InvalidArgument(format!("fanout must be at least 2, got {fanout}")));
    }
    let factors: Vec<_> = shape.dims().iter().map(|&d| hierarchy_matrix(d, fanout)).collect();
    Strategy::new(tensor(&factors), Provenance::Hierarchical)
}

/// The workload itself as the strategy, for use with the matrix mechanism.
pub fn workload_strategy(w: &Workload) -> Result<Strategy> {
    Strategy::new(w.matrix().clone(), Provenance::Workload)
}

/// `m·‖W‖₂²`: squared error of answering `W` directly with the Gaussian
/// mechanism, without inference, at `P(ε, δ) = 1`.
pub fn gaussian_baseline_unit_p_squared(w: &Workload) -> f64 {
    w.m() as f64 * sensitivity_l2(w.matrix()).powi(2)
}

/// `√(m·P(ε,δ)·‖W‖₂²)`, comparable with the matrix-mechanism workload error.
pub fn gaussian_baseline_error(w: &Workload, pp: &PrivacyParams) -> f64 {
    (pp.p() * gaussian_baseline_unit_p_squared(w)).sqrt()
}
