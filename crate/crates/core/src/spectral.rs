//! Gram matrices and symmetric eigen-decomposition with a fixed ordering.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::domain::Workload;
use crate::error::{Error, Result};

/// Relative threshold below which an eigenvalue counts as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Negative eigenvalues down to `-PSD_TOL * σ_1` are rounding noise.
pub const PSD_TOL: f64 = 1e-8;

/// `S = Qᵀ·diag(values)·Q` with eigenvalues sorted non-increasing and the
/// eigenvectors stored as the rows of `q`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub q: DMatrix<f64>,
    pub values: DVector<f64>,
    pub rank: usize,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn largest(&self) -> f64 {
        self.values.get(0).copied().unwrap_or(0.0)
    }

    /// Number of eigenvalues above `rel_tol·σ_1`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let top = self.largest();
        if top <= 0.0 {
            return 0;
        }
        self.values.iter().filter(|&&s| s > rel_tol * top).count()
    }

    /// The first `r` eigen-queries (rows of `q`).
    pub fn leading_rows(&self, r: usize) -> DMatrix<f64> {
        self.q.rows(0, r).into_owned()
    }

    /// Moore–Penrose inverse, dropping eigenvalues at or below the rank cut.
    pub fn pinv(&self) -> DMatrix<f64> {
        let n = self.n();
        let r = self.rank;
        let mut scaled = self.q.rows(0, r).into_owned();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row /= self.values[i];
        }
        let mut out = DMatrix::zeros(n, n);
        out.gemm_tr(1.0, &self.q.rows(0, r), &scaled, 0.0);
        out
    }

    /// Rows of `q` spanning the numerical null space.
    pub fn null_rows(&self) -> DMatrix<f64> {
        self.q.rows(self.rank, self.n() - self.rank).into_owned()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.q.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= self.values[i];
        }
        self.q.transpose() * scaled
    }
}

/// `MᵀM`, symmetrized.
pub fn gram_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    let g = m.transpose() * m;
    symmetrize(g)
}

pub fn gram(w: &Workload) -> DMatrix<f64> {
    gram_matrix(w.matrix())
}

pub(crate) fn symmetrize(mut s: DMatrix<f64>) -> DMatrix<f64> {
    let n = s.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = avg;
            s[(j, i)] = avg;
        }
    }
    s
}

/// Eigen-decomposition of a symmetric positive semidefinite matrix.
///
/// Eigenvalues are sorted non-increasing (ties keep the solver's order),
/// small negative values are clamped to zero, and each eigenvector is
/// signed so that its largest-magnitude entry is positive.
pub fn eigendecompose(s: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecompose needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let n = s.nrows();
    if n == 0 {
        return Ok(SpectralDecomposition {
            q: DMatrix::zeros(0, 0),
            values: DVector::zeros(0),
            rank: 0,
        });
    }
    let eig = SymmetricEigen::new(symmetrize(s.clone()));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let top = eig.eigenvalues[order[0]];
    let tolerance = PSD_TOL * top.max(0.0);
    let bottom = eig.eigenvalues[order[n - 1]];
    if bottom < -tolerance || (top <= 0.0 && bottom < 0.0) {
        return Err(Error::NotPsd {
            eigenvalue: bottom,
            tolerance,
        });
    }

    let mut q = DMatrix::zeros(n, n);
    let mut values = DVector::zeros(n);
    for (row, &k) in order.iter().enumerate() {
        values[row] = eig.eigenvalues[k].max(0.0);
        let v = eig.eigenvectors.column(k);
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() + 1e-12 { x } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            q[(row, j)] = sign * v[j];
        }
    }
    let mut out = SpectralDecomposition { q, values, rank: 0 };
    out.rank = out.rank(RANK_TOL);
    Ok(out)
}

/// Numerical rank of `m` via its Gram matrix.
pub fn matrix_rank(m: &DMatrix<f64>) -> Result<usize> {
    Ok(eigendecompose(&gram_matrix(m))?.rank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{all_range_workload, marginal_workload, DomainShape};
    use crate::fixtures::student_workload;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, v)
    }

    #[test]
    fn gram_by_hand() {
        assert_eq!(gram_matrix(&DMatrix::identity(2, 2)), DMatrix::identity(2, 2));
        let g = gram_matrix(&m(2, 2, &[1.0, 1.0, 1.0, 0.0]));
        assert_eq!(g, m(2, 2, &[2.0, 1.0, 1.0, 1.0]));
    }

    #[test]
    fn identity_decomposes_to_identity() {
        let d = eigendecompose(&DMatrix::identity(4, 4)).unwrap();
        assert_eq!(d.q, DMatrix::identity(4, 4));
        assert!(d.values.iter().all(|&v| v == 1.0));
        assert_eq!(d.rank, 4);
    }

    #[test]
    fn two_by_two_golden_ratio() {
        let d = eigendecompose(&m(2, 2, &[2.0, 1.0, 1.0, 1.0])).unwrap();
        let s5 = 5f64.sqrt();
        assert!((d.values[0] - (3.0 + s5) / 2.0).abs() < 1e-12);
        assert!((d.values[1] - (3.0 - s5) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_orders_rows() {
        let d = eigendecompose(&m(2, 2, &[1.0, 0.0, 0.0, 4.0])).unwrap();
        assert_eq!(d.values.as_slice(), &[4.0, 1.0]);
        assert_eq!(d.q, m(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let d = eigendecompose(&m(2, 2, &[4.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(d.q, DMatrix::identity(2, 2));
    }

    #[test]
    fn negative_matrix_rejected() {
        let err = eigendecompose(&m(2, 2, &[1.0, 0.0, 0.0, -1.0])).unwrap_err();
        assert!(matches!(err, Error::NotPsd { .. }));
    }

    #[test]
    fn ranks() {
        assert_eq!(eigendecompose(&gram(&student_workload())).unwrap().rank, 4);
        let shape = DomainShape::new(vec![2, 2]).unwrap();
        let w = marginal_workload(&shape, &[vec![0], vec![1]], false).unwrap();
        assert_eq!(eigendecompose(&gram(&w)).unwrap().rank, 3);
        for n in [1, 7, 32, 64] {
            let w = all_range_workload(&DomainShape::one_dim(n).unwrap());
            assert_eq!(eigendecompose(&gram(&w)).unwrap().rank, n);
        }
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let d = eigendecompose(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(d.rank, 0);
    }

    #[test]
    fn pinv_of_rank_one() {
        // [[1,1],[1,1]] has pseudo-inverse [[1,1],[1,1]]/4.
        let d = eigendecompose(&m(2, 2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
        assert_eq!(d.rank, 1);
        let p = d.pinv();
        for v in p.iter() {
            assert!((v - 0.25).abs() < 1e-14);
        }
    }
}
