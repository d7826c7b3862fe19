//! Strategy selection by optimally weighting the eigen-queries of a workload.
//!
//! 1. Decompose `WᵀW = Qᵀ·diag(σ)·Q`; the rows of `Q` with `σ_i > 0` are the
//!    design queries and `σ_i` their costs.
//! 2. Solve the weighting program for squared weights `u`.
//! 3. `A′ = diag(√u)·Q`.
//! 4. Append diagonal rows raising every column norm of `A′` to the maximum
//!    (the sensitivity), which adds information at no privacy cost.

use nalgebra::DMatrix;

use crate::domain::Workload;
use crate::error::{Error, Result};
use crate::spectral::{eigendecompose, gram, SpectralDecomposition};
use crate::strategy::{Provenance, Strategy};
use crate::weighting::{optimize_weights, SolverOptions, WeightingProblem, WeightingSolution};

/// Weights below this are raised to it so that no eigen-query with a
/// nonzero eigenvalue drops out of the strategy.
pub const WEIGHT_FLOOR: f64 = 1e-12;

/// Columns whose squared norm is within this fraction of the maximum are
/// not completed.
const COMPLETION_TOL: f64 = 1e-10;

/// Everything computed along the way, for reporting and certification.
#[derive(Debug, Clone)]
pub struct EigenDesign {
    pub strategy: Strategy,
    /// `diag(√u)·Q` before column completion.
    pub weighted: Strategy,
    pub decomposition: SpectralDecomposition,
    pub problem: WeightingProblem,
    pub solution: WeightingSolution,
}

pub fn eigen_design(w: &Workload) -> Result<Strategy> {
    Ok(eigen_design_with(w, &SolverOptions::default())?.strategy)
}

pub fn eigen_design_with(w: &Workload, opts: &SolverOptions) -> Result<EigenDesign> {
    let decomposition = eigendecompose(&gram(w))?;
    eigen_design_from_decomposition(decomposition, opts)
}

pub fn eigen_design_from_decomposition(
    decomposition: SpectralDecomposition,
    opts: &SolverOptions,
) -> Result<EigenDesign> {
    let r = decomposition.rank;
    if r == 0 {
        return Err(Error::InvalidWorkload("workload is zero".into()));
    }
    let design = decomposition.leading_rows(r);
    let costs: Vec<f64> = decomposition.values.iter().take(r).copied().collect();
    let problem = WeightingProblem::from_design(&design, costs)?;
    let solution = optimize_weights(&problem, opts)?;
    let weighted = Strategy::new(weighted_rows(&design, &solution.u), Provenance::Eigen)?;
    let strategy = complete_columns(&weighted)?;
    Ok(EigenDesign {
        strategy,
        weighted,
        decomposition,
        problem,
        solution,
    })
}

/// `diag(√u)·design`, with zero weights floored at [`WEIGHT_FLOOR`].
pub(crate) fn weighted_rows(design: &DMatrix<f64>, u: &[f64]) -> DMatrix<f64> {
    let mut out = design.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= u[i].max(WEIGHT_FLOOR).sqrt();
    }
    out
}

/// Appends one diagonal row per column whose norm falls short of the
/// largest column norm `M`, with entry `√(M² − m_j²)`. Sensitivity is
/// unchanged and every column ends with norm `M`.
pub fn complete_columns(a: &Strategy) -> Result<Strategy> {
    let norms = a.column_norms();
    let top = norms.iter().copied().fold(0.0, f64::max);
    let deficits: Vec<(usize, f64)> = norms
        .iter()
        .enumerate()
        .map(|(j, &m)| (j, top * top - m * m))
        .filter(|&(_, d)| d > COMPLETION_TOL * top * top)
        .collect();
    if deficits.is_empty() {
        return Ok(a.clone());
    }
    let (p, n) = a.matrix().shape();
    let mut out = DMatrix::zeros(p + deficits.len(), n);
    out.rows_mut(0, p).copy_from(a.matrix());
    for (k, &(j, d)) in deficits.iter().enumerate() {
        out[(p + k, j)] = d.sqrt();
    }
    Strategy::new(out, a.provenance())
}
