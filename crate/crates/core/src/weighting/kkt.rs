//! First-order optimality certificate for a weighting solution, computed
//! from the problem and the returned weights alone.

use nalgebra::{DMatrix, DVector};

use super::nnls::nnls;
use super::{WeightingProblem, WeightingSolution};

#[derive(Debug, Clone)]
pub struct KktReport {
    /// `max(0, max_j (Bᵀu)_j − 1, max_i −u_i)`.
    pub primal_residual: f64,
    /// Support mismatch: some `u_i > 0` with `c_i = 0`, or `u_i = 0` with `c_i > 0`.
    pub support_ok: bool,
    /// `‖c/u² − Bμ‖₂ / ‖c/u²‖₂` for the best non-negative `μ` on the active constraints.
    pub stationarity_residual: f64,
    /// `max_j μ_j·|1 − (Bᵀu)_j|`, relative to the objective.
    pub complementarity: f64,
    /// `(f(u) − dual(μ)) / f(u)`.
    pub gap: f64,
    pub multipliers: Vec<f64>,
    pub active: Vec<usize>,
    pub tol: f64,
}

impl KktReport {
    pub fn primal_ok(&self) -> bool {
        self.support_ok && self.primal_residual <= self.tol
    }

    pub fn stationarity_ok(&self) -> bool {
        self.stationarity_residual <= self.tol
    }

    pub fn complementarity_ok(&self) -> bool {
        self.complementarity <= self.tol
    }

    pub fn gap_ok(&self) -> bool {
        self.gap <= self.tol
    }

    pub fn passed(&self) -> bool {
        self.primal_ok() && self.stationarity_ok() && self.complementarity_ok() && self.gap_ok()
    }
}

/// Checks feasibility, stationarity with non-negative multipliers on the
/// binding constraints, complementary slackness and the duality gap.
///
/// A constraint counts as binding when `|1 − (Bᵀu)_j| ≤ √tol`; violated
/// constraints never receive multipliers.
pub fn verify_kkt(prob: &WeightingProblem, sol: &WeightingSolution, tol: f64) -> KktReport {
    let u = &sol.u;
    let c = prob.costs();
    let b = prob.profile();
    let loads = prob.column_loads(u);

    let support_ok = u.len() == prob.p()
        && c.iter()
            .zip(u)
            .all(|(&ci, &ui)| (ci > 0.0) == (ui > 0.0));
    let primal_residual = loads
        .iter()
        .map(|l| l - 1.0)
        .chain(u.iter().map(|x| -x))
        .fold(0.0, f64::max);

    let objective = prob.objective(u);
    let band = tol.sqrt();
    let active: Vec<usize> = (0..prob.n())
        .filter(|&j| (1.0 - loads[j]).abs() <= band)
        .collect();

    let support: Vec<usize> = (0..prob.p()).filter(|&i| c[i] > 0.0 && u[i] > 0.0).collect();
    let target = DVector::from_iterator(support.len(), support.iter().map(|&i| c[i] / (u[i] * u[i])));
    let mut multipliers = vec![0.0; prob.n()];

    let stationarity_residual = if !support_ok || support.is_empty() {
        f64::INFINITY
    } else {
        let a: DMatrix<f64> = b.select_rows(&support).select_columns(&active);
        let mu = if active.is_empty() {
            DVector::zeros(0)
        } else {
            nnls(&a.tr_mul(&a), &a.tr_mul(&target))
        };
        for (k, &j) in active.iter().enumerate() {
            multipliers[j] = mu[k];
        }
        let fitted = if active.is_empty() {
            DVector::zeros(support.len())
        } else {
            &a * &mu
        };
        (fitted - &target).norm() / target.norm()
    };

    let complementarity = multipliers
        .iter()
        .zip(&loads)
        .map(|(m, l)| m * (1.0 - l).abs())
        .fold(0.0, f64::max)
        / objective;

    let gap = if objective.is_finite() {
        ((objective - prob.dual_value(&multipliers)) / objective).abs()
    } else {
        f64::INFINITY
    };

    KktReport {
        primal_residual,
        support_ok,
        stationarity_residual,
        complementarity,
        gap,
        multipliers,
        active,
        tol,
    }
}
