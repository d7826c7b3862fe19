//! Optimal weighting of a fixed set of design queries.
//!
//! Given design queries `q_1..q_p` (rows of a p×n matrix) and costs
//! `c_i ≥ 0`, choose squared weights `u_i ≥ 0` minimizing `Σ c_i / u_i`
//! subject to every column of the weighted design having squared L2 norm at
//! most one:
//!
//! ```text
//! minimize    Σ_{c_i > 0} c_i / u_i
//! subject to  Σ_i u_i · q_ij² ≤ 1     for every column j
//!             u ≥ 0
//! ```
//!
//! This is the semidefinite weighting program with its 2×2 blocks
//! `[[u_i, 1], [1, v_i]] ⪰ 0` eliminated (`v_i = 1/u_i` at any optimum).
//! The strategy `diag(√u)·Q` then has workload error proportional to the
//! square root of the objective.
//!
//! The solver generalizes the squared design entries to an arbitrary
//! non-negative *sensitivity profile* `B` (p×n), which the reductions use
//! for aggregated design blocks.

mod ipm;
mod kkt;
mod nnls;

use std::io::Write;

use nalgebra::DMatrix;

use crate::domain::Workload;
use crate::error::{Error, Result};
use crate::spectral::{eigendecompose, gram_matrix, RANK_TOL};

pub use kkt::{verify_kkt, KktReport};

/// Inputs of one weighting program.
#[derive(Debug, Clone)]
pub struct WeightingProblem {
    costs: Vec<f64>,
    profile: DMatrix<f64>,
}

impl WeightingProblem {
    /// Profile `design ∘ design` for explicit design queries.
    pub fn from_design(design: &DMatrix<f64>, costs: Vec<f64>) -> Result<Self> {
        Self::from_profile(design.component_mul(design), costs)
    }

    /// `profile[(i, j)]` is the squared contribution of design query `i` at
    /// unit weight to the norm of column `j`.
    pub fn from_profile(profile: DMatrix<f64>, costs: Vec<f64>) -> Result<Self> {
        let p = profile.nrows();
        if p == 0 {
            return Err(Error::Degenerate("no design queries".into()));
        }
        if costs.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{} costs for {p} design queries",
                costs.len()
            )));
        }
        if let Some(c) = costs.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::InvalidArgument(format!("cost {c} is not a finite non-negative value")));
        }
        if profile.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::InvalidArgument(
                "sensitivity profile must be finite and non-negative".into(),
            ));
        }
        for i in 0..p {
            if costs[i] > 0.0 && profile.row(i).iter().all(|&b| b == 0.0) {
                return Err(Error::Degenerate(format!(
                    "design query {i} has positive cost but no sensitivity; the objective is unbounded below"
                )));
            }
        }
        Ok(Self { costs, profile })
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn profile(&self) -> &DMatrix<f64> {
        &self.profile
    }

    pub fn p(&self) -> usize {
        self.costs.len()
    }

    /// Number of sensitivity constraints (cells).
    pub fn n(&self) -> usize {
        self.profile.ncols()
    }

    /// `Σ c_i/u_i` over positive costs; infinite if such a `u_i` is not positive.
    pub fn objective(&self, u: &[f64]) -> f64 {
        self.costs
            .iter()
            .zip(u)
            .filter(|(c, _)| **c > 0.0)
            .map(|(c, &x)| if x > 0.0 { c / x } else { f64::INFINITY })
            .sum()
    }

    /// Squared column norms `Bᵀu` of the weighted design.
    pub fn column_loads(&self, u: &[f64]) -> Vec<f64> {
        let mut loads = vec![0.0; self.n()];
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0.0 {
                continue;
            }
            for (j, l) in loads.iter_mut().enumerate() {
                *l += ui * self.profile[(i, j)];
            }
        }
        loads
    }

    /// Lagrangian dual `Σ 2√(c_i·(Bμ)_i) − Σ μ_j`, a lower bound on the
    /// optimum for any `μ ≥ 0`.
    pub fn dual_value(&self, mu: &[f64]) -> f64 {
        let mut bmu = vec![0.0; self.p()];
        for (i, b) in bmu.iter_mut().enumerate() {
            *b = (0..self.n()).map(|j| self.profile[(i, j)] * mu[j]).sum();
        }
        let lagrangian: f64 = self
            .costs
            .iter()
            .zip(&bmu)
            .map(|(&c, &b)| 2.0 * (c * b.max(0.0)).sqrt())
            .sum();
        lagrangian - mu.iter().sum::<f64>()
    }

    /// Same problem with rows listed in `order`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            costs: order.iter().map(|&i| self.costs[i]).collect(),
            profile: self.profile.select_rows(order),
        }
    }

    /// Writes `(c, B, u, μ, gap)` as CSV: one line per design query with its
    /// cost, weight and profile row, followed by a multiplier line and a gap
    /// line.
    pub fn dump_csv<W: Write>(&self, sol: &WeightingSolution, mut out: W) -> Result<()> {
        write!(out, "kind,index,value,u")?;
        for j in 0..self.n() {
            write!(out, ",b{j}")?;
        }
        writeln!(out)?;
        for i in 0..self.p() {
            write!(out, "design,{i},{:e},{:e}", self.costs[i], sol.u[i])?;
            for j in 0..self.n() {
                write!(out, ",{:e}", self.profile[(i, j)])?;
            }
            writeln!(out)?;
        }
        for (j, m) in sol.multipliers.iter().enumerate() {
            writeln!(out, "multiplier,{j},{m:e},")?;
        }
        writeln!(out, "gap,0,{:e},", sol.gap)?;
        Ok(())
    }
}

/// Solver settings. The relative gap is certified by the Lagrangian dual.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-6,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WeightingSolution {
    /// Squared weights; exactly zero where the cost is zero.
    pub u: Vec<f64>,
    pub objective: f64,
    /// Certified relative optimality gap.
    pub gap: f64,
    /// Multipliers of the column constraints at the returned point.
    pub multipliers: Vec<f64>,
    /// Column constraints within `gap_tol` of binding.
    pub active: Vec<usize>,
    pub iterations: usize,
}

impl WeightingSolution {
    pub fn weights(&self) -> Vec<f64> {
        self.u.iter().map(|u| u.sqrt()).collect()
    }
}

/// Minimizes `Σ c_i/u_i` under the column-norm constraints.
///
/// Zero-cost design queries are removed before solving and get `u_i = 0`.
/// Fails with [`Error::Degenerate`] if every cost is zero and with
/// [`Error::NotConverged`] (carrying the best feasible iterate) if the gap
/// target is not reached.
pub fn optimize_weights(prob: &WeightingProblem, opts: &SolverOptions) -> Result<WeightingSolution> {
    let keep: Vec<usize> = (0..prob.p()).filter(|&i| prob.costs[i] > 0.0).collect();
    if keep.is_empty() {
        return Err(Error::Degenerate("every design cost is zero".into()));
    }
    let cols: Vec<usize> = (0..prob.n())
        .filter(|&j| keep.iter().any(|&i| prob.profile[(i, j)] > 0.0))
        .collect();
    let scale = keep.iter().map(|&i| prob.costs[i]).fold(0.0, f64::max);
    let costs: Vec<f64> = keep.iter().map(|&i| prob.costs[i] / scale).collect();
    let profile = prob.profile.select_rows(&keep).select_columns(&cols);

    let reduced = ipm::solve(&costs, &profile, opts);
    let (u_red, mu_red, iterations, converged) = match reduced {
        Ok(r) => (r.u, r.mu, r.iterations, true),
        Err(r) => (r.u, r.mu, r.iterations, false),
    };

    let mut u = vec![0.0; prob.p()];
    for (k, &i) in keep.iter().enumerate() {
        u[i] = u_red[k];
    }
    let mut multipliers = vec![0.0; prob.n()];
    for (k, &j) in cols.iter().enumerate() {
        multipliers[j] = mu_red[k] * scale;
    }
    let objective = prob.objective(&u);
    let gap = ((objective - prob.dual_value(&multipliers)) / objective).max(0.0);
    if !converged {
        return Err(Error::NotConverged {
            iterations,
            gap,
            best: u,
        });
    }
    let loads = prob.column_loads(&u);
    let active = loads
        .iter()
        .enumerate()
        .filter(|(_, &l)| l >= 1.0 - opts.gap_tol.max(1e-9))
        .map(|(j, _)| j)
        .collect();
    Ok(WeightingSolution {
        u,
        objective,
        gap,
        multipliers,
        active,
        iterations,
    })
}

/// `c_i = ‖column i of W·Q⁺‖²` for design queries `Q` (p×n, full row rank).
pub fn design_costs(w: &Workload, design: &DMatrix<f64>) -> Result<Vec<f64>> {
    design_costs_from_gram(&gram_matrix(w.matrix()), design)
}

/// As [`design_costs`], from the workload Gram matrix `WᵀW`.
pub fn design_costs_from_gram(gram: &DMatrix<f64>, design: &DMatrix<f64>) -> Result<Vec<f64>> {
    if design.ncols() != gram.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} columns, workload has {} cells",
            design.ncols(),
            gram.nrows()
        )));
    }
    let p = design.nrows();
    let outer = design * design.transpose();
    let dec = eigendecompose(&outer)?;
    if dec.rank(RANK_TOL) < p {
        return Err(Error::RankDeficient(format!(
            "{p} design queries span only {} dimensions",
            dec.rank(RANK_TOL)
        )));
    }
    // Q⁺ = Qᵀ(QQᵀ)⁻¹; c = diag(Q⁺ᵀ·WᵀW·Q⁺).
    let pinv = design.transpose() * dec.pinv();
    let gp = gram * &pinv;
    Ok((0..p)
        .map(|i| pinv.column(i).dot(&gp.column(i)).max(0.0))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{eigendecompose, gram_matrix};

    fn golden() -> (DMatrix<f64>, Vec<f64>) {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        let d = eigendecompose(&gram_matrix(&w)).unwrap();
        (d.q.clone(), d.values.iter().copied().collect())
    }

    #[test]
    fn identity_costs() {
        let w = Workload::from_matrix(DMatrix::identity(3, 3)).unwrap();
        let c = design_costs(&w, &DMatrix::identity(3, 3)).unwrap();
        assert!(c.iter().all(|&x| (x - 1.0).abs() < 1e-14));
        let w = Workload::from_matrix(DMatrix::identity(3, 3) * 2.0).unwrap();
        let c = design_costs(&w, &DMatrix::identity(3, 3)).unwrap();
        assert!(c.iter().all(|&x| (x - 4.0).abs() < 1e-13));
    }

    #[test]
    fn eigen_design_costs_are_eigenvalues() {
        let w = Workload::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0])).unwrap();
        let (q, sigma) = golden();
        let c = design_costs(&w, &q).unwrap();
        for (a, b) in c.iter().zip(&sigma) {
            assert!((a - b).abs() <= 1e-8 * b);
        }
    }

    #[test]
    fn rank_deficient_design_rejected() {
        let w = Workload::from_matrix(DMatrix::identity(2, 2)).unwrap();
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        assert!(matches!(design_costs(&w, &q), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn identity_instance() {
        let prob = WeightingProblem::from_design(&DMatrix::identity(5, 5), vec![1.0; 5]).unwrap();
        let sol = optimize_weights(&prob, &SolverOptions::default()).unwrap();
        for &u in &sol.u {
            assert!((u - 1.0).abs() < 1e-5, "{u}");
        }
        assert!((sol.objective - 5.0).abs() < 5e-5);
        assert!(sol.gap <= 1e-6);
    }

    #[test]
    fn two_variable_instance() {
        let (q, sigma) = golden();
        let prob = WeightingProblem::from_design(&q, sigma).unwrap();
        let sol = optimize_weights(&prob, &SolverOptions::default()).unwrap();
        assert!((sol.u[0] - 1.118).abs() < 1e-3, "{:?}", sol.u);
        assert!((sol.u[1] - 0.691).abs() < 1e-3, "{:?}", sol.u);
        assert!((sol.objective - 2.895).abs() < 1e-3);
        assert_eq!(sol.active, vec![0]);
    }

    #[test]
    fn cost_scaling_keeps_argmin() {
        let (q, sigma) = golden();
        let base = optimize_weights(
            &WeightingProblem::from_design(&q, sigma.clone()).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        let scaled = optimize_weights(
            &WeightingProblem::from_design(&q, sigma.iter().map(|c| c * 37.0).collect()).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        for (a, b) in base.u.iter().zip(&scaled.u) {
            assert!((a - b).abs() < 1e-5);
        }
        assert!((scaled.objective / base.objective - 37.0).abs() < 1e-4);
    }

    #[test]
    fn zero_costs_are_fixed_at_zero() {
        let prob =
            WeightingProblem::from_design(&DMatrix::identity(3, 3), vec![2.0, 0.0, 1.0]).unwrap();
        let sol = optimize_weights(&prob, &SolverOptions::default()).unwrap();
        assert_eq!(sol.u[1], 0.0);
        assert!((sol.u[0] - 1.0).abs() < 1e-5 && (sol.u[2] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn all_zero_costs_rejected() {
        let prob = WeightingProblem::from_design(&DMatrix::identity(2, 2), vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            optimize_weights(&prob, &SolverOptions::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn unbounded_row_rejected() {
        let profile = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(WeightingProblem::from_profile(profile, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn dump_has_one_line_per_design_query() {
        let prob = WeightingProblem::from_design(&DMatrix::identity(2, 2), vec![1.0, 1.0]).unwrap();
        let sol = optimize_weights(&prob, &SolverOptions::default()).unwrap();
        let mut buf = Vec::new();
        prob.dump_csv(&sol, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("design,")).count(), 2);
        assert!(text.lines().last().unwrap().starts_with("gap,"));
    }
}
