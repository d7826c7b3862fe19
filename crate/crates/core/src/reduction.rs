//! Cheaper approximations of the eigen design for large domains.
//!
//! *Separation* splits the eigen-queries into contiguous groups (by
//! eigenvalue order), weights each group on its own and then solves a small
//! weighting program over one scale factor per group. *Principal vectors*
//! weights only the `kp` leading eigen-queries individually and gives all
//! others one shared weight.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Workload;
use crate::eigendesign::{complete_columns, eigen_design_from_decomposition, weighted_rows};
use crate::error::{Error, Result};
use crate::spectral::{eigendecompose, gram, SpectralDecomposition};
use crate::strategy::{Provenance, Strategy};
use crate::weighting::{optimize_weights, SolverOptions, WeightingProblem, WeightingSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReductionMode {
    #[default]
    Full,
    #[serde(alias = "sep")]
    Separation,
    Principal,
}

impl fmt::Display for ReductionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReductionMode::Full => "full",
            ReductionMode::Separation => "sep",
            ReductionMode::Principal => "principal",
        })
    }
}

impl FromStr for ReductionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ReductionMode::Full),
            "sep" | "separation" => Ok(ReductionMode::Separation),
            "principal" => Ok(ReductionMode::Principal),
            other => Err(Error::InvalidArgument(format!(
                "unknown reduction '{other}' (expected full, sep or principal)"
            ))),
        }
    }
}

/// Which design to compute. `None` sizes pick defaults from the rank:
/// `⌈r^{1/3}⌉` for groups and `⌈r/8⌉` principal vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReductionConfig {
    pub mode: ReductionMode,
    pub group_size: Option<usize>,
    pub principal_count: Option<usize>,
}

pub fn default_group_size(rank: usize) -> usize {
    ((rank as f64).cbrt().ceil() as usize).clamp(1, rank.max(1))
}

pub fn default_principal_count(rank: usize) -> usize {
    rank.div_ceil(8).max(1)
}

/// One solved weighting program, kept for certification.
#[derive(Debug, Clone)]
pub struct SolvedProgram {
    pub problem: WeightingProblem,
    pub solution: WeightingSolution,
}

#[derive(Debug, Clone)]
pub struct ReducedDesign {
    pub strategy: Strategy,
    /// Weighted eigen-queries before column completion.
    pub weighted: Strategy,
    /// Final squared weight of every eigen-query with a nonzero eigenvalue.
    pub u: Vec<f64>,
    pub programs: Vec<SolvedProgram>,
}

/// Dispatches on `cfg.mode`.
pub fn reduced_design(w: &Workload, cfg: &ReductionConfig, opts: &SolverOptions) -> Result<ReducedDesign> {
    let dec = eigendecompose(&gram(w))?;
    let r = dec.rank;
    match cfg.mode {
        ReductionMode::Full => {
            let d = eigen_design_from_decomposition(dec, opts)?;
            Ok(ReducedDesign {
                strategy: d.strategy,
                weighted: d.weighted,
                u: d.solution.u.clone(),
                programs: vec![SolvedProgram {
                    problem: d.problem,
                    solution: d.solution,
                }],
            })
        }
        ReductionMode::Separation => {
            let ng = cfg.group_size.unwrap_or_else(|| default_group_size(r));
            separation_from_decomposition(&dec, ng, opts)
        }
        ReductionMode::Principal => {
            let kp = cfg.principal_count.unwrap_or_else(|| default_principal_count(r));
            principal_from_decomposition(&dec, kp, opts)
        }
    }
}

pub fn eigen_separation(w: &Workload, group_size: usize) -> Result<Strategy> {
    let dec = eigendecompose(&gram(w))?;
    Ok(separation_from_decomposition(&dec, group_size, &SolverOptions::default())?.strategy)
}

pub fn principal_vectors(w: &Workload, principal_count: usize) -> Result<Strategy> {
    let dec = eigendecompose(&gram(w))?;
    Ok(principal_from_decomposition(&dec, principal_count, &SolverOptions::default())?.strategy)
}

fn nonzero_rank(dec: &SpectralDecomposition) -> Result<usize> {
    if dec.rank == 0 {
        return Err(Error::InvalidWorkload("workload is zero".into()));
    }
    Ok(dec.rank)
}

fn finish(design: &DMatrix<f64>, u: Vec<f64>, programs: Vec<SolvedProgram>) -> Result<ReducedDesign> {
    let weighted = Strategy::new(weighted_rows(design, &u), Provenance::Reduced)?;
    let strategy = complete_columns(&weighted)?;
    Ok(ReducedDesign {
        strategy,
        weighted,
        u,
        programs,
    })
}

pub fn separation_from_decomposition(
    dec: &SpectralDecomposition,
    group_size: usize,
    opts: &SolverOptions,
) -> Result<ReducedDesign> {
    let r = nonzero_rank(dec)?;
    if group_size == 0 || group_size > r {
        return Err(Error::InvalidArgument(format!(
            "group size must lie in 1..={r}, got {group_size}"
        )));
    }
    let design = dec.leading_rows(r);
    let sigma: Vec<f64> = dec.values.iter().take(r).copied().collect();
    let groups: Vec<(usize, usize)> = (0..r)
        .step_by(group_size)
        .map(|s| (s, (s + group_size).min(r)))
        .collect();

    let inner: Vec<Result<SolvedProgram>> = groups
        .par_iter()
        .map(|&(s, e)| {
            let problem =
                WeightingProblem::from_design(&design.rows(s, e - s).into_owned(), sigma[s..e].to_vec())?;
            let solution = optimize_weights(&problem, opts)?;
            Ok(SolvedProgram { problem, solution })
        })
        .collect();
    let inner: Vec<SolvedProgram> = inner.into_iter().collect::<Result<_>>()?;

    // One variable per group: cost is the group's objective at unit scale,
    // profile is the group's column loads.
    let n = design.ncols();
    let mut profile = DMatrix::zeros(groups.len(), n);
    let mut costs = Vec::with_capacity(groups.len());
    for (g, prog) in inner.iter().enumerate() {
        costs.push(prog.solution.objective);
        let loads = prog.problem.column_loads(&prog.solution.u);
        for (j, l) in loads.into_iter().enumerate() {
            profile[(g, j)] = l;
        }
    }
    let problem = WeightingProblem::from_profile(profile, costs)?;
    let solution = optimize_weights(&problem, opts)?;

    let mut u = vec![0.0; r];
    for (g, &(s, e)) in groups.iter().enumerate() {
        for i in s..e {
            u[i] = solution.u[g] * inner[g].solution.u[i - s];
        }
    }
    let mut programs = inner;
    programs.push(SolvedProgram { problem, solution });
    finish(&design, u, programs)
}

pub fn principal_from_decomposition(
    dec: &SpectralDecomposition,
    principal_count: usize,
    opts: &SolverOptions,
) -> Result<ReducedDesign> {
    let r = nonzero_rank(dec)?;
    let kp = principal_count;
    if kp == 0 || kp > r {
        return Err(Error::InvalidArgument(format!(
            "principal count must lie in 1..={r}, got {kp}"
        )));
    }
    let design = dec.leading_rows(r);
    let squares = design.component_mul(&design);
    let vars = if kp < r { kp + 1 } else { kp };
    let n = design.ncols();
    let mut profile = DMatrix::zeros(vars, n);
    profile.rows_mut(0, kp).copy_from(&squares.rows(0, kp));
    let mut costs: Vec<f64> = dec.values.iter().take(kp).copied().collect();
    if kp < r {
        let rest = squares.rows(kp, r - kp).row_sum();
        profile.row_mut(kp).copy_from(&rest);
        costs.push(dec.values.iter().skip(kp).take(r - kp).sum());
    }
    let problem = WeightingProblem::from_profile(profile, costs)?;
    let solution = optimize_weights(&problem, opts)?;

    let mut u = solution.u[..kp].to_vec();
    if kp < r {
        u.extend(std::iter::repeat_n(solution.u[kp], r - kp));
    }
    finish(&design, u, vec![SolvedProgram { problem, solution }])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::unit_p_squared;
    use crate::domain::{all_range_workload, k_way_subsets, marginal_workload, DomainShape};
    use crate::eigendesign::eigen_design;
    use crate::spectral::matrix_rank;

    fn ranges(n: usize) -> Workload {
        all_range_workload(&DomainShape::one_dim(n).unwrap())
    }

    #[test]
    fn single_group_matches_full() {
        let w = ranges(16);
        let full = unit_p_squared(&w, &eigen_design(&w).unwrap()).unwrap();
        let sep = unit_p_squared(&w, &eigen_separation(&w, 16).unwrap()).unwrap();
        assert!((sep / full - 1.0).abs() < 1e-5, "{sep} vs {full}");
    }

    #[test]
    fn singleton_groups_no_better_than_full() {
        let w = ranges(12);
        let full = unit_p_squared(&w, &eigen_design(&w).unwrap()).unwrap();
        let sep = unit_p_squared(&w, &eigen_separation(&w, 1).unwrap()).unwrap();
        assert!(sep >= full * (1.0 - 1e-5));
    }

    #[test]
    fn separation_close_to_full_on_ranges() {
        let w = ranges(64);
        let full = unit_p_squared(&w, &eigen_design(&w).unwrap()).unwrap();
        let sep = unit_p_squared(&w, &eigen_separation(&w, 4).unwrap()).unwrap();
        assert!(sep.sqrt() <= 1.15 * full.sqrt(), "{sep} vs {full}");
    }

    #[test]
    fn all_principal_matches_full() {
        let w = ranges(16);
        let full = unit_p_squared(&w, &eigen_design(&w).unwrap()).unwrap();
        let pv = unit_p_squared(&w, &principal_vectors(&w, 16).unwrap()).unwrap();
        assert!((pv / full - 1.0).abs() < 1e-5);
    }

    #[test]
    fn one_principal_still_answers() {
        let shape = DomainShape::new(vec![3, 3, 2]).unwrap();
        let w = marginal_workload(&shape, &k_way_subsets(3, 2), false).unwrap();
        let a = principal_vectors(&w, 1).unwrap();
        assert!(matrix_rank(a.matrix()).unwrap() >= matrix_rank(w.matrix()).unwrap());
        assert!(unit_p_squared(&w, &a).is_ok());
    }

    #[test]
    fn principal_on_marginals_near_full() {
        let shape = DomainShape::new(vec![4, 4, 4]).unwrap();
        let w = marginal_workload(&shape, &k_way_subsets(3, 2), false).unwrap();
        let r = matrix_rank(w.matrix()).unwrap();
        let full = unit_p_squared(&w, &eigen_design(&w).unwrap()).unwrap();
        let pv = unit_p_squared(&w, &principal_vectors(&w, r / 4).unwrap()).unwrap();
        assert!(pv.sqrt() <= 1.05 * full.sqrt(), "{pv} vs {full}");
    }

    #[test]
    fn weighted_sensitivity_is_one() {
        let w = ranges(20);
        let dec = eigendecompose(&gram(&w)).unwrap();
        let opts = SolverOptions::default();
        let s = separation_from_decomposition(&dec, 3, &opts).unwrap();
        assert!((s.weighted.sensitivity() - 1.0).abs() < 1e-8);
        let p = principal_from_decomposition(&dec, 5, &opts).unwrap();
        assert!((p.weighted.sensitivity() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn bad_sizes_rejected() {
        let w = ranges(8);
        assert!(eigen_separation(&w, 0).is_err());
        assert!(eigen_separation(&w, 9).is_err());
        assert!(principal_vectors(&w, 0).is_err());
        assert!(principal_vectors(&w, 9).is_err());
    }

    #[test]
    fn mode_names() {
        assert_eq!("sep".parse::<ReductionMode>().unwrap(), ReductionMode::Separation);
        assert_eq!(ReductionMode::Principal.to_string(), "principal");
        assert!("fast".parse::<ReductionMode>().is_err());
        assert_eq!(default_group_size(256), 7);
        assert_eq!(default_principal_count(256), 32);
    }
}
