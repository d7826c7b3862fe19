mod common;

use common::{max_column_norm, random_matrix, rng};
use eigenmech::analysis::unit_p_squared;
use eigenmech::domain::*;
use eigenmech::fixtures::student_workload;
use eigenmech::reduction::*;
use eigenmech::spectral::matrix_rank;
use eigenmech::weighting::SolverOptions;
use proptest::prelude::*;

fn design(w: &Workload, mode: ReductionMode, group_size: Option<usize>, principal_count: Option<usize>) -> ReducedDesign {
    let cfg = ReductionConfig {
        mode,
        group_size,
        principal_count,
    };
    reduced_design(w, &cfg, &SolverOptions::default()).unwrap()
}

fn check(w: &Workload) -> Result<(), TestCaseError> {
    let r = matrix_rank(w.matrix()).unwrap();
    let bound = common::svdb(w.matrix());
    let mut designs = vec![];
    for ng in [1, default_group_size(r), r] {
        designs.push(design(w, ReductionMode::Separation, Some(ng), None));
    }
    for kp in [1, r.div_ceil(2), r] {
        designs.push(design(w, ReductionMode::Principal, None, Some(kp)));
    }
    for d in &designs {
        prop_assert!(matrix_rank(d.strategy.matrix()).unwrap() >= r);
        prop_assert!((max_column_norm(d.weighted.matrix()) - 1.0).abs() <= 1e-8);
        let e = unit_p_squared(w, &d.strategy).unwrap();
        prop_assert!(e >= bound * (1.0 - 1e-9), "{} below bound {}", e, bound);
    }

    // Nested feasible sets order the optimized objective, which is the error
    // of the weighted queries before column completion.
    let err = |kp| unit_p_squared(w, &design(w, ReductionMode::Principal, None, Some(kp)).weighted).unwrap();
    let (all, half, one) = (err(r), err(r.div_ceil(2)), err(1));
    prop_assert!(all <= half * (1.0 + 1e-8), "kp=r {} > kp=r/2 {}", all, half);
    prop_assert!(half <= one * (1.0 + 1e-8), "kp=r/2 {} > kp=1 {}", half, one);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reductions_on_random_workloads(m in 1usize..24, n in 1usize..16, seed in any::<u64>()) {
        check(&Workload::from_matrix(random_matrix(m, n, &mut rng(seed))).unwrap())?;
    }
}

#[test]
fn reductions_on_structured_workloads() {
    let one = |n| DomainShape::one_dim(n).unwrap();
    let cases = vec![
        ("student", student_workload()),
        ("range32", all_range_workload(&one(32))),
        ("cdf16", cdf_workload(&one(16)).unwrap()),
        (
            "marg4x4x4",
            marginal_workload(&DomainShape::new(vec![4, 4, 4]).unwrap(), &k_way_subsets(3, 2), false).unwrap(),
        ),
        ("rand3x5", random_range_workload(&DomainShape::new(vec![3, 5]).unwrap(), 25, 4).unwrap()),
    ];
    for (name, w) in cases {
        check(&w).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
