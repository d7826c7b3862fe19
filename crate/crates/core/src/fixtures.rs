//! A small worked instance: students partitioned by gender and gpa band.

use nalgebra::DMatrix;

use crate::domain::{Attribute, Buckets, CellConditions, Workload, WorkloadFamily};

/// gender ∈ {M, F} × gpa ∈ {[1,2), [2,3), [3,3.5), [3.5,4)}: eight cells,
/// males first.
pub fn student_cells() -> CellConditions {
    CellConditions::new(vec![
        Attribute {
            name: "gender".into(),
            buckets: Buckets::Categorical(vec![vec!["M".into()], vec!["F".into()]]),
        },
        Attribute {
            name: "gpa".into(),
            buckets: Buckets::from_edges(&[1.0, 2.0, 3.0, 3.5, 4.0]).unwrap(),
        },
    ])
    .unwrap()
}

#[rustfmt::skip]
const STUDENT_QUERIES: [f64; 64] = [
    1.,  1.,  1.,  1.,  1.,  1.,  1.,  1.,
    1.,  1.,  1.,  1.,  0.,  0.,  0.,  0.,
    0.,  0.,  0.,  0.,  1.,  1.,  1.,  1.,
    1.,  1.,  0.,  0.,  1.,  1.,  0.,  0.,
    0.,  0.,  1.,  1.,  0.,  0.,  1.,  1.,
    0.,  0.,  0.,  0.,  0.,  0.,  1.,  1.,
    1.,  1.,  0.,  0.,  0.,  0.,  0.,  0.,
    1.,  1.,  1.,  1., -1., -1., -1., -1.,
];

/// Eight queries over [`student_cells`]: the total, per-gender and per-gpa-half
/// counts, two cross counts and a gender difference. Rank 4, L2 sensitivity √5.
pub fn student_workload() -> Workload {
    let matrix = DMatrix::from_row_slice(8, 8, &STUDENT_QUERIES);
    let shape = student_cells().shape();
    Workload::new(matrix, shape, WorkloadFamily::Adhoc)
        .unwrap()
        .with_descriptions(
            [
                "all students",
                "gender = M",
                "gender = F",
                "gpa < 3.0",
                "gpa >= 3.0",
                "gender = F and gpa >= 3.0",
                "gender = M and gpa < 3.0",
                "count(M) - count(F)",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        )
        .unwrap()
}
