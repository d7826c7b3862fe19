mod common;

use common::{random_matrix, rng};
use eigenmech::domain::{all_range_workload, DomainShape};
use eigenmech::spectral::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn random_psd(n: usize, rank: usize, seed: u64) -> DMatrix<f64> {
    let m = random_matrix(rank, n, &mut rng(seed));
    m.transpose() * m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reconstruction_orthogonality_and_trace(n in 1usize..80, frac in 0.1f64..1.0, seed in any::<u64>()) {
        let rank = ((n as f64 * frac).ceil() as usize).max(1);
        let s = random_psd(n, rank, seed);
        let d = eigendecompose(&s).unwrap();
        let scale = s.norm().max(1.0);
        prop_assert!((d.reconstruct() - &s).norm() <= 1e-8 * scale);
        let qqt = &d.q * d.q.transpose();
        prop_assert!((qqt - DMatrix::identity(n, n)).norm() <= 1e-8 * (n as f64).sqrt());
        prop_assert!((d.values.sum() - s.trace()).abs() <= 1e-9 * s.trace().abs().max(1.0));
        prop_assert!(d.values.as_slice().windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(d.rank, rank.min(n));
    }
}

#[test]
fn reconstruction_at_256() {
    let s = random_psd(256, 256, 3);
    let d = eigendecompose(&s).unwrap();
    assert!((d.reconstruct() - &s).norm() <= 1e-8 * s.norm());
}

#[test]
fn all_range_full_rank() {
    for n in 1..=64 {
        let w = all_range_workload(&DomainShape::one_dim(n).unwrap());
        assert_eq!(eigendecompose(&gram(&w)).unwrap().rank, n);
    }
}

#[test]
fn indefinite_input_rejected() {
    let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    assert!(matches!(eigendecompose(&s), Err(eigenmech::Error::NotPsd { .. })));
}
