//! Gaussian noise, L2 sensitivity and the matrix mechanism.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{DataVector, Workload};
use crate::error::{Error, Result};
use crate::spectral::{eigendecompose, gram_matrix};
use crate::strategy::Strategy;

/// The numerator in `ln(c/δ)` of the Gaussian noise calibration.
pub const DELTA_CALIBRATION: f64 = 2.0;

/// Relative Frobenius residual allowed when checking that a workload lies in
/// the row space of a strategy.
pub const ANSWERABILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    eps: f64,
    delta: f64,
}

impl PrivacyParams {
    pub fn new(eps: f64, delta: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidPrivacy(format!("eps must be positive, got {eps}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidPrivacy(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { eps, delta })
    }

    /// The ε for which `P(ε, δ) = 1`; analytic errors are then privacy-free.
    pub fn unit(delta: f64) -> Result<Self> {
        let eps = (2.0 * (DELTA_CALIBRATION / delta).ln()).sqrt();
        Self::new(eps, delta)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn calibration_constant(&self) -> f64 {
        DELTA_CALIBRATION
    }

    /// `√(2·ln(2/δ))/ε`: noise scale per unit of sensitivity.
    pub fn noise_multiplier(&self) -> f64 {
        (2.0 * (DELTA_CALIBRATION / self.delta).ln()).sqrt() / self.eps
    }

    /// `P(ε, δ) = 2·ln(2/δ)/ε²`.
    pub fn p(&self) -> f64 {
        self.noise_multiplier().powi(2)
    }

    /// Gaussian scale for a query matrix of the given L2 sensitivity.
    pub fn sigma(&self, sensitivity: f64) -> f64 {
        sensitivity * self.noise_multiplier()
    }
}

/// Maximum column L2 norm: the largest change of `A·x` when one count
/// changes by one.
pub fn sensitivity_l2(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Generator for trial `trial` of a run seeded with `seed`. Each trial gets
/// its own ChaCha stream, so trials can be evaluated in any order.
pub fn noise_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn gaussian_vector(len: usize, sigma: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(len, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        sigma * z
    })
}

/// `W·x + Normal(σ)^m` with `σ = ‖W‖₂·√(2 ln(2/δ))/ε`.
pub fn gaussian_mechanism(
    w: &DMatrix<f64>,
    x: &DVector<f64>,
    pp: &PrivacyParams,
    seed: u64,
) -> Result<DVector<f64>> {
    if w.ncols() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "query matrix has {} columns, data vector has {} cells",
            w.ncols(),
            x.len()
        )));
    }
    let sigma = pp.sigma(sensitivity_l2(w));
    let mut rng = noise_rng(seed, 0);
    Ok(w * x + gaussian_vector(w.nrows(), sigma, &mut rng))
}

/// Least-squares inverse of a strategy through the spectral decomposition
/// of `AᵀA`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    /// `A⁺ = (AᵀA)⁺Aᵀ`, n×p.
    pinv: DMatrix<f64>,
    /// `(AᵀA)⁺`, n×n.
    normal_pinv: DMatrix<f64>,
    /// Orthonormal rows spanning the null space of `A`.
    null_rows: DMatrix<f64>,
    rank: usize,
}

impl LeastSquares {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let dec = eigendecompose(&gram_matrix(a))?;
        let normal_pinv = dec.pinv();
        let pinv = &normal_pinv * a.transpose();
        Ok(Self {
            pinv,
            normal_pinv,
            null_rows: dec.null_rows(),
            rank: dec.rank,
        })
    }

    pub fn pinv(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    pub fn normal_pinv(&self) -> &DMatrix<f64> {
        &self.normal_pinv
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn estimate(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.pinv * y
    }

    /// `‖W − W·A⁺A‖_F / ‖W‖_F`, i.e. the share of `W` outside the row space of `A`.
    pub fn answerability_residual(&self, w: &DMatrix<f64>) -> f64 {
        let total = w.norm();
        if total == 0.0 || self.null_rows.nrows() == 0 {
            return 0.0;
        }
        (w * self.null_rows.transpose()).norm() / total
    }
}

/// `x̂ = A⁺y`, minimizing `‖A·x̂ − y‖₂` (minimum-norm when `A` is rank deficient).
pub fn least_squares_estimate(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "strategy has {} rows, answer vector has {} entries",
            a.nrows(),
            y.len()
        )));
    }
    Ok(LeastSquares::new(a)?.estimate(y))
}

#[derive(Debug, Clone)]
pub struct MechanismOutput {
    pub answers: DVector<f64>,
    pub xhat: DVector<f64>,
    pub seed: u64,
}

/// A workload/strategy pair checked for answerability, with the strategy's
/// pseudo-inverse cached for repeated runs.
#[derive(Debug, Clone)]
pub struct MatrixMechanism {
    workload: DMatrix<f64>,
    strategy: DMatrix<f64>,
    sensitivity: f64,
    lsq: LeastSquares,
}

impl MatrixMechanism {
    pub fn new(workload: &Workload, strategy: &Strategy) -> Result<Self> {
        Self::from_matrices(workload.matrix(), strategy.matrix())
    }

    pub fn from_matrices(w: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<Self> {
        if w.ncols() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "workload has {} cells, strategy has {}",
                w.ncols(),
                a.ncols()
            )));
        }
        let lsq = LeastSquares::new(a)?;
        let residual = lsq.answerability_residual(w);
        if residual > ANSWERABILITY_TOL {
            return Err(Error::NotAnswerable {
                residual,
                tolerance: ANSWERABILITY_TOL,
            });
        }
        Ok(Self {
            workload: w.clone(),
            strategy: a.clone(),
            sensitivity: sensitivity_l2(a),
            lsq,
        })
    }

    pub fn least_squares(&self) -> &LeastSquares {
        &self.lsq
    }

    pub fn workload(&self) -> &DMatrix<f64> {
        &self.workload
    }

    pub fn strategy(&self) -> &DMatrix<f64> {
        &self.strategy
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    /// Measures the strategy with Gaussian noise, estimates the cells by
    /// least squares and answers the workload from that estimate.
    pub fn run(&self, x: &DVector<f64>, pp: &PrivacyParams, seed: u64) -> Result<MechanismOutput> {
        self.run_trial(x, pp, seed, 0)
    }

    pub fn run_trial(
        &self,
        x: &DVector<f64>,
        pp: &PrivacyParams,
        seed: u64,
        trial: u64,
    ) -> Result<MechanismOutput> {
        if x.len() != self.strategy.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "data vector has {} cells, strategy has {}",
                x.len(),
                self.strategy.ncols()
            )));
        }
        let mut rng = noise_rng(seed, trial);
        let noise = gaussian_vector(self.strategy.nrows(), pp.sigma(self.sensitivity), &mut rng);
        let y = &self.strategy * x + noise;
        let xhat = self.lsq.estimate(&y);
        let answers = &self.workload * &xhat;
        Ok(MechanismOutput {
            answers,
            xhat,
            seed,
        })
    }
}

pub fn matrix_mechanism(
    w: &Workload,
    a: &Strategy,
    x: &DataVector,
    pp: &PrivacyParams,
    seed: u64,
) -> Result<MechanismOutput> {
    MatrixMechanism::new(w, a)?.run(&x.to_dvector(), pp, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::student_workload;

    #[test]
    fn privacy_params_validate() {
        assert!(PrivacyParams::new(0.0, 1e-4).is_err());
        assert!(PrivacyParams::new(1.0, 0.0).is_err());
        assert!(PrivacyParams::new(1.0, 1.0).is_err());
        let pp = PrivacyParams::new(0.5, 1e-4).unwrap();
        let expect = 2.0 * (2.0f64 / 1e-4).ln() / 0.25;
        assert!((pp.p() - expect).abs() < 1e-9);
        assert!((PrivacyParams::unit(1e-4).unwrap().p() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sensitivities() {
        assert!((sensitivity_l2(student_workload().matrix()) - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(sensitivity_l2(&DMatrix::identity(4, 4)), 1.0);
    }

    #[test]
    fn gaussian_is_seeded() {
        let w = DMatrix::identity(3, 3);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let pp = PrivacyParams::new(1.0, 1e-3).unwrap();
        let a = gaussian_mechanism(&w, &x, &pp, 9).unwrap();
        let b = gaussian_mechanism(&w, &x, &pp, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gaussian_mechanism(&w, &x, &pp, 10).unwrap());
        assert!(gaussian_mechanism(&w, &DVector::zeros(2), &pp, 9).is_err());
    }

    #[test]
    fn vanishing_noise() {
        let w = student_workload();
        let x = DVector::from_vec(vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0]);
        let pp = PrivacyParams::new(1e9, 1e-4).unwrap();
        let out = gaussian_mechanism(w.matrix(), &x, &pp, 1).unwrap();
        assert!((out - w.matrix() * &x).amax() < 1e-6);
    }

    #[test]
    fn duplicate_measurement_averages() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let x = least_squares_estimate(&a, &DVector::from_vec(vec![3.0, 5.0])).unwrap();
        assert!((x[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_by_normal_equations() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let y = DVector::from_vec(vec![1.0, 1.0, 3.0]);
        let x = least_squares_estimate(&a, &y).unwrap();
        assert!((x[0] - 4.0 / 3.0).abs() < 1e-12 && (x[1] - 4.0 / 3.0).abs() < 1e-12);
        let normal = a.transpose() * (&a * &x - &y);
        assert!(normal.norm() <= 1e-8 * (a.transpose() * &y).norm());
    }

    #[test]
    fn orthogonal_inverse_is_transpose() {
        let s = 0.5f64.sqrt();
        let a = DMatrix::from_row_slice(2, 2, &[s, s, s, -s]);
        let y = DVector::from_vec(vec![0.3, -1.7]);
        let x = least_squares_estimate(&a, &y).unwrap();
        assert!((x - a.transpose() * &y).norm() < 1e-12);
    }

    #[test]
    fn identity_strategy_noise_free() {
        let w = student_workload();
        let a = Strategy::new(DMatrix::identity(8, 8), crate::strategy::Provenance::Identity).unwrap();
        let x = DataVector::new(vec![2, 0, 0, 0, 0, 0, 0, 1]);
        let pp = PrivacyParams::new(1e9, 1e-4).unwrap();
        let out = matrix_mechanism(&w, &a, &x, &pp, 5).unwrap();
        let truth = w.matrix() * x.to_dvector();
        assert!((&out.answers - truth).amax() < 1e-6);
        assert_eq!(out.answers, w.matrix() * &out.xhat);
    }

    #[test]
    fn unanswerable_workload_rejected() {
        let w = Workload::from_matrix(DMatrix::identity(2, 2)).unwrap();
        let a = Strategy::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            crate::strategy::Provenance::Workload,
        )
        .unwrap();
        assert!(matches!(
            MatrixMechanism::new(&w, &a),
            Err(Error::NotAnswerable { .. })
        ));
    }
}
