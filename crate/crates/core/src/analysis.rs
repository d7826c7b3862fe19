//! Analytic and empirical error of the matrix mechanism.
//!
//! The workload error of strategy `A` on workload `W` is
//!
//! ```text
//! Error_A(W) = ‖A‖₂ · √(P(ε,δ) · trace(WᵀW·(AᵀA)⁺))
//! ```
//!
//! i.e. the root of the *summed* expected squared error over all queries.
//! [`ErrorReport::rms_error`] divides by `m` inside the root to give the
//! per-query root mean square. The spectral lower bound over all strategies
//! is `√(P·svdb(W))` with `svdb(W) = (Σ √σ_i)² / n` over the eigenvalues of
//! `WᵀW`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{DataVector, Workload};
use crate::error::{Error, Result};
use crate::mechanism::{LeastSquares, MatrixMechanism, PrivacyParams, ANSWERABILITY_TOL};
use crate::spectral::{eigendecompose, gram};
use crate::strategy::Strategy;

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub m: usize,
    pub n: usize,
    pub p_constant: f64,
    /// `‖A‖₂²·trace(WᵀW(AᵀA)⁺)`: squared workload error at `P = 1`.
    pub unit_p_squared: f64,
    pub workload_error: f64,
    /// Root mean square error per query at (ε, δ).
    pub per_query: Vec<f64>,
    pub svdb: f64,
    pub lower_bound: f64,
    pub ratio_to_bound: f64,
    pub thm3_cap: f64,
}

impl ErrorReport {
    /// `√(Σ_q Error(q)² / m)`.
    pub fn rms_error(&self) -> f64 {
        self.workload_error / (self.m as f64).sqrt()
    }

    pub fn unit_p_error(&self) -> f64 {
        self.unit_p_squared.sqrt()
    }

    /// `key = value` lines in a fixed order; the per-query vector is omitted.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.scalar_fields() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn csv_header() -> &'static str {
        "m,n,p_constant,unit_p_squared,workload_error,rms_error,svdb,lower_bound,ratio_to_bound,thm3_cap"
    }

    pub fn csv_row(&self) -> String {
        self.scalar_fields()
            .iter()
            .map(|(_, v)| v.clone())
            .collect::<Vec<_>>()
            .join(",")
    }

    fn scalar_fields(&self) -> Vec<(&'static str, String)> {
        vec![
            ("m", self.m.to_string()),
            ("n", self.n.to_string()),
            ("p_constant", fmt17(self.p_constant)),
            ("unit_p_squared", fmt17(self.unit_p_squared)),
            ("workload_error", fmt17(self.workload_error)),
            ("rms_error", fmt17(self.rms_error())),
            ("svdb", fmt17(self.svdb)),
            ("lower_bound", fmt17(self.lower_bound)),
            ("ratio_to_bound", fmt17(self.ratio_to_bound)),
            ("thm3_cap", fmt17(self.thm3_cap)),
        ]
    }
}

fn fmt17(x: f64) -> String {
    crate::io::format_f64(x)
}

/// Spectral summary of a workload, computed once and reused across strategies.
#[derive(Debug, Clone)]
pub struct WorkloadSpectrum {
    pub gram: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    pub svdb: f64,
    pub largest: f64,
}

impl WorkloadSpectrum {
    pub fn new(w: &Workload) -> Result<Self> {
        let g = gram(w);
        let dec = eigendecompose(&g)?;
        let n = g.nrows() as f64;
        // Eigenvalues past the numerical rank are roundoff; their roots are not.
        let root_sum: f64 = dec.values.iter().take(dec.rank).map(|s| s.sqrt()).sum();
        Ok(Self {
            svdb: root_sum * root_sum / n,
            largest: dec.largest(),
            eigenvalues: dec.values,
            gram: g,
        })
    }

    /// `(n·σ_1 / svdb)^{1/4}`.
    pub fn thm3_cap(&self) -> f64 {
        if self.svdb == 0.0 {
            return 1.0;
        }
        (self.gram.nrows() as f64 * self.largest / self.svdb).powf(0.25)
    }
}

pub fn svdb(w: &Workload) -> Result<f64> {
    Ok(WorkloadSpectrum::new(w)?.svdb)
}

/// `√(P(ε,δ)·svdb(W))`: no strategy answers `W` with smaller workload error.
pub fn lower_bound(w: &Workload, pp: &PrivacyParams) -> Result<f64> {
    Ok((pp.p() * svdb(w)?).sqrt())
}

/// Worst-case ratio of the eigen-design error to the optimum.
pub fn thm3_cap(w: &Workload) -> Result<f64> {
    Ok(WorkloadSpectrum::new(w)?.thm3_cap())
}

fn answerable(lsq: &LeastSquares, w: &DMatrix<f64>) -> Result<()> {
    let residual = lsq.answerability_residual(w);
    if residual > ANSWERABILITY_TOL {
        return Err(Error::NotAnswerable {
            residual,
            tolerance: ANSWERABILITY_TOL,
        });
    }
    Ok(())
}

fn check_dims(w: &Workload, a: &Strategy) -> Result<()> {
    if w.n() != a.n() {
        return Err(Error::DimensionMismatch(format!(
            "workload has {} cells, strategy has {}",
            w.n(),
            a.n()
        )));
    }
    Ok(())
}

/// `‖A‖₂²·trace(WᵀW(AᵀA)⁺)` without the per-query breakdown.
pub fn unit_p_squared(w: &Workload, a: &Strategy) -> Result<f64> {
    check_dims(w, a)?;
    let lsq = LeastSquares::new(a.matrix())?;
    answerable(&lsq, w.matrix())?;
    Ok(a.sensitivity().powi(2) * gram(w).dot(lsq.normal_pinv()))
}

pub fn workload_error(w: &Workload, a: &Strategy, pp: &PrivacyParams) -> Result<ErrorReport> {
    let spectrum = WorkloadSpectrum::new(w)?;
    workload_error_with(w, &spectrum, a, pp)
}

pub fn workload_error_with(
    w: &Workload,
    spectrum: &WorkloadSpectrum,
    a: &Strategy,
    pp: &PrivacyParams,
) -> Result<ErrorReport> {
    check_dims(w, a)?;
    let lsq = LeastSquares::new(a.matrix())?;
    answerable(&lsq, w.matrix())?;
    let sens2 = a.sensitivity().powi(2);
    let unit_p_squared = sens2 * spectrum.gram.dot(lsq.normal_pinv());
    let p = pp.p();

    let wn = w.matrix() * lsq.normal_pinv();
    let per_query = (0..w.m())
        .map(|i| (p * sens2 * wn.row(i).dot(&w.matrix().row(i)).max(0.0)).sqrt())
        .collect();

    let workload_error = (p * unit_p_squared).sqrt();
    let lower_bound = (p * spectrum.svdb).sqrt();
    Ok(ErrorReport {
        m: w.m(),
        n: w.n(),
        p_constant: p,
        unit_p_squared,
        workload_error,
        per_query,
        svdb: spectrum.svdb,
        lower_bound,
        ratio_to_bound: workload_error / lower_bound,
        thm3_cap: spectrum.thm3_cap(),
    })
}

/// Monte-Carlo error of the matrix mechanism on a concrete data vector.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalError {
    pub trials: usize,
    /// `√(mean over trials and queries of (estimate − truth)²)`.
    pub rmse: f64,
    pub per_query_rmse: Vec<f64>,
    /// Per query: mean over trials of `|estimate − truth| / max(|truth|, sanity)`.
    pub relative: Vec<f64>,
    pub mean_relative: f64,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Trials per work unit; fixed so that results do not depend on the thread count.
const TRIAL_CHUNK: usize = 64;

/// Runs the mechanism `trials` times (trial `t` uses noise stream `t` of
/// `seed`) and aggregates absolute and relative errors. Relative error
/// divides by `max(|truth|, sanity)`.
pub fn empirical_error(
    w: &Workload,
    a: &Strategy,
    x: &DataVector,
    pp: &PrivacyParams,
    trials: usize,
    seed: u64,
    sanity: f64,
) -> Result<EmpiricalError> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if !(sanity > 0.0) {
        return Err(Error::InvalidArgument(format!("sanity bound must be positive, got {sanity}")));
    }
    let mech = MatrixMechanism::new(w, a)?;
    let xv = x.to_dvector();
    if xv.len() != w.n() {
        return Err(Error::DimensionMismatch(format!(
            "data vector has {} cells, workload has {}",
            xv.len(),
            w.n()
        )));
    }
    let truth = w.matrix() * &xv;
    let m = w.m();
    let denom: Vec<f64> = truth.iter().map(|t| t.abs().max(sanity)).collect();

    let chunks: Vec<(usize, usize)> = (0..trials)
        .step_by(TRIAL_CHUNK)
        .map(|start| (start, (start + TRIAL_CHUNK).min(trials)))
        .collect();
    let partials: Vec<Result<(Vec<Compensated>, Vec<Compensated>)>> = chunks
        .par_iter()
        .map(|&(start, end)| {
            let mut sq = vec![Compensated::default(); m];
            let mut rel = vec![Compensated::default(); m];
            for t in start..end {
                let out = mech.run_trial(&xv, pp, seed, t as u64)?;
                for q in 0..m {
                    let dev = out.answers[q] - truth[q];
                    sq[q].add(dev * dev);
                    rel[q].add(dev.abs() / denom[q]);
                }
            }
            Ok((sq, rel))
        })
        .collect();

    let mut sq = vec![Compensated::default(); m];
    let mut rel = vec![Compensated::default(); m];
    for part in partials {
        let (s, r) = part?;
        for q in 0..m {
            sq[q].add(s[q].value());
            rel[q].add(r[q].value());
        }
    }
    let t = trials as f64;
    let per_query_rmse: Vec<f64> = sq.iter().map(|s| (s.value() / t).sqrt()).collect();
    let total_sq: f64 = sq.iter().map(|s| s.value()).sum();
    let relative: Vec<f64> = rel.iter().map(|r| r.value() / t).collect();
    Ok(EmpiricalError {
        trials,
        rmse: (total_sq / (t * m as f64)).sqrt(),
        mean_relative: relative.iter().sum::<f64>() / m as f64,
        per_query_rmse,
        relative,
    })
}

/// Expected relative error per query implied by the analytic per-query
/// errors: `E|N(0, e_q)| / max(|truth_q|, sanity) = e_q·√(2/π) / max(…)`.
pub fn expected_relative_error(report: &ErrorReport, truth: &DVector<f64>, sanity: f64) -> Vec<f64> {
    let k = (2.0 / std::f64::consts::PI).sqrt();
    report
        .per_query
        .iter()
        .zip(truth.iter())
        .map(|(e, t)| e * k / t.abs().max(sanity))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{identity_strategy, wavelet_strategy, workload_strategy};
    use crate::domain::DomainShape;
    use crate::fixtures::student_workload;

    fn unit() -> PrivacyParams {
        PrivacyParams::unit(1e-4).unwrap()
    }

    #[test]
    fn identity_on_identity() {
        let w = Workload::from_matrix(DMatrix::identity(6, 6)).unwrap();
        let r = workload_error(&w, &identity_strategy(6).unwrap(), &unit()).unwrap();
        assert!((r.workload_error - 6f64.sqrt()).abs() < 1e-12);
        assert!((r.svdb - 6.0).abs() < 1e-12);
        assert!((r.ratio_to_bound - 1.0).abs() < 1e-12);
        assert!((r.thm3_cap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn student_identity_wavelet_and_self() {
        let w = student_workload();
        let id = workload_error(&w, &identity_strategy(8).unwrap(), &unit()).unwrap();
        assert!((id.unit_p_squared - 36.0).abs() < 1e-9);
        let wav = wavelet_strategy(&DomainShape::one_dim(8).unwrap()).unwrap();
        let r = workload_error(&w, &wav, &unit()).unwrap();
        assert!((r.unit_p_squared - 21.0).abs() < 1e-9);
        let own = workload_error(&w, &workload_strategy(&w).unwrap(), &unit()).unwrap();
        assert!((own.unit_p_squared - 20.0).abs() < 1e-9);
    }

    #[test]
    fn golden_svdb_and_cap() {
        let w = Workload::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0])).unwrap();
        let s = WorkloadSpectrum::new(&w).unwrap();
        assert!((s.svdb - 2.5).abs() < 1e-12);
        let sigma1 = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((s.thm3_cap() - (2.0 * sigma1 / 2.5).powf(0.25)).abs() < 1e-12);
        assert!((s.thm3_cap() - 1.203).abs() < 1e-3);
    }

    #[test]
    fn per_query_squares_sum_to_total() {
        let w = student_workload();
        let pp = PrivacyParams::new(0.5, 1e-4).unwrap();
        let r = workload_error(&w, &identity_strategy(8).unwrap(), &pp).unwrap();
        let total: f64 = r.per_query.iter().map(|e| e * e).sum();
        assert!((total - r.p_constant * r.unit_p_squared).abs() <= 1e-9 * total);
    }

    #[test]
    fn key_value_and_csv_agree_on_field_count() {
        let w = student_workload();
        let r = workload_error(&w, &identity_strategy(8).unwrap(), &unit()).unwrap();
        assert_eq!(r.to_key_value().lines().count(), ErrorReport::csv_header().split(',').count());
        assert_eq!(r.csv_row().split(',').count(), ErrorReport::csv_header().split(',').count());
    }

    #[test]
    fn relative_error_uses_sanity_floor() {
        // Single query with truth 0: relative error is |estimate| / sanity.
        let w = Workload::from_matrix(DMatrix::identity(1, 1)).unwrap();
        let a = identity_strategy(1).unwrap();
        let x = DataVector::new(vec![0]);
        let pp = PrivacyParams::new(1.0, 1e-3).unwrap();
        let e = empirical_error(&w, &a, &x, &pp, 1, 4, 10.0).unwrap();
        let out = MatrixMechanism::new(&w, &a)
            .unwrap()
            .run_trial(&x.to_dvector(), &pp, 4, 0)
            .unwrap();
        assert!((e.relative[0] - out.answers[0].abs() / 10.0).abs() < 1e-12);
        assert!(e.relative[0].is_finite());
    }

    #[test]
    fn noise_free_empirical_error_vanishes() {
        let w = student_workload();
        let x = DataVector::new(vec![5, 1, 0, 2, 7, 3, 0, 9]);
        let pp = PrivacyParams::new(1e9, 1e-4).unwrap();
        let e = empirical_error(&w, &identity_strategy(8).unwrap(), &x, &pp, 20, 1, 1.0).unwrap();
        assert!(e.rmse < 1e-6 && e.mean_relative < 1e-6);
    }

    #[test]
    fn empirical_error_independent_of_threading() {
        let w = student_workload();
        let x = DataVector::new(vec![5, 1, 0, 2, 7, 3, 0, 9]);
        let pp = PrivacyParams::new(1.0, 1e-4).unwrap();
        let a = identity_strategy(8).unwrap();
        let e1 = empirical_error(&w, &a, &x, &pp, 300, 8, 1.0).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let e2 = pool
            .install(|| empirical_error(&w, &a, &x, &pp, 300, 8, 1.0))
            .unwrap();
        assert_eq!(e1.rmse.to_bits(), e2.rmse.to_bits());
    }
}
