//! Workload-adaptive query answering under (ε, δ)-differential privacy.
//!
//! A workload of linear counting queries is answered through the matrix
//! mechanism: a strategy matrix is measured with Gaussian noise, the cell
//! counts are estimated by least squares, and the workload is evaluated on
//! that single estimate. The strategy is chosen per workload by weighting the
//! eigenvectors of the workload's Gram matrix with a convex program
//! ([`eigendesign::eigen_design`]), and its analytic error is compared to a
//! spectral lower bound ([`analysis`]).

pub mod analysis;
pub mod baselines;
pub mod config;
pub mod domain;
pub mod eigendesign;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod mechanism;
pub mod reduction;
pub mod spectral;
pub mod strategy;
pub mod weighting;

pub use analysis::{workload_error, ErrorReport};
pub use domain::{CellConditions, DataVector, DomainShape, Workload, WorkloadFamily};
pub use eigendesign::eigen_design;
pub use error::{Error, Result};
pub use mechanism::PrivacyParams;
pub use strategy::{Provenance, Strategy};
