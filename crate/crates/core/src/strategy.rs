use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::sensitivity_l2;

/// Where a strategy came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Eigen,
    Identity,
    Wavelet,
    Hierarchical,
    Workload,
    Reduced,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Eigen => "eigen",
            Provenance::Identity => "identity",
            Provenance::Wavelet => "wavelet",
            Provenance::Hierarchical => "hierarchical",
            Provenance::Workload => "workload",
            Provenance::Reduced => "reduced",
        })
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "eigen" => Provenance::Eigen,
            "identity" => Provenance::Identity,
            "wavelet" => Provenance::Wavelet,
            "hierarchical" | "hierarchy" => Provenance::Hierarchical,
            "workload" => Provenance::Workload,
            "reduced" => Provenance::Reduced,
            other => return Err(Error::parse(None, format!("unknown provenance '{other}'"))),
        })
    }
}

/// A p×n matrix of measurement queries with its cached L2 sensitivity.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    matrix: DMatrix<f64>,
    sensitivity: f64,
    provenance: Provenance,
}

impl Strategy {
    /// Rejects empty matrices, all-zero rows and non-finite entries.
    pub fn new(matrix: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidArgument("strategy matrix is empty".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("strategy has a non-finite entry".into()));
        }
        if let Some(i) = (0..matrix.nrows()).find(|&i| matrix.row(i).iter().all(|&v| v == 0.0)) {
            return Err(Error::InvalidArgument(format!("strategy row {i} is all zero")));
        }
        let sensitivity = sensitivity_l2(&matrix);
        Ok(Self {
            matrix,
            sensitivity,
            provenance,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn p(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        self.matrix.column_iter().map(|c| c.norm()).collect()
    }

    /// Same queries scaled by `alpha`; error is unchanged.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        Self::new(&self.matrix * alpha, self.provenance)
    }
}
