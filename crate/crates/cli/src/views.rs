//! JSON shapes of the files the CLI writes and reads back. Sample and mode
//! indices are 1-based in every file.

use lsm_core::analysis::BoundReport;
use lsm_core::estimator::{EstimateResult, SolverStatus};
use lsm_core::metrics::MetricsReport;
use lsm_core::model::{FeatureMap, ParameterMatrix};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub root_seed: u64,
}

/// Sidecar of a simulated dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub provenance: Provenance,
    pub n: usize,
    pub s: usize,
    pub n_samples: usize,
    pub feature_map: FeatureMap,
    /// Columns of the true parameter matrix.
    pub a_true: Vec<Vec<f64>>,
    pub outliers: Vec<usize>,
    pub noise_l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateView {
    pub a_hat: Vec<Vec<f64>>,
    pub cost: f64,
    pub status: SolverStatus,
    pub restarts_used: usize,
    pub best_restart: usize,
    pub sigma: Vec<usize>,
    pub cardinalities: Vec<usize>,
    pub min_cardinality: usize,
    pub trajectory: Vec<f64>,
    pub distinct_optima: Vec<Vec<Vec<f64>>>,
    pub empty_modes: Vec<usize>,
}

impl EstimateView {
    pub fn from_result(r: &EstimateResult) -> Self {
        EstimateView {
            a_hat: r.a_hat.columns(),
            cost: r.cost,
            status: r.status,
            restarts_used: r.restarts_used,
            best_restart: r.best_restart,
            sigma: r.assignment.sigma.iter().map(|&m| m + 1).collect(),
            cardinalities: r.assignment.cardinalities(),
            min_cardinality: r.assignment.min_cardinality,
            trajectory: r.trajectory.clone(),
            distinct_optima: r.distinct_optima.iter().map(ParameterMatrix::columns).collect(),
            empty_modes: r.empty_modes.iter().map(|&m| m + 1).collect(),
        }
    }

    pub fn a_hat(&self) -> Result<ParameterMatrix, CliError> {
        Ok(ParameterMatrix::from_columns(&self.a_hat)?)
    }

    pub fn distinct_optima(&self) -> Result<Vec<ParameterMatrix>, CliError> {
        self.distinct_optima
            .iter()
            .map(|c| ParameterMatrix::from_columns(c).map_err(CliError::from))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Heuristic,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateFile {
    pub provenance: Provenance,
    pub n: usize,
    pub s: usize,
    pub n_samples: usize,
    pub best: Which,
    pub best_cost: f64,
    pub heuristic: Option<EstimateView>,
    pub oracle: Option<EstimateView>,
    /// Against the stored truth, when available.
    pub matched_error: Option<f64>,
}

impl EstimateFile {
    pub fn best_view(&self) -> &EstimateView {
        match self.best {
            Which::Heuristic => self.heuristic.as_ref(),
            Which::Oracle => self.oracle.as_ref(),
        }
        .expect("best estimate is present")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub report: MetricsReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundTag {
    Certified,
    Optimistic,
    Vacuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsFile {
    pub provenance: Provenance,
    pub bound_tag: BoundTag,
    pub truth_available: bool,
    #[serde(flatten)]
    pub report: BoundReport,
}
