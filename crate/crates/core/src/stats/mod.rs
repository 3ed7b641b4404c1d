//! Complexity measures, strategy-selection regression, agreement statistics
//! and the cost model.

mod agreement;
mod cost;
mod landscape;
mod regression;

pub use agreement::{cohen_kappa, confusion_from_labels, AgreementError, AgreementReport};
pub use cost::{predict_strategy, CostModel, CostModelError, ExpectedWork, StrategyPrediction};
pub use landscape::{decision_landscape, ContourPoint, Landscape, LandscapeCell, LandscapeError, LandscapeModel};
pub use regression::{
    compare_models, fit_design, fit_logistic, ComparisonRow, FitError, LogisticSolution, ModelComparison,
    ModelSpec, RegressionFit, RegressionRow,
};

use thiserror::Error;

use crate::pair::choose2;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("information ratio needs N >= 3 and T >= 1 (got N={n_vars}, T={n_trials})")]
pub struct DomainError {
    pub n_vars: usize,
    pub n_trials: usize,
}

/// `2^T / C(N,2)`: distinguishable output patterns per candidate pair.
pub fn information_ratio(n_vars: usize, n_trials: usize) -> Result<f64, DomainError> {
    if n_vars < 3 || n_trials < 1 {
        return Err(DomainError { n_vars, n_trials });
    }
    let t = i32::try_from(n_trials).map_err(|_| DomainError { n_vars, n_trials })?;
    Ok(2f64.powi(t) / choose2(n_vars) as f64)
}

/// Natural log of the hypothesis-space size, `ln C(N,2)`.
pub fn log_hypothesis_space(n_vars: usize) -> f64 {
    (choose2(n_vars) as f64).ln()
}
