//! Expected-cost comparison of the two strategies.
//!
//! Pruning statistics enter through the pooled per-trial decoy retention `r`
//! measured by [`pruning_profile`](crate::solvers::pruning_profile). With
//! `C = C(N,2)` hypotheses, a decoy survives `t` trials with probability
//! `r^t`, so it costs `d = sum_{k<T} r^k` checks before it is rejected.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::FunctionClass;
use crate::pair::choose2;
use crate::solvers::{PruningSummary, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Cost of one single-trial consistency check.
    pub c_check: f64,
    /// Cost of holding one hypothesis across one processed trial.
    pub c_slot: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum CostModelError {
    #[error("cost parameters must be finite and nonnegative (c_check={0}, c_slot={1})")]
    NegativeCost(f64, f64),
    #[error("no pruning statistics for class {0}")]
    MissingClass(FunctionClass),
    #[error("decoy retention {0} outside [0, 1]")]
    BadRetention(f64),
    #[error("need N >= 3 and T >= 1")]
    Domain,
}

impl CostModel {
    pub fn new(c_check: f64, c_slot: f64) -> Result<Self, CostModelError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(c_check) || !ok(c_slot) {
            return Err(CostModelError::NegativeCost(c_check, c_slot));
        }
        Ok(CostModel { c_check, c_slot })
    }
}

/// Expected work of both strategies on one `(N, T)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedWork {
    pub permutation_checks: f64,
    pub elimination_checks: f64,
    /// `E[survivors after trial t]` for `t = 1..=T`.
    pub survivors: Vec<f64>,
}

impl ExpectedWork {
    pub fn from_retention(n_vars: usize, n_trials: usize, retention: f64) -> Result<Self, CostModelError> {
        if n_vars < 3 || n_trials < 1 {
            return Err(CostModelError::Domain);
        }
        if !(0.0..=1.0).contains(&retention) {
            return Err(CostModelError::BadRetention(retention));
        }
        let decoys = (choose2(n_vars) - 1) as f64;
        let t = n_trials as f64;
        let per_decoy: f64 = (0..n_trials).map(|k| retention.powi(k as i32)).sum();
        Ok(ExpectedWork {
            // on average half the decoys precede the truth pair
            permutation_checks: decoys / 2.0 * per_decoy + t,
            elimination_checks: decoys * per_decoy + t,
            survivors: (1..=n_trials)
                .map(|k| 1.0 + decoys * retention.powi(k as i32))
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyPrediction {
    pub strategy: Strategy,
    pub permutation_cost: f64,
    pub elimination_cost: f64,
}

impl StrategyPrediction {
    /// Picks the cheaper strategy; ties go to permutation.
    pub fn from_costs(permutation_cost: f64, elimination_cost: f64) -> Self {
        let strategy = if elimination_cost < permutation_cost {
            Strategy::Elimination
        } else {
            Strategy::Permutation
        };
        StrategyPrediction {
            strategy,
            permutation_cost,
            elimination_cost,
        }
    }
}

pub fn predict_strategy(
    cost: &CostModel,
    n_vars: usize,
    n_trials: usize,
    class: FunctionClass,
    pruning: &BTreeMap<FunctionClass, PruningSummary>,
) -> Result<StrategyPrediction, CostModelError> {
    let stats = pruning.get(&class).ok_or(CostModelError::MissingClass(class))?;
    let work = ExpectedWork::from_retention(n_vars, n_trials, stats.decoy_retention)?;
    let permutation_cost = cost.c_check * work.permutation_checks;
    let elimination_cost =
        cost.c_check * work.elimination_checks + cost.c_slot * work.survivors.iter().sum::<f64>();
    Ok(StrategyPrediction::from_costs(permutation_cost, elimination_cost))
}
