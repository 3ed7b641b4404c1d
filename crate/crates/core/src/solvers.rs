//! Reference permutation and elimination solvers, instrumented with work
//! and working-set counters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Design;
use crate::logic::BooleanFunction;
use crate::pair::{all_pairs, choose2, Pair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Permutation,
    Elimination,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Permutation => "permutation",
            Strategy::Elimination => "elimination",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub strategy: Strategy,
    pub predicted_pair: Pair,
    /// Single-trial function evaluations.
    pub consistency_checks: u64,
    pub trials_processed: usize,
    /// Distinct unordered pairs still alive after each processed trial (elimination only).
    pub surviving_counts: Vec<usize>,
    pub peak_working_set: usize,
    /// Lexicographic pair index (permutation) or trial index (elimination)
    /// at which the answer was determined.
    pub resolved_at: usize,
}

impl SolveTrace {
    /// Surviving-count curve area divided by `trials * C(N,2)`.
    pub fn normalized_area(&self, n_vars: usize) -> Option<f64> {
        if self.surviving_counts.is_empty() {
            return None;
        }
        let total: usize = self.surviving_counts.iter().sum();
        Some(total as f64 / (self.surviving_counts.len() * choose2(n_vars)) as f64)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error("no pair is consistent with the trials")]
    NoSolution,
    #[error("{survivors} pairs remain consistent after all trials")]
    Ambiguous { survivors: usize },
    #[error("design has {trials} trials but {outputs} outputs")]
    Dimensions { trials: usize, outputs: usize },
}

fn check_dims(design: &Design, outputs: &[bool]) -> Result<(), SolveError> {
    if design.n_trials() != outputs.len() {
        return Err(SolveError::Dimensions {
            trials: design.n_trials(),
            outputs: outputs.len(),
        });
    }
    Ok(())
}

/// Argument orderings to test for a pair: one for symmetric functions, two otherwise.
fn orderings(f: &BooleanFunction, p: Pair) -> impl Iterator<Item = (usize, usize)> {
    let swapped = (!f.is_symmetric()).then_some((p.hi(), p.lo()));
    std::iter::once((p.lo(), p.hi())).chain(swapped)
}

/// Serial hypothesis testing: visit pairs lexicographically, abandon each
/// ordering at its first failing trial, return the first fully consistent pair.
pub fn solve_permutation(
    design: &Design,
    outputs: &[bool],
    f: &BooleanFunction,
) -> Result<SolveTrace, SolveError> {
    check_dims(design, outputs)?;
    let mut checks = 0u64;
    for (index, pair) in all_pairs(design.n_vars()).enumerate() {
        for (a, b) in orderings(f, pair) {
            let mut consistent = true;
            for (row, &y) in design.rows().iter().zip(outputs) {
                checks += 1;
                if f.eval(row[a], row[b]) != y {
                    consistent = false;
                    break;
                }
            }
            if consistent {
                return Ok(SolveTrace {
                    strategy: Strategy::Permutation,
                    predicted_pair: pair,
                    consistency_checks: checks,
                    trials_processed: design.n_trials(),
                    surviving_counts: Vec::new(),
                    peak_working_set: 1,
                    resolved_at: index,
                });
            }
        }
    }
    Err(SolveError::NoSolution)
}

/// Pruning over the full hypothesis set, one trial at a time. Asymmetric
/// functions expand each pair into both argument orderings.
pub fn solve_elimination(
    design: &Design,
    outputs: &[bool],
    f: &BooleanFunction,
) -> Result<SolveTrace, SolveError> {
    check_dims(design, outputs)?;
    let n = design.n_vars();
    let mut hypotheses: Vec<(Pair, usize, usize)> = all_pairs(n)
        .flat_map(|p| orderings(f, p).map(move |(a, b)| (p, a, b)))
        .collect();
    let peak = hypotheses.len();
    let mut checks = 0u64;
    let mut surviving_counts = Vec::new();
    let mut distinct = choose2(n);

    for (t, (row, &y)) in design.rows().iter().zip(outputs).enumerate() {
        if distinct <= 1 {
            break;
        }
        checks += hypotheses.len() as u64;
        hypotheses.retain(|&(_, a, b)| f.eval(row[a], row[b]) == y);
        // orderings of one pair are adjacent, so dedup counts distinct pairs
        distinct = count_distinct(&hypotheses);
        surviving_counts.push(distinct);
        if distinct == 0 {
            return Err(SolveError::NoSolution);
        }
        if distinct == 1 {
            return Ok(SolveTrace {
                strategy: Strategy::Elimination,
                predicted_pair: hypotheses[0].0,
                consistency_checks: checks,
                trials_processed: t + 1,
                surviving_counts,
                peak_working_set: peak,
                resolved_at: t,
            });
        }
    }
    match distinct {
        0 => Err(SolveError::NoSolution),
        // only reachable with a single variable pair and no trials
        1 => Ok(SolveTrace {
            strategy: Strategy::Elimination,
            predicted_pair: hypotheses[0].0,
            consistency_checks: checks,
            trials_processed: 0,
            surviving_counts,
            peak_working_set: peak,
            resolved_at: 0,
        }),
        survivors => Err(SolveError::Ambiguous { survivors }),
    }
}

fn count_distinct(hypotheses: &[(Pair, usize, usize)]) -> usize {
    let mut count = 0;
    let mut last = None;
    for &(p, _, _) in hypotheses {
        if last != Some(p) {
            count += 1;
            last = Some(p);
        }
    }
    count
}

pub fn solve(
    strategy: Strategy,
    design: &Design,
    outputs: &[bool],
    f: &BooleanFunction,
) -> Result<SolveTrace, SolveError> {
    match strategy {
        Strategy::Permutation => solve_permutation(design, outputs, f),
        Strategy::Elimination => solve_elimination(design, outputs, f),
    }
}

/// Per-group summary of elimination traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningSummary {
    pub runs: usize,
    pub mean_trials_to_singleton: f64,
    pub mean_normalized_area: f64,
    /// Pooled fraction of decoy pairs surviving a single trial.
    pub decoy_retention: f64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileError {
    #[error("no traces to summarize")]
    Empty,
    #[error("trace is not an elimination run")]
    NotElimination,
}

/// Summarizes elimination traces by group. Each item carries the group key,
/// the instance's variable count and its trace.
pub fn pruning_profile<'a, K: Ord + Clone>(
    items: impl IntoIterator<Item = (K, usize, &'a SolveTrace)>,
) -> Result<BTreeMap<K, PruningSummary>, ProfileError> {
    #[derive(Default)]
    struct Acc {
        runs: usize,
        trials: f64,
        area: f64,
        decoys_before: f64,
        decoys_after: f64,
    }
    let mut groups: BTreeMap<K, Acc> = BTreeMap::new();
    for (key, n_vars, trace) in items {
        if trace.strategy != Strategy::Elimination {
            return Err(ProfileError::NotElimination);
        }
        let acc = groups.entry(key).or_default();
        acc.runs += 1;
        acc.trials += trace.trials_processed as f64;
        acc.area += trace.normalized_area(n_vars).unwrap_or(0.0);
        let mut before = choose2(n_vars);
        for &after in &trace.surviving_counts {
            if before > 1 {
                acc.decoys_before += (before - 1) as f64;
                acc.decoys_after += after.saturating_sub(1) as f64;
            }
            before = after;
        }
    }
    if groups.is_empty() {
        return Err(ProfileError::Empty);
    }
    Ok(groups
        .into_iter()
        .map(|(k, acc)| {
            let runs = acc.runs as f64;
            let retention = if acc.decoys_before > 0.0 {
                acc.decoys_after / acc.decoys_before
            } else {
                0.0
            };
            (
                k,
                PruningSummary {
                    runs: acc.runs,
                    mean_trials_to_singleton: acc.trials / runs,
                    mean_normalized_area: acc.area / runs,
                    decoy_retention: retention,
                },
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::check_consistent_pairs;

    fn f(name: &str) -> BooleanFunction {
        name.parse().unwrap()
    }

    fn worked() -> (Design, Vec<bool>) {
        let d = Design::from_columns(&[
            vec![true, true, false],
            vec![true, false, true],
            vec![true, true, true],
        ])
        .unwrap();
        (d, vec![true, false, false])
    }

    #[test]
    fn permutation_worked_example() {
        let (d, y) = worked();
        let tr = solve_permutation(&d, &y, &f("AND")).unwrap();
        assert_eq!(tr.predicted_pair, Pair::new(0, 1).unwrap());
        // first pair is consistent on all three trials and returned immediately
        assert_eq!(tr.consistency_checks, 3);
        assert_eq!(tr.resolved_at, 0);
        assert_eq!(tr.peak_working_set, 1);
    }

    #[test]
    fn permutation_short_circuits_decoys() {
        // truth pair last: {0,1} fails at trial 1, {0,2} fails at trial 2
        let d = Design::from_columns(&[
            vec![true, true, false],
            vec![true, false, true],
            vec![false, true, true],
        ])
        .unwrap();
        let y = vec![false, false, true];
        let tr = solve_permutation(&d, &y, &f("AND")).unwrap();
        assert_eq!(tr.predicted_pair, Pair::new(1, 2).unwrap());
        assert_eq!(tr.consistency_checks, 1 + 2 + 3);
        assert_eq!(tr.resolved_at, 2);
    }

    #[test]
    fn tampered_outputs_have_no_solution() {
        let (d, mut y) = worked();
        y[0] = false;
        y[1] = true;
        y[2] = true;
        assert!(check_consistent_pairs(&d, &y, &f("AND")).unwrap().is_empty());
        assert_eq!(solve_permutation(&d, &y, &f("AND")), Err(SolveError::NoSolution));
        assert_eq!(solve_elimination(&d, &y, &f("AND")), Err(SolveError::NoSolution));
    }

    #[test]
    fn elimination_worked_example() {
        let (d, y) = worked();
        let tr = solve_elimination(&d, &y, &f("AND")).unwrap();
        assert_eq!(tr.surviving_counts, vec![3, 2, 1]);
        assert_eq!(tr.predicted_pair, Pair::new(0, 1).unwrap());
        assert_eq!(tr.consistency_checks, 3 + 3 + 2);
        assert_eq!(tr.peak_working_set, 3);
        assert_eq!(tr.resolved_at, 2);
        assert_eq!(tr.trials_processed, 3);
    }

    #[test]
    fn elimination_without_trials_is_ambiguous() {
        let d = Design::new(4, vec![]).unwrap();
        assert_eq!(
            solve_elimination(&d, &[], &f("XOR")),
            Err(SolveError::Ambiguous { survivors: 6 })
        );
    }

    #[test]
    fn elimination_expands_asymmetric_orderings() {
        let d = Design::from_columns(&[vec![false, true, false], vec![true, true, false], vec![true, false, true]])
            .unwrap();
        let g = f("A AND NOT B");
        let y: Vec<bool> = d.rows().iter().map(|r| g.eval(r[1], r[0])).collect();
        let tr = solve_elimination(&d, &y, &g).unwrap();
        assert_eq!(tr.peak_working_set, 6);
        assert_eq!(tr.predicted_pair, Pair::new(0, 1).unwrap());
        assert_eq!(*tr.surviving_counts.last().unwrap(), 1);
    }

    #[test]
    fn dimension_errors() {
        let (d, _) = worked();
        assert!(matches!(
            solve_permutation(&d, &[true], &f("AND")),
            Err(SolveError::Dimensions { .. })
        ));
    }

    #[test]
    fn area_normalization() {
        let tr = SolveTrace {
            strategy: Strategy::Elimination,
            predicted_pair: Pair::new(0, 1).unwrap(),
            consistency_checks: 0,
            trials_processed: 3,
            surviving_counts: vec![6, 3, 1],
            peak_working_set: 6,
            resolved_at: 2,
        };
        assert!((tr.normalized_area(4).unwrap() - 10.0 / 18.0).abs() < 1e-15);
        let prof = pruning_profile([("g", 4, &tr)]).unwrap();
        assert!((prof["g"].mean_normalized_area - 10.0 / 18.0).abs() < 1e-15);
        // decoys: 5 -> 5 -> 2 -> 0
        assert!((prof["g"].decoy_retention - 7.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn profile_of_first_trial_resolutions() {
        let tr = SolveTrace {
            strategy: Strategy::Elimination,
            predicted_pair: Pair::new(0, 1).unwrap(),
            consistency_checks: 3,
            trials_processed: 1,
            surviving_counts: vec![1],
            peak_working_set: 3,
            resolved_at: 0,
        };
        let prof = pruning_profile(vec![(0u8, 3, &tr), (0u8, 3, &tr)]).unwrap();
        assert_eq!(prof[&0].mean_trials_to_singleton, 1.0);
        assert_eq!(prof[&0].runs, 2);
    }

    #[test]
    fn profile_errors() {
        let empty: Vec<(u8, usize, &SolveTrace)> = Vec::new();
        assert_eq!(pruning_profile(empty), Err(ProfileError::Empty));
        let (d, y) = worked();
        let tr = solve_permutation(&d, &y, &f("AND")).unwrap();
        assert_eq!(pruning_profile([(0, 3, &tr)]), Err(ProfileError::NotElimination));
    }
}
