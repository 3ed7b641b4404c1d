//! Logistic regression by iteratively reweighted least squares, with the
//! centered predictor sets used for strategy-selection model comparison.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

const GRADIENT_TOLERANCE: f64 = 1e-8;
const MAX_ITERATIONS: usize = 100;
/// Coefficient magnitude treated as quasi-complete separation.
const SEPARATION_THRESHOLD: f64 = 30.0;
const RANK_TOLERANCE: f64 = 1e-10;

/// One observation: `y` is the elimination indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub y: bool,
    pub log_space: f64,
    pub trials: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    /// `log C(N,2) * T` with interaction.
    Interaction,
    Additive,
    LogSpace,
    Rho,
    Trials,
    /// `log(rho)`; not part of the default comparison set.
    LogRho,
}

impl ModelSpec {
    /// The five models compared by default, interaction first.
    pub const TABLE: [ModelSpec; 5] = [
        ModelSpec::Interaction,
        ModelSpec::Additive,
        ModelSpec::LogSpace,
        ModelSpec::Rho,
        ModelSpec::Trials,
    ];

    pub fn formula(self) -> &'static str {
        match self {
            ModelSpec::Interaction => "Elimination ~ log C(N,2) x T",
            ModelSpec::Additive => "Elimination ~ log C(N,2) + T",
            ModelSpec::LogSpace => "Elimination ~ log C(N,2)",
            ModelSpec::Rho => "Elimination ~ rho",
            ModelSpec::Trials => "Elimination ~ T",
            ModelSpec::LogRho => "Elimination ~ log rho",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelSpec::Interaction => "interaction",
            ModelSpec::Additive => "additive",
            ModelSpec::LogSpace => "log_space",
            ModelSpec::Rho => "rho",
            ModelSpec::Trials => "trials",
            ModelSpec::LogRho => "log_rho",
        }
    }

    /// Names of the main (centered) predictors.
    fn mains(self) -> &'static [&'static str] {
        match self {
            ModelSpec::Interaction | ModelSpec::Additive => &["log_space", "trials"],
            ModelSpec::LogSpace => &["log_space"],
            ModelSpec::Rho => &["rho"],
            ModelSpec::Trials => &["trials"],
            ModelSpec::LogRho => &["log_rho"],
        }
    }

    fn main_value(name: &str, row: &RegressionRow) -> f64 {
        match name {
            "log_space" => row.log_space,
            "trials" => row.trials,
            "rho" => row.rho,
            "log_rho" => row.rho.ln(),
            _ => unreachable!("unknown predictor {name}"),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            ModelSpec::Interaction,
            ModelSpec::Additive,
            ModelSpec::LogSpace,
            ModelSpec::Rho,
            ModelSpec::Trials,
            ModelSpec::LogRho,
        ]
        .into_iter()
        .find(|m| m.as_str() == s)
        .ok_or_else(|| format!("unknown model spec `{s}`"))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("response has no variation ({0} observations, all identical)")]
    Degenerate(usize),
    #[error("no observations")]
    Empty,
    #[error("non-finite predictor value in column `{0}`")]
    NonFinite(String),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("separation detected: |coefficient| exceeded {threshold} at iteration {iteration}")]
    NonConvergence { threshold: f64, iteration: usize },
    #[error("fits were estimated on different observation counts ({0} vs {1})")]
    MismatchedObservations(usize, usize),
}

/// Raw solution of a logistic fit on an explicit design (intercept added internally).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticSolution {
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub wald_p: Vec<f64>,
    pub log_lik: f64,
    pub null_log_lik: f64,
    pub n_obs: usize,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub model_spec: ModelSpec,
    /// Coefficient names, intercept first.
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub wald_p: Vec<f64>,
    pub log_lik: f64,
    pub null_log_lik: f64,
    pub aic: f64,
    pub pseudo_r2: f64,
    pub n_obs: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Means subtracted from each main predictor before fitting.
    pub centering: Vec<(String, f64)>,
}

impl RegressionFit {
    pub fn coefficient(&self, term: &str) -> Option<f64> {
        self.terms
            .iter()
            .position(|t| t == term)
            .map(|i| self.coefficients[i])
    }

    pub fn center(&self, predictor: &str) -> Option<f64> {
        self.centering
            .iter()
            .find(|(name, _)| name == predictor)
            .map(|&(_, m)| m)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn bernoulli_log_lik(y: &[bool], mu: &DVector<f64>) -> f64 {
    y.iter()
        .zip(mu.iter())
        .map(|(&yi, &m)| if yi { m.ln() } else { (1.0 - m).ln() })
        .sum()
}

/// Null-model log-likelihood `n (p ln p + (1-p) ln(1-p))`.
pub fn null_log_likelihood(y: &[bool]) -> f64 {
    let n = y.len() as f64;
    let p = y.iter().filter(|&&v| v).count() as f64 / n;
    let term = |q: f64| if q > 0.0 { q * q.ln() } else { 0.0 };
    n * (term(p) + term(1.0 - p))
}

/// Fits `y ~ 1 + columns` by Newton/IRLS until the score norm drops below
/// `1e-8` or 100 iterations elapse.
pub fn fit_design(columns: &[(String, Vec<f64>)], y: &[bool]) -> Result<LogisticSolution, FitError> {
    let n = y.len();
    if n == 0 {
        return Err(FitError::Empty);
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == n {
        return Err(FitError::Degenerate(n));
    }
    for (name, col) in columns {
        if col.len() != n || col.iter().any(|v| !v.is_finite()) {
            return Err(FitError::NonFinite(name.clone()));
        }
    }

    let p = columns.len() + 1;
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { columns[j - 1].1[i] });
    let yv = DVector::from_iterator(n, y.iter().map(|&v| if v { 1.0 } else { 0.0 }));

    let gram = x.transpose() * &x;
    let eig = gram.clone().symmetric_eigenvalues();
    let (min_eig, max_eig) = eig
        .iter()
        .fold((f64::INFINITY, 0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
    if max_eig == 0.0 || min_eig <= RANK_TOLERANCE * max_eig {
        return Err(FitError::RankDeficient);
    }

    let mut beta = DVector::<f64>::zeros(p);
    let mut converged = false;
    let mut iterations = 0;
    let mut cov: DMatrix<f64>;
    loop {
        let mu = (&x * &beta).map(sigmoid);
        let score = x.transpose() * (&yv - &mu);
        let weights = mu.map(|m| m * (1.0 - m));
        let mut xw = x.clone();
        for (i, mut row) in xw.row_iter_mut().enumerate() {
            row *= weights[i];
        }
        let info = x.transpose() * xw;
        let chol = info.clone().cholesky().ok_or(FitError::RankDeficient)?;
        cov = chol.inverse();
        if score.norm() < GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        if iterations == MAX_ITERATIONS {
            break;
        }
        beta += chol.solve(&score);
        iterations += 1;
        if beta.iter().any(|b| b.abs() > SEPARATION_THRESHOLD) {
            return Err(FitError::NonConvergence {
                threshold: SEPARATION_THRESHOLD,
                iteration: iterations,
            });
        }
    }

    let mu = (&x * &beta).map(sigmoid);
    let std_errors: Vec<f64> = (0..p).map(|j| cov[(j, j)].sqrt()).collect();
    let normal = Normal::standard();
    let wald_p = beta
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| 2.0 * normal.sf((b / se).abs()))
        .collect();
    let mut terms = vec!["intercept".to_string()];
    terms.extend(columns.iter().map(|(name, _)| name.clone()));
    Ok(LogisticSolution {
        terms,
        coefficients: beta.iter().copied().collect(),
        std_errors,
        wald_p,
        log_lik: bernoulli_log_lik(y, &mu),
        null_log_lik: null_log_likelihood(y),
        n_obs: n,
        converged,
        iterations,
    })
}

/// Fits one strategy-selection model. Main predictors are
/// mean-centered; the interaction is the product of the centered mains.
pub fn fit_logistic(rows: &[RegressionRow], spec: ModelSpec) -> Result<RegressionFit, FitError> {
    if rows.is_empty() {
        return Err(FitError::Empty);
    }
    let n = rows.len() as f64;
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    let mut centering = Vec::new();
    for &name in spec.mains() {
        let raw: Vec<f64> = rows.iter().map(|r| ModelSpec::main_value(name, r)).collect();
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(FitError::NonFinite(name.to_string()));
        }
        let mean = raw.iter().sum::<f64>() / n;
        centering.push((name.to_string(), mean));
        columns.push((name.to_string(), raw.into_iter().map(|v| v - mean).collect()));
    }
    if spec == ModelSpec::Interaction {
        let product = columns[0].1.iter().zip(&columns[1].1).map(|(a, b)| a * b).collect();
        columns.push(("log_space:trials".to_string(), product));
    }
    let y: Vec<bool> = rows.iter().map(|r| r.y).collect();
    let sol = fit_design(&columns, &y)?;
    let k = sol.coefficients.len() as f64;
    Ok(RegressionFit {
        model_spec: spec,
        aic: 2.0 * k - 2.0 * sol.log_lik,
        pseudo_r2: 1.0 - sol.log_lik / sol.null_log_lik,
        terms: sol.terms,
        coefficients: sol.coefficients,
        std_errors: sol.std_errors,
        wald_p: sol.wald_p,
        log_lik: sol.log_lik,
        null_log_lik: sol.null_log_lik,
        n_obs: sol.n_obs,
        converged: sol.converged,
        iterations: sol.iterations,
        centering,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub formula: String,
    pub aic: f64,
    pub delta_aic: f64,
    pub pseudo_r2: f64,
    pub wald_p: String,
    pub max_wald_p: f64,
    pub n_obs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub rows: Vec<ComparisonRow>,
}

impl ModelComparison {
    pub fn best(&self) -> Option<&ComparisonRow> {
        self.rows.first()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["model", "formula", "AIC", "delta_AIC", "pseudo_R2", "wald_p", "max_wald_p", "n_obs"])?;
        for r in &self.rows {
            wtr.write_record([
                r.model.clone(),
                r.formula.clone(),
                format!("{:.2}", r.aic),
                format!("{:.2}", r.delta_aic),
                format!("{:.3}", r.pseudo_r2),
                r.wald_p.clone(),
                format!("{:.3e}", r.max_wald_p),
                r.n_obs.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn wald_summary(fit: &RegressionFit) -> (String, f64) {
    let slopes: Vec<(&String, f64)> = fit.terms.iter().zip(fit.wald_p.iter().copied()).skip(1).collect();
    let max_p = slopes.iter().map(|&(_, p)| p).fold(0.0, f64::max);
    let summary = if max_p < 0.001 {
        if slopes.len() > 1 {
            "< 0.001 (all)".to_string()
        } else {
            "< 0.001".to_string()
        }
    } else {
        slopes
            .iter()
            .map(|(t, p)| format!("{t}={p:.3}"))
            .collect::<Vec<_>>()
            .join("; ")
    };
    (summary, max_p)
}

/// Ranks fits by ascending AIC. All fits must share one observation set.
pub fn compare_models(fits: &[RegressionFit]) -> Result<ModelComparison, FitError> {
    let Some(first) = fits.first() else {
        return Err(FitError::Empty);
    };
    if let Some(bad) = fits.iter().find(|f| f.n_obs != first.n_obs) {
        return Err(FitError::MismatchedObservations(first.n_obs, bad.n_obs));
    }
    let mut sorted: Vec<&RegressionFit> = fits.iter().collect();
    sorted.sort_by(|a, b| a.aic.total_cmp(&b.aic));
    let best = sorted[0].aic;
    let rows = sorted
        .into_iter()
        .map(|f| {
            let (wald_p, max_wald_p) = wald_summary(f);
            ComparisonRow {
                model: f.model_spec.as_str().to_string(),
                formula: f.model_spec.formula().to_string(),
                aic: f.aic,
                delta_aic: f.aic - best,
                pseudo_r2: f.pseudo_r2,
                wald_p,
                max_wald_p,
                n_obs: f.n_obs,
            }
        })
        .collect();
    Ok(ModelComparison { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_by_two() -> Vec<RegressionRow> {
        let mut rows = Vec::new();
        for (x, positives) in [(1.0, 8), (0.0, 2)] {
            for k in 0..10 {
                rows.push(RegressionRow {
                    y: k < positives,
                    log_space: 0.0,
                    trials: x,
                    rho: 1.0,
                });
            }
        }
        rows
    }

    #[test]
    fn two_by_two_matches_log_odds_ratio() {
        let fit = fit_logistic(&two_by_two(), ModelSpec::Trials).unwrap();
        // odds 8/2 against 2/8
        let closed_form = (16.0f64).ln();
        assert!((fit.coefficients[1] - closed_form).abs() < 1e-6);
        // centered at 0.5, the intercept is the mean of the two group logits
        assert!(fit.coefficients[0].abs() < 1e-6);
        let se = (1.0 / 8.0 + 1.0 / 2.0 + 1.0 / 2.0 + 1.0 / 8.0f64).sqrt();
        assert!((fit.std_errors[1] - se).abs() < 1e-6);
        assert!(fit.converged);
    }

    #[test]
    fn aic_and_null_identities() {
        let fit = fit_logistic(&two_by_two(), ModelSpec::Trials).unwrap();
        assert!((fit.aic - (2.0 * 2.0 - 2.0 * fit.log_lik)).abs() < 1e-9);
        let expected_null = 20.0 * (0.5f64 * 0.5f64.ln() * 2.0);
        assert!((fit.null_log_lik - expected_null).abs() < 1e-12);
        assert!(fit.pseudo_r2 > 0.0 && fit.pseudo_r2 < 1.0);
    }

    #[test]
    fn constant_response_is_degenerate() {
        let rows: Vec<RegressionRow> = two_by_two().into_iter().map(|r| RegressionRow { y: true, ..r }).collect();
        for spec in ModelSpec::TABLE {
            assert!(matches!(fit_logistic(&rows, spec), Err(FitError::Degenerate(20))));
        }
    }

    #[test]
    fn constant_predictor_is_rank_deficient() {
        // log_space is 0 everywhere, so the centered column vanishes
        assert_eq!(fit_logistic(&two_by_two(), ModelSpec::LogSpace), Err(FitError::RankDeficient));
    }

    #[test]
    fn perfect_separation_is_flagged() {
        let rows: Vec<RegressionRow> = (0..20)
            .map(|i| RegressionRow {
                y: i >= 10,
                log_space: 0.0,
                trials: i as f64,
                rho: 1.0,
            })
            .collect();
        assert!(matches!(
            fit_logistic(&rows, ModelSpec::Trials),
            Err(FitError::NonConvergence { .. })
        ));
    }

    #[test]
    fn planted_coefficients_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
        let ns = [3usize, 4, 5, 6, 7, 8, 10, 12, 14, 16];
        let raw: Vec<(f64, f64)> = (0..5000)
            .map(|_| {
                let n = ns[rng.random_range(0..ns.len())];
                let c = (n * (n - 1) / 2) as f64;
                let t = c.log2().ceil() + rng.random_range(0..6) as f64;
                (c.ln(), t)
            })
            .collect();
        let mean_l = raw.iter().map(|r| r.0).sum::<f64>() / 5000.0;
        let mean_t = raw.iter().map(|r| r.1).sum::<f64>() / 5000.0;
        let beta = [0.0, 1.0, -0.15, 0.05];
        let rows: Vec<RegressionRow> = raw
            .iter()
            .map(|&(l, t)| {
                let (cl, ct) = (l - mean_l, t - mean_t);
                let eta = beta[0] + beta[1] * cl + beta[2] * ct + beta[3] * cl * ct;
                RegressionRow {
                    y: rng.random_bool(sigmoid(eta)),
                    log_space: l,
                    trials: t,
                    rho: t.exp2() / l.exp(),
                }
            })
            .collect();
        let fit = fit_logistic(&rows, ModelSpec::Interaction).unwrap();
        for (got, want) in fit.coefficients.iter().zip(beta) {
            assert!((got - want).abs() < 0.1, "{:?}", fit.coefficients);
        }
        assert!((fit.center("log_space").unwrap() - mean_l).abs() < 1e-12);
    }

    fn fit_with_aic(spec: ModelSpec, aic: f64) -> RegressionFit {
        RegressionFit {
            model_spec: spec,
            terms: vec!["intercept".into(), "x".into()],
            coefficients: vec![0.0, 1.0],
            std_errors: vec![0.1, 0.1],
            wald_p: vec![0.5, 1e-5],
            log_lik: 2.0 - aic / 2.0,
            null_log_lik: -2000.0,
            aic,
            pseudo_r2: 0.1,
            n_obs: 3000,
            converged: true,
            iterations: 5,
            centering: vec![],
        }
    }

    #[test]
    fn comparison_sorts_by_aic() {
        let fits = vec![
            fit_with_aic(ModelSpec::Trials, 3178.55),
            fit_with_aic(ModelSpec::Interaction, 2727.29),
            fit_with_aic(ModelSpec::Additive, 2751.10),
        ];
        let table = compare_models(&fits).unwrap();
        let aics: Vec<f64> = table.rows.iter().map(|r| r.aic).collect();
        assert_eq!(aics, vec![2727.29, 2751.10, 3178.55]);
        assert_eq!(table.best().unwrap().model, "interaction");
        assert_eq!(table.rows[0].wald_p, "< 0.001");

        let single = compare_models(&fits[..1]).unwrap();
        assert_eq!(single.rows.len(), 1);
        assert_eq!(single.rows[0].delta_aic, 0.0);

        let mut odd = fits.clone();
        odd[2].n_obs = 10;
        assert!(matches!(compare_models(&odd), Err(FitError::MismatchedObservations(..))));
    }

    #[test]
    fn comparison_csv_shape() {
        let table = compare_models(&[fit_with_aic(ModelSpec::Rho, 3138.23)]).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "model,formula,AIC,delta_AIC,pseudo_R2,wald_p,max_wald_p,n_obs"
        );
        assert!(lines.next().unwrap().starts_with("rho,Elimination ~ rho,3138.23,0.00,0.100,< 0.001,"));
    }

    #[test]
    fn spec_names_roundtrip() {
        for spec in ModelSpec::TABLE.into_iter().chain([ModelSpec::LogRho]) {
            assert_eq!(spec.as_str().parse::<ModelSpec>().unwrap(), spec);
        }
    }
}
