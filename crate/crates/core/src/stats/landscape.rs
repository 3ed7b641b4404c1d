//! Fitted probability of choosing elimination over `(log C(N,2), T)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::log_hypothesis_space;
use super::regression::{ModelSpec, RegressionFit};

/// Coefficients of the centered interaction model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeModel {
    pub intercept: f64,
    pub log_space: f64,
    pub trials: f64,
    pub interaction: f64,
    pub mean_log_space: f64,
    pub mean_trials: f64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LandscapeError {
    #[error("decision landscape needs the interaction model, got `{0}`")]
    WrongModel(ModelSpec),
    #[error("empty N or T range")]
    EmptyRange,
}

impl LandscapeModel {
    pub fn from_fit(fit: &RegressionFit) -> Result<Self, LandscapeError> {
        if fit.model_spec != ModelSpec::Interaction {
            return Err(LandscapeError::WrongModel(fit.model_spec));
        }
        let coef = |t: &str| fit.coefficient(t).ok_or(LandscapeError::WrongModel(fit.model_spec));
        let center = |p: &str| fit.center(p).ok_or(LandscapeError::WrongModel(fit.model_spec));
        Ok(LandscapeModel {
            intercept: coef("intercept")?,
            log_space: coef("log_space")?,
            trials: coef("trials")?,
            interaction: coef("log_space:trials")?,
            mean_log_space: center("log_space")?,
            mean_trials: center("trials")?,
        })
    }

    pub fn linear_predictor(&self, log_space: f64, trials: f64) -> f64 {
        let l = log_space - self.mean_log_space;
        let t = trials - self.mean_trials;
        self.intercept + self.log_space * l + self.trials * t + self.interaction * l * t
    }

    pub fn probability(&self, log_space: f64, trials: f64) -> f64 {
        1.0 / (1.0 + (-self.linear_predictor(log_space, trials)).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeCell {
    pub n_vars: usize,
    pub trials: usize,
    pub log_space: f64,
    pub probability: f64,
}

/// A point on the 50% boundary. `n_vars` is continuous: it solves
/// `C(n,2) = exp(log_space)` for the interpolated log-space value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourPoint {
    pub n_vars: f64,
    pub log_space: f64,
    pub trials: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub n_values: Vec<usize>,
    pub t_values: Vec<usize>,
    /// Row-major over `t_values`, then `n_values`.
    pub cells: Vec<LandscapeCell>,
    pub contour: Vec<ContourPoint>,
}

impl Landscape {
    pub fn at(&self, n_index: usize, t_index: usize) -> &LandscapeCell {
        &self.cells[t_index * self.n_values.len() + n_index]
    }
}

fn n_from_log_space(log_space: f64) -> f64 {
    let c = log_space.exp();
    (1.0 + (1.0 + 8.0 * c).sqrt()) / 2.0
}

pub fn decision_landscape(
    model: &LandscapeModel,
    n_values: &[usize],
    t_values: &[usize],
) -> Result<Landscape, LandscapeError> {
    if n_values.is_empty() || t_values.is_empty() {
        return Err(LandscapeError::EmptyRange);
    }
    let mut cells = Vec::with_capacity(n_values.len() * t_values.len());
    for &t in t_values {
        for &n in n_values {
            let log_space = log_hypothesis_space(n);
            cells.push(LandscapeCell {
                n_vars: n,
                trials: t,
                log_space,
                probability: model.probability(log_space, t as f64),
            });
        }
    }
    let mut landscape = Landscape {
        n_values: n_values.to_vec(),
        t_values: t_values.to_vec(),
        cells,
        contour: Vec::new(),
    };

    // crossings along N within each T row
    for ti in 0..t_values.len() {
        for ni in 1..n_values.len() {
            let (a, b) = (landscape.at(ni - 1, ti), landscape.at(ni, ti));
            if let Some(frac) = crossing(a.probability, b.probability) {
                let log_space = a.log_space + frac * (b.log_space - a.log_space);
                landscape.contour.push(ContourPoint {
                    n_vars: n_from_log_space(log_space),
                    log_space,
                    trials: a.trials as f64,
                });
            }
        }
    }
    // crossings along T within each N column
    for ni in 0..n_values.len() {
        for ti in 1..t_values.len() {
            let (a, b) = (landscape.at(ni, ti - 1), landscape.at(ni, ti));
            if let Some(frac) = crossing(a.probability, b.probability) {
                landscape.contour.push(ContourPoint {
                    n_vars: a.n_vars as f64,
                    log_space: a.log_space,
                    trials: a.trials as f64 + frac * (b.trials as f64 - a.trials as f64),
                });
            }
        }
    }
    Ok(landscape)
}

/// Fraction along `[a, b]` where the probability passes 0.5, linear in logit.
fn crossing(pa: f64, pb: f64) -> Option<f64> {
    let logit = |p: f64| (p / (1.0 - p)).ln();
    let (la, lb) = (logit(pa), logit(pb));
    ((la < 0.0) != (lb < 0.0)).then(|| la / (la - lb))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reported_signs() -> LandscapeModel {
        LandscapeModel {
            intercept: 0.2,
            log_space: 1.0212,
            trials: -0.1466,
            interaction: 0.03,
            mean_log_space: 3.0,
            mean_trials: 7.0,
        }
    }

    #[test]
    fn centering_identity() {
        let m = reported_signs();
        let expect = 1.0 / (1.0 + (-m.intercept).exp());
        assert!((m.probability(m.mean_log_space, m.mean_trials) - expect).abs() < 1e-15);
    }

    #[test]
    fn single_cell_grid() {
        let l = decision_landscape(&reported_signs(), &[6], &[5]).unwrap();
        assert_eq!(l.cells.len(), 1);
        assert!(l.contour.is_empty());
        assert!(decision_landscape(&reported_signs(), &[], &[5]).is_err());
    }

    #[test]
    fn contour_points_sit_on_half() {
        let m = LandscapeModel {
            intercept: 0.0,
            ..reported_signs()
        };
        let ns: Vec<usize> = (3..=16).collect();
        let ts: Vec<usize> = (2..=12).collect();
        let l = decision_landscape(&m, &ns, &ts).unwrap();
        assert!(!l.contour.is_empty());
        for p in &l.contour {
            // the logit is linear along each axis, so interpolation is exact
            let prob = m.probability(p.log_space, p.trials);
            assert!((prob - 0.5).abs() < 1e-9, "{p:?} -> {prob}");
            assert!((log_hypothesis_space_continuous(p.n_vars) - p.log_space).abs() < 1e-9);
        }
    }

    fn log_hypothesis_space_continuous(n: f64) -> f64 {
        (n * (n - 1.0) / 2.0).ln()
    }

    #[test]
    fn crossing_detection() {
        assert_eq!(crossing(0.4, 0.45), None);
        let f = crossing(0.4, 0.6).unwrap();
        assert!((f - 0.5).abs() < 1e-12);
    }
}
