//! Chance-corrected agreement between two labelers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// `confusion[i][j]`: items labeled `i` by the first rater and `j` by the second.
    pub confusion: Vec<Vec<u64>>,
    pub accuracy: f64,
    pub expected_agreement: f64,
    /// `None` when chance agreement is already 1 and kappa is undefined.
    pub kappa: Option<f64>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AgreementError {
    #[error("confusion matrix must be square and non-empty")]
    NotSquare,
    #[error("confusion matrix has no observations")]
    ZeroTotal,
    #[error("label index {0} outside the {1} categories")]
    LabelOutOfRange(usize, usize),
}

pub fn cohen_kappa(confusion: &[Vec<u64>]) -> Result<AgreementReport, AgreementError> {
    let k = confusion.len();
    if k == 0 || confusion.iter().any(|row| row.len() != k) {
        return Err(AgreementError::NotSquare);
    }
    let total: u64 = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(AgreementError::ZeroTotal);
    }
    let n = total as f64;
    let diagonal: u64 = (0..k).map(|i| confusion[i][i]).sum();
    let accuracy = diagonal as f64 / n;
    let expected_agreement: f64 = (0..k)
        .map(|i| {
            let row: u64 = confusion[i].iter().sum();
            let col: u64 = confusion.iter().map(|r| r[i]).sum();
            (row as f64 / n) * (col as f64 / n)
        })
        .sum();
    let denom = 1.0 - expected_agreement;
    let kappa = (denom.abs() > f64::EPSILON).then(|| (accuracy - expected_agreement) / denom);
    Ok(AgreementReport {
        confusion: confusion.to_vec(),
        accuracy,
        expected_agreement,
        kappa,
    })
}

/// Tallies paired category indices into a `categories x categories` matrix.
pub fn confusion_from_labels(
    pairs: impl IntoIterator<Item = (usize, usize)>,
    categories: usize,
) -> Result<Vec<Vec<u64>>, AgreementError> {
    let mut m = vec![vec![0u64; categories]; categories];
    for (a, b) in pairs {
        if a >= categories || b >= categories {
            return Err(AgreementError::LabelOutOfRange(a.max(b), categories));
        }
        m[a][b] += 1;
    }
    Ok(m)
}
