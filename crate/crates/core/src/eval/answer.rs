use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::EvalRecord;
use crate::instance::VatInstance;
use crate::pair::Pair;

static ANSWER_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)answer\s*:\s*\(\s*v\s*(\d+)\s*,\s*v\s*(\d+)\s*\)").expect("valid regex"));

/// Extracts the last `ANSWER: (Vi, Vj)` occurrence. Returns `None` when
/// there is none, or when the indices repeat or fall outside `0..n_vars`.
pub fn parse_answer(response: &str, n_vars: usize) -> Option<Pair> {
    let caps = ANSWER_LINE.captures_iter(response).last()?;
    let i: usize = caps[1].parse().ok()?;
    let j: usize = caps[2].parse().ok()?;
    if i >= n_vars || j >= n_vars {
        return None;
    }
    Pair::new(i, j)
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("record is for instance `{record}` but was graded against `{instance}`")]
pub struct GradeError {
    pub record: String,
    pub instance: String,
}

/// True iff the parsed answer equals the truth pair; unparsed answers grade false.
pub fn grade(record: &EvalRecord, instance: &VatInstance) -> Result<bool, GradeError> {
    if record.instance_id != instance.instance_id {
        return Err(GradeError {
            record: record.instance_id.clone(),
            instance: instance.instance_id.clone(),
        });
    }
    Ok(record.parsed_answer == Some(instance.truth_pair))
}
