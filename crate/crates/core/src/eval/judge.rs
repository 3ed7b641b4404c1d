use std::path::PathBuf;
use std::sync::Arc;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use super::batch::{call_with_retries, AttemptSink, Phase, SinkHandle};
use super::endpoint::{ChatEndpoint, EndpointConfig, EndpointError};
use super::prompt::TemplateError;
use super::transcript::TranscriptError;
use super::{EvalRecord, JudgeLabel, RecordStatus};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeTemplate {
    pub version: String,
    pub body: String,
}

impl Default for JudgeTemplate {
    fn default() -> Self {
        JudgeTemplate {
            version: "vat-judge-v1".to_string(),
            body: "\
You will read a solver's work on a task: find which two of several binary variables determine an output through a known logical function, given a table of trials.

Classify the solving strategy.
PERMUTATION: the solver proposes one candidate pair at a time and checks it against the trials, moving to the next candidate when a trial contradicts it.
ELIMINATION: the solver keeps the whole set of candidate pairs and goes through the trials, discarding every pair that a trial rules out until one remains.
INVALID: neither strategy is identifiable, for example a guess, an empty trace or an unrelated method.

Solver reasoning:
<<<
{reasoning}
>>>

Solver final response:
<<<
{response}
>>>

Explain briefly, then give your verdict alone on the last line: PERMUTATION, ELIMINATION or INVALID.
"
            .to_string(),
        }
    }
}

impl JudgeTemplate {
    pub fn validate(&self) -> Result<(), TemplateError> {
        if self.body.trim().is_empty() {
            return Err(TemplateError::Empty);
        }
        for slot in ["reasoning", "response"] {
            if !self.body.contains(&format!("{{{slot}}}")) {
                return Err(TemplateError::MissingSlot(slot));
            }
        }
        Ok(())
    }

    pub fn render(&self, record: &EvalRecord) -> Result<String, TemplateError> {
        self.validate()?;
        Ok(self
            .body
            .replace("{reasoning}", &record.reasoning_text)
            .replace("{response}", &record.response_text))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub label: JudgeLabel,
    /// The reply had no recognizable verdict line.
    pub flagged: bool,
}

/// Reads the verdict token from the last non-empty line of a judge reply.
pub fn parse_verdict(reply: &str) -> Verdict {
    let last = reply.lines().map(str::trim).rfind(|l| !l.is_empty()).unwrap_or("");
    let mut token = last.trim_matches(|c: char| c == '*' || c == '`' || c == '.' || c.is_whitespace());
    if let Some(rest) = token.strip_prefix("VERDICT:").or_else(|| token.strip_prefix("Verdict:")) {
        token = rest.trim_matches(|c: char| c == '*' || c == '`' || c == '.' || c.is_whitespace());
    }
    match JudgeLabel::ALL.into_iter().find(|l| l.token() == token) {
        Some(label) => Verdict { label, flagged: false },
        None => Verdict {
            label: JudgeLabel::Invalid,
            flagged: true,
        },
    }
}

async fn judge_one(
    record: &EvalRecord,
    judge: &dyn ChatEndpoint,
    template: &JudgeTemplate,
    config: &EndpointConfig,
    sink: &SinkHandle,
) -> Result<Verdict, EndpointError> {
    let prompt = template.render(record).map_err(|e| EndpointError::Fatal(e.to_string()))?;
    let (result, _) = call_with_retries(judge, &prompt, config, sink, Phase::Judge, &record.instance_id).await;
    Ok(parse_verdict(&result?.content))
}

/// Asks the judge to classify the strategy in one record.
pub async fn judge_strategy(
    record: &EvalRecord,
    judge: &dyn ChatEndpoint,
    template: &JudgeTemplate,
    config: &EndpointConfig,
) -> Result<Verdict, EndpointError> {
    judge_one(record, judge, template, config, &AttemptSink::open(None).handle()).await
}

/// Labels every completed record. Records the judge could not be reached for
/// keep `judge_label = None` and are flagged.
pub async fn judge_batch(
    records: Vec<EvalRecord>,
    judge: Arc<dyn ChatEndpoint>,
    template: &JudgeTemplate,
    config: &EndpointConfig,
    attempts_log: Option<PathBuf>,
) -> Result<Vec<EvalRecord>, TranscriptError> {
    let sink = AttemptSink::open(attempts_log);
    let handle = sink.handle();
    let out = stream::iter(records)
        .map(|mut record| {
            let judge = judge.clone();
            let handle = handle.clone();
            async move {
                if record.status != RecordStatus::Completed {
                    return record;
                }
                match judge_one(&record, judge.as_ref(), template, config, &handle).await {
                    Ok(v) => {
                        record.judge_label = Some(v.label);
                        record.judge_flagged = v.flagged;
                    }
                    Err(e) => {
                        log::warn!("{}: judge failed: {e}", record.instance_id);
                        record.judge_label = None;
                        record.judge_flagged = true;
                    }
                }
                record
            }
        })
        .buffered(config.max_in_flight.max(1))
        .collect::<Vec<_>>()
        .await;
    drop(handle);
    sink.close()?;
    Ok(out)
}
