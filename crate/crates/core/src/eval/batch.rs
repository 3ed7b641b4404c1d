use std::path::PathBuf;
use std::sync::mpsc;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use chrono::{SecondsFormat, Utc};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;

use super::answer::parse_answer;
use super::endpoint::{ChatEndpoint, ChatReply, EndpointConfig, EndpointError};
use super::prompt::PromptRendering;
use super::transcript::{TranscriptError, TranscriptLog};
use super::{EvalRecord, RecordStatus};
use crate::instance::VatInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Answer,
    Judge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptOutcome {
    Ok,
    Retryable,
    Fatal,
}

/// Raw result of one endpoint call, logged before anything is parsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptEntry {
    pub phase: Phase,
    pub instance_id: String,
    pub model_name: String,
    pub attempt: u32,
    pub outcome: AttemptOutcome,
    pub response_text: Option<String>,
    pub reasoning_text: Option<String>,
    pub error: Option<String>,
    pub at: String,
}

#[derive(Debug, Clone)]
pub struct BatchItem {
    pub instance: VatInstance,
    pub prompt: PromptRendering,
}

pub(crate) fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

type Message = (AttemptEntry, oneshot::Sender<()>);

/// Single writer thread that owns the attempts log.
pub(crate) struct AttemptSink {
    tx: Option<mpsc::Sender<Message>>,
    worker: Option<JoinHandle<Result<(), TranscriptError>>>,
}

impl AttemptSink {
    pub(crate) fn open(path: Option<PathBuf>) -> Self {
        let Some(path) = path else {
            return AttemptSink { tx: None, worker: None };
        };
        let (tx, rx) = mpsc::channel::<Message>();
        let worker = std::thread::spawn(move || {
            let log = TranscriptLog::<AttemptEntry>::new(path);
            let mut first_err = None;
            for (entry, ack) in rx {
                if first_err.is_none() {
                    if let Err(e) = log.append(&entry) {
                        first_err = Some(e);
                    }
                }
                let _ = ack.send(());
            }
            first_err.map_or(Ok(()), Err)
        });
        AttemptSink {
            tx: Some(tx),
            worker: Some(worker),
        }
    }

    pub(crate) fn handle(&self) -> SinkHandle {
        SinkHandle { tx: self.tx.clone() }
    }

    pub(crate) fn close(mut self) -> Result<(), TranscriptError> {
        drop(self.tx.take());
        match self.worker.take() {
            Some(w) => w.join().expect("transcript writer panicked"),
            None => Ok(()),
        }
    }
}

#[derive(Clone)]
pub(crate) struct SinkHandle {
    tx: Option<mpsc::Sender<Message>>,
}

impl SinkHandle {
    /// Resolves once the writer has handled the entry.
    async fn record(&self, entry: AttemptEntry) {
        if let Some(tx) = &self.tx {
            let (ack, done) = oneshot::channel();
            if tx.send((entry, ack)).is_ok() {
                let _ = done.await;
            }
        }
    }
}

/// Calls the endpoint with retries and exponential backoff, logging each attempt.
pub(crate) async fn call_with_retries(
    endpoint: &dyn ChatEndpoint,
    prompt: &str,
    config: &EndpointConfig,
    sink: &SinkHandle,
    phase: Phase,
    instance_id: &str,
) -> (Result<ChatReply, EndpointError>, u32) {
    let max_attempts = config.max_retries + 1;
    let mut attempt = 0;
    loop {
        attempt += 1;
        let result = match tokio::time::timeout(Duration::from_millis(config.timeout_ms), endpoint.complete(prompt)).await
        {
            Ok(r) => r,
            Err(_) => Err(EndpointError::Timeout),
        };
        let (outcome, response_text, reasoning_text, error) = match &result {
            Ok(reply) => (AttemptOutcome::Ok, Some(reply.content.clone()), reply.reasoning.clone(), None),
            Err(e) if e.is_retryable() => (AttemptOutcome::Retryable, None, None, Some(e.to_string())),
            Err(e) => (AttemptOutcome::Fatal, None, None, Some(e.to_string())),
        };
        sink.record(AttemptEntry {
            phase,
            instance_id: instance_id.to_string(),
            model_name: endpoint.model_name().to_string(),
            attempt,
            outcome,
            response_text,
            reasoning_text,
            error,
            at: now(),
        })
        .await;
        match result {
            Err(e) if e.is_retryable() && attempt < max_attempts => {
                log::debug!("{instance_id}: attempt {attempt} failed ({e}), retrying");
                tokio::time::sleep(config.backoff(attempt)).await;
            }
            other => return (other, attempt),
        }
    }
}

async fn run_item(item: BatchItem, endpoint: &dyn ChatEndpoint, config: &EndpointConfig, sink: &SinkHandle) -> EvalRecord {
    let started_at = now();
    let (result, attempts) = call_with_retries(
        endpoint,
        &item.prompt.text,
        config,
        sink,
        Phase::Answer,
        &item.instance.instance_id,
    )
    .await;
    let mut record = EvalRecord {
        instance_id: item.instance.instance_id.clone(),
        model_name: endpoint.model_name().to_string(),
        template_version: item.prompt.template_version,
        mode: item.prompt.mode,
        prompt: item.prompt.text,
        response_text: String::new(),
        reasoning_text: String::new(),
        char_count_total: 0,
        parsed_answer: None,
        unparsed: true,
        correct: false,
        judge_label: None,
        judge_flagged: false,
        status: RecordStatus::Failed,
        error: None,
        attempt_count: attempts,
        temperature: config.temperature,
        started_at,
        finished_at: String::new(),
    };
    match result {
        Ok(reply) => {
            let reasoning = reply.reasoning.unwrap_or_default();
            record.char_count_total = EvalRecord::char_count(&reasoning, &reply.content);
            record.parsed_answer = parse_answer(&reply.content, item.instance.n_vars());
            record.unparsed = record.parsed_answer.is_none();
            record.correct = record.parsed_answer == Some(item.instance.truth_pair);
            record.response_text = reply.content;
            record.reasoning_text = reasoning;
            record.status = RecordStatus::Completed;
        }
        Err(e) => {
            log::warn!("{}: giving up after {attempts} attempt(s): {e}", record.instance_id);
            record.error = Some(e.to_string());
        }
    }
    record.finished_at = now();
    record
}

/// Sends every prompt with at most `config.max_in_flight` requests open.
/// Records come back in input order; endpoint failures become `Failed`
/// records instead of aborting the batch.
pub async fn run_batch(
    items: Vec<BatchItem>,
    endpoint: Arc<dyn ChatEndpoint>,
    config: &EndpointConfig,
    attempts_log: Option<PathBuf>,
) -> Result<Vec<EvalRecord>, TranscriptError> {
    let sink = AttemptSink::open(attempts_log);
    let handle = sink.handle();
    let records = stream::iter(items)
        .map(|item| {
            let endpoint = endpoint.clone();
            let handle = handle.clone();
            async move { run_item(item, endpoint.as_ref(), config, &handle).await }
        })
        .buffered(config.max_in_flight.max(1))
        .collect::<Vec<_>>()
        .await;
    drop(handle);
    sink.close()?;
    Ok(records)
}
