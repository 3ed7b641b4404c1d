//! Local OpenAI-compatible server with scripted behaviors, for offline runs
//! and tests.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use super::endpoint::{EndpointConfig, WireChoice, WireMessage, WireRequest, WireResponse};
use super::prompt::{parse_rendered_prompt, DIRECT_ANSWER_CLAUSE};
use crate::instance::{check_consistent_pairs, derive_seed, Design};
use crate::logic::{BooleanFunction, FunctionId};
use crate::pair::{all_pairs, choose2, Pair};
use crate::stats::log_hypothesis_space;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockReply {
    Answer { content: String, reasoning: Option<String> },
    /// Respond with this HTTP status and an error body.
    Status(u16),
    /// Sleep before answering, long enough to trip client timeouts.
    Hang(Duration),
    /// 200 with a body that is not a chat completion.
    Garbage,
}

impl MockReply {
    pub fn text(content: impl Into<String>) -> Self {
        MockReply::Answer {
            content: content.into(),
            reasoning: None,
        }
    }
}

/// `call` counts earlier requests with the same prompt, from zero.
pub trait MockBehavior: Send + Sync + 'static {
    fn respond(&self, prompt: &str, call: u32) -> MockReply;
}

impl<F> MockBehavior for F
where
    F: Fn(&str, u32) -> MockReply + Send + Sync + 'static,
{
    fn respond(&self, prompt: &str, call: u32) -> MockReply {
        self(prompt, call)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Narration {
    Permutation,
    Elimination,
    /// Elimination from this many variables upward, pair checking below.
    SwitchAt(usize),
    /// Elimination with probability `sigmoid(intercept + log_space * ln C(N,2) + trials * T)`,
    /// drawn deterministically from the prompt text.
    Logistic { intercept: f64, log_space: f64, trials: f64 },
}

impl Narration {
    fn eliminates(self, prompt: &str, n_vars: usize, n_trials: usize) -> bool {
        match self {
            Narration::Permutation => false,
            Narration::Elimination => true,
            Narration::SwitchAt(n) => n_vars >= n,
            Narration::Logistic {
                intercept,
                log_space,
                trials,
            } => {
                let eta = intercept + log_space * log_hypothesis_space(n_vars) + trials * n_trials as f64;
                let p = 1.0 / (1.0 + (-eta).exp());
                let u = (derive_seed(0, prompt, &[]) >> 11) as f64 / (1u64 << 53) as f64;
                u < p
            }
        }
    }
}

/// Reads the instance back out of the prompt and solves it exactly. Functions
/// listed in `wrong_on` get a deliberately wrong pair.
#[derive(Debug, Clone)]
pub struct OracleModel {
    pub wrong_on: Vec<FunctionId>,
    pub narration: Narration,
}

impl Default for OracleModel {
    fn default() -> Self {
        OracleModel {
            wrong_on: Vec::new(),
            narration: Narration::SwitchAt(8),
        }
    }
}

fn fmt_pair(p: Pair) -> String {
    format!("(V{}, V{})", p.lo(), p.hi())
}

fn narrate_elimination(design: &Design, outputs: &[bool], f: &BooleanFunction, answer: Pair) -> String {
    let n = design.n_vars();
    let mut alive: Vec<Pair> = all_pairs(n).collect();
    let mut out = format!("Start from all {} candidate pairs.", choose2(n));
    for (t, (row, &y)) in design.rows().iter().zip(outputs).enumerate() {
        if alive.len() <= 1 {
            break;
        }
        let before = alive.len();
        alive.retain(|p| {
            f.eval(row[p.lo()], row[p.hi()]) == y || (!f.is_symmetric() && f.eval(row[p.hi()], row[p.lo()]) == y)
        });
        out.push_str(&format!(
            "\nTrial {} eliminates {} pairs, {} remain.",
            t + 1,
            before - alive.len(),
            alive.len()
        ));
    }
    out.push_str(&format!("\nOnly {} remains.", fmt_pair(answer)));
    out
}

fn narrate_permutation(design: &Design, outputs: &[bool], f: &BooleanFunction, answer: Pair) -> String {
    let mut out = String::new();
    for p in all_pairs(design.n_vars()) {
        let fails = |a: usize, b: usize| {
            design
                .rows()
                .iter()
                .zip(outputs)
                .position(|(row, &y)| f.eval(row[a], row[b]) != y)
        };
        let first_fail = match (fails(p.lo(), p.hi()), f.is_symmetric()) {
            (None, _) => None,
            (Some(t), true) => Some(t),
            (Some(t), false) => fails(p.hi(), p.lo()).map(|u| t.max(u)),
        };
        match first_fail {
            Some(t) => out.push_str(&format!("Check pair {}: trial {} contradicts it.\n", fmt_pair(p), t + 1)),
            None => {
                out.push_str(&format!("Check pair {}: consistent with every trial.", fmt_pair(p)));
                break;
            }
        }
        if p == answer {
            break;
        }
    }
    out
}

impl MockBehavior for OracleModel {
    fn respond(&self, prompt: &str, _call: u32) -> MockReply {
        let Some((f, design, outputs)) = parse_rendered_prompt(prompt) else {
            return MockReply::text("I could not read the task.");
        };
        let consistent = check_consistent_pairs(&design, &outputs, &f).unwrap_or_default();
        let Some(&truth) = consistent.iter().next() else {
            return MockReply::text("No pair fits these trials.");
        };
        let wrong = self.wrong_on.contains(&f.id());
        let answer = if wrong {
            all_pairs(design.n_vars()).find(|&p| p != truth).unwrap_or(truth)
        } else {
            truth
        };
        let content = format!("ANSWER: {}", fmt_pair(answer));
        if prompt.contains(DIRECT_ANSWER_CLAUSE) {
            return MockReply::text(content);
        }
        let reasoning = if self.narration.eliminates(prompt, design.n_vars(), design.n_trials()) {
            narrate_elimination(&design, &outputs, &f, answer)
        } else {
            narrate_permutation(&design, &outputs, &f, answer)
        };
        MockReply::Answer {
            content,
            reasoning: Some(reasoning),
        }
    }
}

/// Returns the prompt unchanged.
pub struct Echo;

impl MockBehavior for Echo {
    fn respond(&self, prompt: &str, _call: u32) -> MockReply {
        MockReply::text(prompt)
    }
}

/// Answers 503 for the first `failures` calls on each prompt, then defers.
pub struct Flaky<B> {
    pub failures: u32,
    pub inner: B,
}

impl<B: MockBehavior> MockBehavior for Flaky<B> {
    fn respond(&self, prompt: &str, call: u32) -> MockReply {
        if call < self.failures {
            MockReply::Status(503)
        } else {
            self.inner.respond(prompt, call)
        }
    }
}

/// Strategy judge driven by keywords in the solver's reasoning section.
pub struct KeywordJudge;

impl MockBehavior for KeywordJudge {
    fn respond(&self, prompt: &str, _call: u32) -> MockReply {
        let section = prompt
            .split_once("<<<")
            .and_then(|(_, rest)| rest.split_once(">>>"))
            .map(|(s, _)| s.to_lowercase())
            .unwrap_or_default();
        let verdict = if section.contains("eliminat") || section.contains("remain") {
            "ELIMINATION"
        } else if section.contains("check pair") || section.contains("try pair") {
            "PERMUTATION"
        } else {
            "INVALID"
        };
        MockReply::text(format!("Judged from the reasoning trace.\n{verdict}"))
    }
}

struct MockState {
    behavior: Box<dyn MockBehavior>,
    calls: Mutex<HashMap<String, u32>>,
    requests: AtomicU64,
}

async fn completions(State(state): State<Arc<MockState>>, Json(req): Json<WireRequest>) -> Response {
    state.requests.fetch_add(1, Ordering::SeqCst);
    let prompt = req
        .messages
        .iter()
        .rev()
        .find(|m| m.role == "user")
        .and_then(|m| m.content.clone())
        .unwrap_or_default();
    let call = {
        let mut calls = state.calls.lock().expect("mock call table poisoned");
        let c = calls.entry(prompt.clone()).or_insert(0);
        *c += 1;
        *c - 1
    };
    let mut reply = state.behavior.respond(&prompt, call);
    if let MockReply::Hang(d) = reply {
        tokio::time::sleep(d).await;
        reply = MockReply::text("late reply");
    }
    match reply {
        MockReply::Answer { content, reasoning } => Json(WireResponse {
            choices: vec![WireChoice {
                message: WireMessage {
                    role: "assistant".into(),
                    content: Some(content),
                    reasoning_content: reasoning,
                    reasoning: None,
                },
            }],
        })
        .into_response(),
        MockReply::Status(code) => (
            StatusCode::from_u16(code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
            "scripted failure",
        )
            .into_response(),
        MockReply::Garbage => (StatusCode::OK, "this is not json").into_response(),
        MockReply::Hang(_) => unreachable!(),
    }
}

/// Running mock server; shuts down when dropped.
pub struct MockServer {
    addr: SocketAddr,
    state: Arc<MockState>,
    shutdown: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Binds an ephemeral port on 127.0.0.1. Must be called inside a tokio runtime.
    pub async fn start(behavior: impl MockBehavior) -> std::io::Result<MockServer> {
        let state = Arc::new(MockState {
            behavior: Box::new(behavior),
            calls: Mutex::new(HashMap::new()),
            requests: AtomicU64::new(0),
        });
        let app = Router::new()
            .route("/v1/chat/completions", post(completions))
            .with_state(state.clone());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
        Ok(MockServer {
            addr,
            state,
            shutdown: Some(tx),
            task: Some(task),
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    /// Endpoint settings pointing at this server.
    pub fn config(&self, model_name: &str) -> EndpointConfig {
        EndpointConfig {
            base_url: self.base_url(),
            model_name: model_name.to_string(),
            timeout_ms: 10_000,
            backoff_base_ms: 5,
            ..Default::default()
        }
    }

    pub fn request_count(&self) -> u64 {
        self.state.requests.load(Ordering::SeqCst)
    }

    pub async fn stop(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}
