//! Evaluation pipeline: prompt rendering, chat-completion batches against a
//! real or mock endpoint, answer grading, strategy judging and transcripts.

mod answer;
mod batch;
mod endpoint;
mod judge;
pub mod mock;
mod prompt;
mod transcript;

pub use answer::{grade, parse_answer, GradeError};
pub use batch::{run_batch, AttemptEntry, AttemptOutcome, BatchItem, Phase};
pub use endpoint::{ChatEndpoint, ChatReply, EndpointConfig, EndpointError, HttpEndpoint};
pub use judge::{judge_batch, judge_strategy, parse_verdict, JudgeTemplate, Verdict};
pub use prompt::{
    parse_rendered_prompt, render_prompt, PromptMode, PromptRendering, PromptTemplate, TemplateError,
};
pub use transcript::{TranscriptError, TranscriptLog};

use serde::{Deserialize, Serialize};

use crate::pair::Pair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeLabel {
    Permutation,
    Elimination,
    Invalid,
}

impl JudgeLabel {
    pub const ALL: [JudgeLabel; 3] = [JudgeLabel::Permutation, JudgeLabel::Elimination, JudgeLabel::Invalid];

    pub fn token(self) -> &'static str {
        match self {
            JudgeLabel::Permutation => "PERMUTATION",
            JudgeLabel::Elimination => "ELIMINATION",
            JudgeLabel::Invalid => "INVALID",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Completed,
    /// Retries exhausted or the endpoint reply was unusable.
    Failed,
}

/// One graded model response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub instance_id: String,
    pub model_name: String,
    pub template_version: String,
    pub mode: PromptMode,
    pub prompt: String,
    pub response_text: String,
    pub reasoning_text: String,
    /// Characters of reasoning plus final output.
    pub char_count_total: usize,
    /// `None` when the response held no usable answer line.
    pub parsed_answer: Option<Pair>,
    pub unparsed: bool,
    pub correct: bool,
    /// `None` until judged.
    pub judge_label: Option<JudgeLabel>,
    /// Set when the judge reply carried no verdict token.
    pub judge_flagged: bool,
    pub status: RecordStatus,
    pub error: Option<String>,
    pub attempt_count: u32,
    pub temperature: Option<f64>,
    pub started_at: String,
    pub finished_at: String,
}

impl EvalRecord {
    pub fn char_count(reasoning: &str, response: &str) -> usize {
        reasoning.chars().count() + response.chars().count()
    }
}
