use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Design, VatInstance};
use crate::logic::BooleanFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    Reasoning,
    /// Baseline that asks for the answer line alone.
    DirectAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRendering {
    pub instance_id: String,
    pub mode: PromptMode,
    pub text: String,
    pub template_version: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template is empty")]
    Empty,
    #[error("template lacks the `{{{0}}}` slot")]
    MissingSlot(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub version: String,
    pub body: String,
}

const REQUIRED_SLOTS: [&str; 4] = ["variables", "trials", "function", "answer_format"];

pub const ANSWER_INSTRUCTION: &str =
    "End your response with a final line of exactly this form, naming the two variables:\nANSWER: (Vi, Vj)";
pub const DIRECT_ANSWER_CLAUSE: &str =
    "Output only the final answer line. Do not include any explanation or intermediate reasoning.";

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            version: "vat-prompt-v1".to_string(),
            body: "\
You are given {n_vars} candidate binary variables: {variables}.
Exactly two of these variables, called A and B (in an unknown order), determine the output Y through a known logical function. The other variables are irrelevant.

{function}

Observed trials:
{trials}

Which two variables determine Y?
{answer_format}
"
            .to_string(),
        }
    }
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<(), TemplateError> {
        if self.body.trim().is_empty() {
            return Err(TemplateError::Empty);
        }
        for slot in REQUIRED_SLOTS {
            if !self.body.contains(&format!("{{{slot}}}")) {
                return Err(TemplateError::MissingSlot(slot));
            }
        }
        Ok(())
    }
}

fn bit(b: bool) -> char {
    if b {
        '1'
    } else {
        '0'
    }
}

fn describe_function(f: &BooleanFunction) -> String {
    let mut out = format!("Function: Y = {}\nTruth table (A, B -> Y):", f.name());
    for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
        out.push_str(&format!("\n{}, {} -> {}", bit(a), bit(b), bit(f.eval(a, b))));
    }
    out
}

fn render_trials(design: &Design, outputs: &[bool]) -> String {
    design
        .rows()
        .iter()
        .zip(outputs)
        .enumerate()
        .map(|(t, (row, &y))| {
            let inputs: Vec<String> = row.iter().enumerate().map(|(v, &x)| format!("V{v}={}", bit(x))).collect();
            format!("Trial {}: {} → Y={}", t + 1, inputs.join(", "), bit(y))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_prompt(
    instance: &VatInstance,
    mode: PromptMode,
    template: &PromptTemplate,
) -> Result<PromptRendering, TemplateError> {
    template.validate()?;
    let n = instance.n_vars();
    let variables = (0..n).map(|v| format!("V{v}")).collect::<Vec<_>>().join(", ");
    let mut text = template
        .body
        .replace("{n_vars}", &n.to_string())
        .replace("{variables}", &variables)
        .replace("{function}", &describe_function(&instance.function))
        .replace("{trials}", &render_trials(&instance.design, &instance.outputs))
        .replace("{answer_format}", ANSWER_INSTRUCTION);
    if mode == PromptMode::DirectAnswer {
        if !text.ends_with('\n') {
            text.push('\n');
        }
        text.push_str(DIRECT_ANSWER_CLAUSE);
        text.push('\n');
    }
    Ok(PromptRendering {
        instance_id: instance.instance_id.clone(),
        mode,
        text,
        template_version: template.version.clone(),
    })
}

/// Recovers the function, design and outputs from a prompt produced by
/// [`render_prompt`]. Used by the mock endpoint to answer without side channels.
pub fn parse_rendered_prompt(text: &str) -> Option<(BooleanFunction, Design, Vec<bool>)> {
    let function: BooleanFunction = text
        .lines()
        .find_map(|l| l.strip_prefix("Function: Y = "))?
        .parse()
        .ok()?;
    let mut rows = Vec::new();
    let mut outputs = Vec::new();
    for line in text.lines().filter(|l| l.starts_with("Trial ")) {
        let (_, body) = line.split_once(": ")?;
        let (inputs, y) = body.split_once(" → Y=")?;
        let row = inputs
            .split(", ")
            .map(|cell| match cell.split_once('=')?.1 {
                "0" => Some(false),
                "1" => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<bool>>>()?;
        rows.push(row);
        outputs.push(match y.trim() {
            "0" => false,
            "1" => true,
            _ => return None,
        });
    }
    let n = rows.first().map(Vec::len)?;
    let design = Design::new(n, rows).ok()?;
    Some((function, design, outputs))
}
