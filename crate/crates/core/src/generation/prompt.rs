//! Prompt assembly for one questionnaire item.

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::knowledge::KnowledgeSnippet;
use super::persona::Persona;
use crate::table::DisorderSchema;

pub const SYSTEM_PROMPT: &str = "You role-play a single patient completing a psychiatric self-report \
questionnaire. Stay in character, answer from the patient's point of view, and follow the response \
format exactly.";

/// Labels for the default 0..=4 frequency scale.
const FREQUENCY_LABELS: [&str; 5] = ["never", "occasionally", "half of the time", "most of the time", "all of the time"];

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("item `{requested}` requested but the next unanswered item is `{expected}`")]
    ItemOutOfOrder { requested: String, expected: String },
}

/// One answered item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub item_id: String,
    pub score: i64,
    pub text: String,
}

/// Everything the prompt for the next item depends on.
#[derive(Debug, Clone)]
pub struct ConversationState<'a> {
    pub persona: &'a Persona,
    pub disorder: &'a DisorderSchema,
    /// Answers so far, a prefix of the schema's item order.
    pub answered: Vec<Answer>,
    /// Snippets retrieved for the current item; empty without retrieval.
    pub knowledge_context: Vec<KnowledgeSnippet>,
}

impl<'a> ConversationState<'a> {
    pub fn new(persona: &'a Persona, disorder: &'a DisorderSchema) -> Self {
        Self {
            persona,
            disorder,
            answered: Vec::new(),
            knowledge_context: Vec::new(),
        }
    }

    pub fn next_item(&self) -> Option<usize> {
        (self.answered.len() < self.disorder.n_items()).then_some(self.answered.len())
    }
}

/// Human-readable legend for a Likert domain.
pub fn likert_legend(domain: &[i64]) -> String {
    if domain == [0, 1, 2, 3, 4] {
        FREQUENCY_LABELS
            .iter()
            .enumerate()
            .map(|(i, l)| format!("{i}={l}"))
            .collect::<Vec<_>>()
            .join(", ")
    } else {
        let values: Vec<String> = domain.iter().map(|v| v.to_string()).collect();
        format!("one of {}", values.join(", "))
    }
}

/// Default formatting instructions for a Likert domain.
pub fn format_instructions(domain: &[i64]) -> String {
    let values: Vec<String> = domain.iter().map(|v| v.to_string()).collect();
    format!(
        "Answer in character in one to three sentences. Then finish with a final line of the form \
`SCORE: <digit>`, where <digit> is one of {}. Write nothing after that line.",
        values.join(", ")
    )
}

/// Builds the prompt for `item_id`, which must be the next unanswered item.
///
/// Blocks in order: patient characteristics, knowledge context (only when
/// snippets were retrieved), the current item with its scale, the memory of
/// previous answers, and the formatting instructions.
pub fn build_prompt(
    state: &ConversationState<'_>,
    item_id: &str,
    format_instructions: &str,
) -> Result<String, PromptError> {
    let schema = state.disorder;
    let expected = state.next_item().map(|i| schema.item_ids()[i].as_str());
    if expected != Some(item_id) {
        return Err(PromptError::ItemOutOfOrder {
            requested: item_id.to_string(),
            expected: expected.unwrap_or("<none>").to_string(),
        });
    }
    let position = state.answered.len();
    let p = state.persona;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "You are a patient completing the {} self-report severity measure.\n",
        schema.disorder_name()
    );
    out.push_str("## Patient characteristics\n");
    let _ = writeln!(out, "- Sex: {}", p.sex);
    let _ = writeln!(out, "- Age: {}", p.age);
    let _ = writeln!(out, "- Severity prior: {}", p.severity_prior);
    let _ = writeln!(out, "- Response style: {}", p.response_style);
    let _ = writeln!(out, "- Symptom awareness: {}", p.symptom_awareness);
    let _ = writeln!(out, "- Communication style: {}", p.communication_style);
    let _ = writeln!(out, "- Consistency level: {:.2}", p.consistency_level);

    if !state.knowledge_context.is_empty() {
        out.push_str("\n## Knowledge context\n");
        for (i, s) in state.knowledge_context.iter().enumerate() {
            let _ = writeln!(out, "[{}] ({}) {}", i + 1, s.source, s.text.replace('\n', " "));
        }
    }

    let _ = writeln!(out, "\n## Current item ({} of {})", position + 1, schema.n_items());
    let _ = writeln!(out, "{}", schema.item_texts()[position]);
    let _ = writeln!(out, "Scale: {}", likert_legend(schema.likert_domain()));

    out.push_str("\n## Previous answers\n");
    if state.answered.is_empty() {
        out.push_str("(none yet)\n");
    }
    for (a, text) in state.answered.iter().zip(schema.item_texts()) {
        let _ = writeln!(out, "- {}: {}", text, a.score);
    }

    out.push_str("\n## Response format\n");
    out.push_str(format_instructions);
    out.push('\n');
    Ok(out)
}

/// Appended to the prompt when the previous reply could not be scored.
pub fn reprompt_suffix(reason: &str, domain: &[i64]) -> String {
    let values: Vec<String> = domain.iter().map(|v| v.to_string()).collect();
    format!(
        "\nYour previous reply could not be scored ({reason}). Reply again and end with a line \
`SCORE: <digit>` using one of {}.\n",
        values.join(", ")
    )
}
