//! The per-patient conversational loop and dataset assembly.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::backend::{BackendError, ChatMessage, ChatRequest, LlmBackend};
use super::knowledge::{retrieve, KbError, KbMode, KnowledgeIndex, DEFAULT_TOP_K};
use super::parse::parse_reply;
use super::persona::{sample_persona, Persona, PersonaConfig, PersonaError};
use super::prompt::{build_prompt, format_instructions, reprompt_suffix, Answer, ConversationState, SYSTEM_PROMPT};
use crate::rng::derive_seed;
use crate::table::{CategoricalTable, Code, ColumnKind, DisorderSchema, TableError};

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("patient generation failed at item `{item_id}` after {retries} retries: {reason}")]
    PatientGenerationFailed {
        item_id: String,
        retries: usize,
        reason: String,
    },
    #[error(transparent)]
    Knowledge(#[from] KbError),
    #[error(transparent)]
    Persona(#[from] PersonaError),
    #[error("persona value `{0}` is outside the schema domain")]
    PersonaOutsideSchema(String),
    #[error("n_patients must be at least 1")]
    NoPatients,
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub mode: KbMode,
    /// Snippets retrieved per item.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Re-prompts allowed per item after an unparseable reply.
    #[serde(default = "default_retries")]
    pub max_retries: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    /// Patients generated concurrently (bounds requests in flight).
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_k() -> usize {
    DEFAULT_TOP_K
}

fn default_retries() -> usize {
    2
}

fn default_temperature() -> f64 {
    0.7
}

fn default_max_tokens() -> u32 {
    256
}

fn default_in_flight() -> usize {
    4
}

impl GenerationConfig {
    pub fn new(mode: KbMode) -> Self {
        Self {
            mode,
            k: default_k(),
            max_retries: default_retries(),
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
            max_in_flight: default_in_flight(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemLog {
    pub item_id: String,
    pub score: i64,
    /// Free-text answer preceding the score line.
    pub answer: String,
    pub retries: usize,
    pub snippet_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PatientStatus {
    Completed,
    Failed { item_id: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientLog {
    pub patient_index: usize,
    pub persona: Persona,
    #[serde(flatten)]
    pub status: PatientStatus,
    pub total_retries: usize,
    pub items: Vec<ItemLog>,
}

/// A completed patient: coded table row plus its log.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientOutcome {
    pub row: Vec<Code>,
    pub log: PatientLog,
}

fn persona_codes(persona: &Persona, schema: &DisorderSchema) -> Result<Vec<Code>, GenerationError> {
    let mut row = Vec::with_capacity(schema.n_columns());
    for spec in &schema.columns()[..schema.first_item_column()] {
        let token = match spec.kind {
            ColumnKind::Sex => persona.sex.clone(),
            ColumnKind::Age => persona.age.to_string(),
            ColumnKind::Item => unreachable!("demographic block holds no items"),
        };
        let code = spec
            .code_of(&token)
            .ok_or_else(|| GenerationError::PersonaOutsideSchema(token.clone()))?;
        row.push(code);
    }
    Ok(row)
}

/// Runs the item-by-item conversation for one persona.
///
/// Items are asked strictly in schema order, each prompt carrying the
/// answers given so far. A reply without a valid score line is re-prompted
/// up to `max_retries` times; backend transport errors abort immediately.
pub fn generate_patient(
    persona: &Persona,
    schema: &DisorderSchema,
    backend: &dyn LlmBackend,
    index: Option<&KnowledgeIndex>,
    config: &GenerationConfig,
    patient_index: usize,
) -> Result<PatientOutcome, GenerationError> {
    if config.mode != KbMode::NoKb && index.is_none() {
        return Err(KbError::IndexNotBuilt.into());
    }
    let mut row = persona_codes(persona, schema)?;
    let instructions = format_instructions(schema.likert_domain());
    let mut state = ConversationState::new(persona, schema);
    let mut items = Vec::with_capacity(schema.n_items());
    for (i, (item_id, item_text)) in schema.item_ids().iter().zip(schema.item_texts()).enumerate() {
        state.knowledge_context = if config.mode == KbMode::NoKb {
            Vec::new()
        } else {
            let query = format!("{} {}", schema.disorder_name(), item_text);
            retrieve(index, &query, config.k, config.mode)?
        };
        let prompt = build_prompt(&state, item_id, &instructions).expect("items visited in order");
        let mut attempt = 0;
        let mut correction = String::new();
        let parsed = loop {
            let content = format!("{prompt}{correction}");
            let request = ChatRequest {
                messages: vec![ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(content)],
                temperature: config.temperature,
                max_tokens: config.max_tokens,
                seed: Some(derive_seed(persona.rng_seed, (i * (config.max_retries + 1) + attempt) as u64)),
                patient_index,
                item_index: i,
                attempt,
            };
            let reply = backend.complete(&request)?;
            match parse_reply(&reply, schema.likert_domain()) {
                Ok(p) => break p,
                Err(e) if attempt < config.max_retries => {
                    log::debug!("patient {patient_index} item {item_id}: {e}; re-prompting");
                    attempt += 1;
                    correction = reprompt_suffix(&e.to_string(), schema.likert_domain());
                }
                Err(e) => {
                    return Err(GenerationError::PatientGenerationFailed {
                        item_id: item_id.clone(),
                        retries: attempt,
                        reason: e.to_string(),
                    })
                }
            }
        };
        let code = schema.likert_code(parsed.score).expect("parser enforces the domain");
        row.push(code);
        items.push(ItemLog {
            item_id: item_id.clone(),
            score: parsed.score,
            answer: parsed.text.clone(),
            retries: attempt,
            snippet_ids: state.knowledge_context.iter().map(|s| s.id()).collect(),
        });
        state.answered.push(Answer {
            item_id: item_id.clone(),
            score: parsed.score,
            text: parsed.text,
        });
    }
    let total_retries = items.iter().map(|i| i.retries).sum();
    Ok(PatientOutcome {
        row,
        log: PatientLog {
            patient_index,
            persona: persona.clone(),
            status: PatientStatus::Completed,
            total_retries,
            items,
        },
    })
}

/// Per-run log written next to the generated CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub disorder: String,
    pub kb_mode: KbMode,
    pub master_seed: u64,
    pub n_requested: usize,
    pub n_generated: usize,
    pub shortfall: usize,
    pub config: GenerationConfig,
    pub patients: Vec<PatientLog>,
}

#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub table: CategoricalTable,
    pub log: RunLog,
}

impl GeneratedDataset {
    pub fn shortfall(&self) -> usize {
        self.log.shortfall
    }
}

/// Seed of patient `index`'s persona under `master_seed`.
pub fn patient_seed(master_seed: u64, index: usize) -> u64 {
    derive_seed(master_seed, index as u64)
}

/// Generates `n_patients` rows. Patients whose conversation fails are
/// skipped and logged; backend outages abort the run.
pub fn generate_dataset(
    n_patients: usize,
    schema: &Arc<DisorderSchema>,
    backend: &dyn LlmBackend,
    index: Option<&KnowledgeIndex>,
    config: &GenerationConfig,
    personas: &PersonaConfig,
    master_seed: u64,
) -> Result<GeneratedDataset, GenerationError> {
    if n_patients == 0 {
        return Err(GenerationError::NoPatients);
    }
    if config.mode != KbMode::NoKb && index.is_none() {
        return Err(KbError::IndexNotBuilt.into());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.max_in_flight.max(1))
        .build()
        .map_err(|e| GenerationError::ThreadPool(e.to_string()))?;
    let results: Vec<Result<Result<PatientOutcome, PatientLog>, GenerationError>> = pool.install(|| {
        (0..n_patients)
            .into_par_iter()
            .map(|i| {
                let persona = sample_persona(personas, patient_seed(master_seed, i))?;
                match generate_patient(&persona, schema, backend, index, config, i) {
                    Ok(outcome) => Ok(Ok(outcome)),
                    Err(GenerationError::PatientGenerationFailed { item_id, retries, reason }) => {
                        log::warn!("patient {i} skipped at item {item_id} after {retries} retries: {reason}");
                        Ok(Err(PatientLog {
                            patient_index: i,
                            persona,
                            status: PatientStatus::Failed { item_id, reason },
                            total_retries: retries,
                            items: Vec::new(),
                        }))
                    }
                    Err(other) => Err(other),
                }
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut patients = Vec::with_capacity(n_patients);
    for r in results {
        match r? {
            Ok(outcome) => {
                rows.push(outcome.row);
                patients.push(outcome.log);
            }
            Err(failed) => patients.push(failed),
        }
    }
    let n_generated = rows.len();
    if n_generated < n_patients {
        log::warn!("generated {n_generated} of {n_patients} patients");
    }
    let table = CategoricalTable::from_code_rows(Arc::clone(schema), rows)?;
    Ok(GeneratedDataset {
        table,
        log: RunLog {
            disorder: schema.disorder_name().to_string(),
            kb_mode: config.mode,
            master_seed,
            n_requested: n_patients,
            n_generated,
            shortfall: n_patients - n_generated,
            config: config.clone(),
            patients,
        },
    })
}
