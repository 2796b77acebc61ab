//! Zero-shot, knowledge-guided generation of questionnaire tables.
//!
//! A persona is sampled per synthetic patient; the patient then answers the
//! questionnaire one item at a time through a language model backend, with
//! clinical snippets retrieved from the knowledge base (unless running in
//! [`KbMode::NoKb`]) and the previous answers carried in every prompt. No
//! real patient record is consulted anywhere in this module except by the
//! [`random_baseline`], which only reads demographic marginals.

pub mod backend;
pub mod baseline;
pub mod knowledge;
pub mod parse;
pub mod persona;
pub mod pipeline;
pub mod prompt;

pub use backend::{BackendConfig, BackendError, ChatMessage, ChatRequest, FnBackend, HttpBackend, LlmBackend, MockBackend};
pub use baseline::random_baseline;
pub use knowledge::{build_kb, load_kb_manifest, retrieve, KbError, KbMode, KbSource, KnowledgeFile, KnowledgeIndex, KnowledgeSnippet};
pub use parse::{parse_reply, parse_score, ParseError};
pub use persona::{sample_persona, Persona, PersonaConfig, PersonaError, PersonaOverrides};
pub use pipeline::{generate_dataset, generate_patient, GeneratedDataset, GenerationConfig, GenerationError, PatientLog, PatientStatus, RunLog};
pub use prompt::{build_prompt, ConversationState};
