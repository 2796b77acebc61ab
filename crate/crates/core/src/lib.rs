//! Knowledge-guided synthetic questionnaire data and its evaluation.
//!
//! The crate has two halves that meet at [`CategoricalTable`]:
//!
//! * [`generation`] produces synthetic tables by letting a language model
//!   role-play sampled personas, optionally grounded in retrieved clinical
//!   text, plus a random chance-level baseline.
//! * [`fidelity`], [`privacy`], [`resampling`] and [`selection`] compare any
//!   synthetic table with a real one: marginal, pairwise and joint fidelity;
//!   record-level disclosure proxies; bootstrap intervals and paired deltas;
//!   and privacy-gated selection among externally trained candidates.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod cli;
pub mod error;
pub mod fidelity;
pub mod generation;
pub mod privacy;
pub mod resampling;
pub mod rng;
pub mod selection;
pub mod table;

pub use error::MetricError;
pub use fidelity::{cramers_v_bias_corrected, energy_distance_sq, fidelity_report, jsd, mae_v, mean_jsd, FidelityReport};
pub use privacy::{exact_overlap, k_map_risk, near_match_share, nn_distances, privacy_report, quantile, PrivacyReport};
pub use resampling::{bootstrap_delta, metric_ci, DeltaEstimate, FidelityMetric};
pub use selection::{score_candidate, select, CandidateRecord, CandidateScores, GateConfig, SelectionMode};
pub use table::{empirical_pmf, load_table, stratified_split, CategoricalTable, DisorderSchema, EmpiricalPmf};
