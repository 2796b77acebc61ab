//! Privacy-gated selection among externally trained candidate generators.
//!
//! Each candidate is a sample drawn from a model trained on the train split.
//! It is scored for fidelity against the tune split and for privacy against
//! the train split; the lowest-JSD candidate passing every gate wins, and
//! when none passes a lexicographic fallback decides.

use std::cmp::Ordering;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::MetricError;
use crate::fidelity::mean_jsd;
use crate::privacy::{exact_overlap, nn_distances, quantile, share_within};
use crate::table::CategoricalTable;

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("no candidates to select from")]
    EmptyCandidateList,
    #[error("invalid gate configuration: {0}")]
    InvalidGates(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("manifest: {0}")]
    Manifest(String),
}

/// Tuning-time proxy scores of one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScores {
    pub jsd: f64,
    pub eo: f64,
    pub near_share_le1: f64,
    pub q05_ham: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub candidate_id: String,
    pub sample_path: PathBuf,
    pub scores: CandidateScores,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub eo_max: f64,
    pub near_share_max: f64,
    pub q05_ham_min: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            eo_max: 0.01,
            near_share_max: 0.10,
            q05_ham_min: 1.0,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<(), SelectionError> {
        let ok = self.eo_max.is_finite()
            && self.near_share_max.is_finite()
            && self.q05_ham_min.is_finite()
            && (0.0..=1.0).contains(&self.eo_max)
            && (0.0..=1.0).contains(&self.near_share_max);
        if ok {
            Ok(())
        } else {
            Err(SelectionError::InvalidGates(format!("{self:?}")))
        }
    }

    pub fn passes(&self, s: &CandidateScores) -> bool {
        s.eo <= self.eo_max && s.near_share_le1 <= self.near_share_max && s.q05_ham >= self.q05_ham_min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    Gated,
    Fallback,
}

/// Scores a candidate sample: fidelity against `d_tune`, privacy against
/// `d_train` (raw Hamming for the q05 proxy).
pub fn score_candidate(
    candidate: &CategoricalTable,
    d_train: &CategoricalTable,
    d_tune: &CategoricalTable,
) -> Result<CandidateScores, MetricError> {
    if candidate.n_rows() != d_tune.n_rows() {
        log::warn!(
            "candidate has {} rows, tune split has {}",
            candidate.n_rows(),
            d_tune.n_rows()
        );
    }
    let jsd = mean_jsd(d_tune, candidate)?;
    let eo = exact_overlap(candidate, d_train)?;
    let nn = nn_distances(candidate, d_train)?;
    let raw: Vec<f64> = nn.iter().map(|d| d.hamming as f64).collect();
    Ok(CandidateScores {
        jsd,
        eo,
        near_share_le1: share_within(&nn, 1),
        q05_ham: quantile(&raw, 0.05)?,
    })
}

fn fallback_order(a: &CandidateRecord, b: &CandidateRecord) -> Ordering {
    let (x, y) = (&a.scores, &b.scores);
    x.eo.total_cmp(&y.eo)
        .then(x.near_share_le1.total_cmp(&y.near_share_le1))
        .then(y.q05_ham.total_cmp(&x.q05_ham))
        .then(x.jsd.total_cmp(&y.jsd))
        .then_with(|| a.candidate_id.cmp(&b.candidate_id))
}

fn gated_order(a: &CandidateRecord, b: &CandidateRecord) -> Ordering {
    a.scores
        .jsd
        .total_cmp(&b.scores.jsd)
        .then_with(|| a.candidate_id.cmp(&b.candidate_id))
}

/// Picks the winner among scored candidates.
///
/// Ties at every stage are broken by ascending `candidate_id`.
pub fn select<'a>(
    candidates: &'a [CandidateRecord],
    gates: &GateConfig,
) -> Result<(&'a CandidateRecord, SelectionMode), SelectionError> {
    gates.validate()?;
    if candidates.is_empty() {
        return Err(SelectionError::EmptyCandidateList);
    }
    if let Some(best) = candidates.iter().filter(|c| gates.passes(&c.scores)).min_by(|a, b| gated_order(a, b)) {
        return Ok((best, SelectionMode::Gated));
    }
    let best = candidates.iter().min_by(|a, b| fallback_order(a, b)).expect("non-empty");
    Ok((best, SelectionMode::Fallback))
}

/// One manifest entry: a candidate id and the CSV sampled from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub candidate_id: String,
    pub sample_path: PathBuf,
}

/// Reads a candidate manifest; relative sample paths resolve against the
/// manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>, SelectionError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| SelectionError::Manifest(format!("{}: {e}", path.display())))?;
    let mut entries: Vec<ManifestEntry> =
        serde_json::from_reader(file).map_err(|e| SelectionError::Manifest(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    for e in &mut entries {
        if e.sample_path.is_relative() {
            e.sample_path = base.join(&e.sample_path);
        }
    }
    let mut ids: Vec<&str> = entries.iter().map(|e| e.candidate_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(SelectionError::Manifest(format!("duplicate candidate id `{}`", w[0])));
    }
    Ok(entries)
}
