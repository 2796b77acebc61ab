//! Synthetic patient personas: demographics plus a latent response profile.

use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream_rng;
use crate::table::DisorderSchema;

#[derive(Debug, Error, PartialEq)]
pub enum PersonaError {
    #[error("empty domain for `{0}`")]
    EmptyDomain(&'static str),
    #[error("invalid weights for `{0}`")]
    InvalidWeights(&'static str),
    #[error("invalid consistency range [{0}, {1}]")]
    InvalidConsistency(f64, f64),
}

macro_rules! trait_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }

            pub fn from_label(label: &str) -> Option<Self> {
                match label {
                    $($label => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }
    };
}

trait_enum!(
    /// Overall symptom burden the patient tends to report.
    SeverityPrior { Minimal => "minimal", Mild => "mild", Moderate => "moderate", Severe => "severe" }
);
trait_enum!(ResponseStyle { Understating => "understating", Balanced => "balanced", Dramatizing => "dramatizing" });
trait_enum!(SymptomAwareness { Low => "low", Medium => "medium", High => "high" });
trait_enum!(CommunicationStyle { Terse => "terse", Conversational => "conversational", Detailed => "detailed" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub sex: String,
    pub age: u32,
    pub severity_prior: SeverityPrior,
    pub response_style: ResponseStyle,
    pub symptom_awareness: SymptomAwareness,
    pub communication_style: CommunicationStyle,
    pub consistency_level: f64,
    /// Seed forwarded to the language model for this patient.
    pub rng_seed: u64,
}

/// A finite domain with optional sampling weights (uniform when absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weighted<T> {
    pub values: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl<T: Clone> Weighted<T> {
    pub fn uniform(values: Vec<T>) -> Self {
        Self { values, weights: None }
    }

    fn check(&self, name: &'static str) -> Result<(), PersonaError> {
        if self.values.is_empty() {
            return Err(PersonaError::EmptyDomain(name));
        }
        if let Some(w) = &self.weights {
            let valid = w.len() == self.values.len()
                && w.iter().all(|x| x.is_finite() && *x >= 0.0)
                && w.iter().sum::<f64>() > 0.0;
            if !valid {
                return Err(PersonaError::InvalidWeights(name));
            }
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R, name: &'static str) -> Result<T, PersonaError> {
        self.check(name)?;
        let i = match &self.weights {
            None => rng.random_range(0..self.values.len()),
            Some(w) => WeightedIndex::new(w)
                .map_err(|_| PersonaError::InvalidWeights(name))?
                .sample(rng),
        };
        Ok(self.values[i].clone())
    }
}

/// Distribution personas are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaConfig {
    pub sex: Weighted<String>,
    pub age: Weighted<u32>,
    pub severity_prior: Weighted<SeverityPrior>,
    pub response_style: Weighted<ResponseStyle>,
    pub symptom_awareness: Weighted<SymptomAwareness>,
    pub communication_style: Weighted<CommunicationStyle>,
    /// Inclusive range for the uniformly drawn consistency level.
    pub consistency_range: (f64, f64),
}

impl PersonaConfig {
    /// Uniform over the schema's sex and age domains and every trait level.
    pub fn uniform(schema: &DisorderSchema) -> Self {
        Self {
            sex: Weighted::uniform(schema.sex_domain().to_vec()),
            age: Weighted::uniform(schema.age_domain().to_vec()),
            severity_prior: Weighted::uniform(SeverityPrior::ALL.to_vec()),
            response_style: Weighted::uniform(ResponseStyle::ALL.to_vec()),
            symptom_awareness: Weighted::uniform(SymptomAwareness::ALL.to_vec()),
            communication_style: Weighted::uniform(CommunicationStyle::ALL.to_vec()),
            consistency_range: (0.0, 1.0),
        }
    }

    pub fn with_overrides(mut self, o: &PersonaOverrides) -> Self {
        if let Some(v) = &o.sex {
            self.sex = v.clone();
        }
        if let Some(v) = &o.age {
            self.age = v.clone();
        }
        if let Some(v) = &o.severity_prior {
            self.severity_prior = v.clone();
        }
        if let Some(v) = &o.response_style {
            self.response_style = v.clone();
        }
        if let Some(v) = &o.symptom_awareness {
            self.symptom_awareness = v.clone();
        }
        if let Some(v) = &o.communication_style {
            self.communication_style = v.clone();
        }
        if let Some(v) = o.consistency_range {
            self.consistency_range = v;
        }
        self
    }
}

/// Partial persona distribution, as found in run configuration files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonaOverrides {
    pub sex: Option<Weighted<String>>,
    pub age: Option<Weighted<u32>>,
    pub severity_prior: Option<Weighted<SeverityPrior>>,
    pub response_style: Option<Weighted<ResponseStyle>>,
    pub symptom_awareness: Option<Weighted<SymptomAwareness>>,
    pub communication_style: Option<Weighted<CommunicationStyle>>,
    pub consistency_range: Option<(f64, f64)>,
}

pub fn sample_persona(config: &PersonaConfig, seed: u64) -> Result<Persona, PersonaError> {
    let (lo, hi) = config.consistency_range;
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(PersonaError::InvalidConsistency(lo, hi));
    }
    let mut rng = stream_rng(seed, 0);
    Ok(Persona {
        sex: config.sex.sample(&mut rng, "sex")?,
        age: config.age.sample(&mut rng, "age")?,
        severity_prior: config.severity_prior.sample(&mut rng, "severity_prior")?,
        response_style: config.response_style.sample(&mut rng, "response_style")?,
        symptom_awareness: config.symptom_awareness.sample(&mut rng, "symptom_awareness")?,
        communication_style: config.communication_style.sample(&mut rng, "communication_style")?,
        consistency_level: if lo == hi { lo } else { rng.random_range(lo..=hi) },
        rng_seed: rng.random(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> PersonaConfig {
        PersonaConfig::uniform(&DisorderSchema::new("d", vec!["it1".into()]).unwrap())
    }

    #[test]
    fn deterministic_for_seed() {
        let c = config();
        assert_eq!(sample_persona(&c, 11).unwrap(), sample_persona(&c, 11).unwrap());
        assert_ne!(sample_persona(&c, 11).unwrap(), sample_persona(&c, 12).unwrap());
    }

    #[test]
    fn singleton_domains_force_the_persona() {
        let c = PersonaConfig {
            sex: Weighted::uniform(vec!["male".into()]),
            age: Weighted::uniform(vec![44]),
            severity_prior: Weighted::uniform(vec![SeverityPrior::Severe]),
            response_style: Weighted::uniform(vec![ResponseStyle::Balanced]),
            symptom_awareness: Weighted::uniform(vec![SymptomAwareness::Low]),
            communication_style: Weighted::uniform(vec![CommunicationStyle::Terse]),
            consistency_range: (0.8, 0.8),
        };
        for seed in 0..20 {
            let p = sample_persona(&c, seed).unwrap();
            assert_eq!((p.sex.as_str(), p.age, p.severity_prior), ("male", 44, SeverityPrior::Severe));
            assert_eq!(p.consistency_level, 0.8);
            assert_eq!(p.communication_style, CommunicationStyle::Terse);
        }
    }

    #[test]
    fn uniform_sex_is_balanced() {
        let c = config();
        let female = (0..10_000)
            .filter(|&s| sample_persona(&c, s).unwrap().sex == "female")
            .count();
        let frac = female as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&frac), "{frac}");
    }

    #[test]
    fn weights_are_respected() {
        let mut c = config();
        c.severity_prior = Weighted {
            values: SeverityPrior::ALL.to_vec(),
            weights: Some(vec![0.0, 0.0, 0.0, 1.0]),
        };
        assert!((0..200).all(|s| sample_persona(&c, s).unwrap().severity_prior == SeverityPrior::Severe));
    }

    #[test]
    fn invalid_configs() {
        let mut c = config();
        c.age = Weighted::uniform(vec![]);
        assert_eq!(sample_persona(&c, 0), Err(PersonaError::EmptyDomain("age")));
        let mut c = config();
        c.sex.weights = Some(vec![1.0]);
        assert_eq!(sample_persona(&c, 0), Err(PersonaError::InvalidWeights("sex")));
        let mut c = config();
        c.consistency_range = (0.9, 0.1);
        assert!(matches!(sample_persona(&c, 0), Err(PersonaError::InvalidConsistency(..))));
    }

    #[test]
    fn overrides_replace_only_given_fields() {
        let o: PersonaOverrides =
            serde_json::from_str(r#"{"severity_prior":{"values":["mild","severe"],"weights":[3,1]}}"#).unwrap();
        let c = config().with_overrides(&o);
        assert_eq!(c.severity_prior.values, vec![SeverityPrior::Mild, SeverityPrior::Severe]);
        assert_eq!(c.sex, config().sex);
    }
}
