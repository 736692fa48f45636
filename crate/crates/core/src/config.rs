//! TOML ingestion with field-path error messages.
//!
//! Every table rejects unknown keys. Core types deserialize through their
//! validating constructors, so a bad value is reported at its path, e.g.
//! `source.probs: probabilities sum to 0.9`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::likelihood::LikelihoodInstance;
use crate::prob::{ConditionalTable, FiniteDistribution, SynsetPartition};
use crate::rdp::DistortionMatrix;
use crate::svi::DiscreteLatentModel;
use crate::{Error, Result};

/// Parses `text` into `T`, prefixing any error with the offending field path.
pub fn from_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.message().to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let msg = e.into_inner().message().to_string();
        Error::Config(if path == "." { msg } else { format!("{path}: {msg}") })
    })
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Config(e.to_string()))
}

/// `"hamming"` or an explicit matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistortionSpec {
    Named(String),
    Matrix(DistortionMatrix),
}

impl DistortionSpec {
    pub fn build(&self, n: usize) -> Result<DistortionMatrix> {
        match self {
            Self::Named(name) if name == "hamming" => Ok(DistortionMatrix::hamming(n)),
            Self::Named(name) => Err(Error::Config(format!("unknown distortion \"{name}\""))),
            Self::Matrix(m) if m.n_rows() != n => Err(Error::DimensionMismatch {
                what: "distortion rows",
                expected: n,
                got: m.n_rows(),
            }),
            Self::Matrix(m) => Ok(m.clone()),
        }
    }
}

impl Default for DistortionSpec {
    fn default() -> Self {
        Self::Named("hamming".into())
    }
}

/// Flat description of a [`DiscreteLatentModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentModelSpec {
    pub source: FiniteDistribution,
    pub blocks: Vec<Vec<usize>>,
    pub enc_syn: ConditionalTable,
    /// One table per source symbol, rows indexed by the synonymous latent.
    pub enc_det: Vec<ConditionalTable>,
    pub prior_syn: FiniteDistribution,
    pub dec_lik: ConditionalTable,
}

impl LatentModelSpec {
    pub fn build(&self) -> Result<DiscreteLatentModel> {
        DiscreteLatentModel::new(
            self.source.clone(),
            SynsetPartition::new(self.blocks.clone(), self.source.len())?,
            self.enc_syn.clone(),
            self.enc_det.clone(),
            self.prior_syn.clone(),
            self.dec_lik.clone(),
        )
    }

    pub fn from_model(m: &DiscreteLatentModel) -> Self {
        Self {
            source: m.source().clone(),
            blocks: m.partition().blocks().to_vec(),
            enc_syn: m.enc_syn().clone(),
            enc_det: m.enc_det().to_vec(),
            prior_syn: m.prior_syn().clone(),
            dec_lik: m.dec_lik().clone(),
        }
    }
}

/// Source, model distribution and partition for the likelihood analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LikelihoodSpec {
    pub source: FiniteDistribution,
    pub model: FiniteDistribution,
    pub blocks: Vec<Vec<usize>>,
}

impl LikelihoodSpec {
    pub fn build(&self) -> Result<LikelihoodInstance> {
        LikelihoodInstance::new(
            self.source.clone(),
            self.model.clone(),
            SynsetPartition::new(self.blocks.clone(), self.source.len())?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Doc {
        source: FiniteDistribution,
        #[serde(default)]
        distortion: DistortionSpec,
    }

    #[test]
    fn errors_carry_field_paths() {
        let e = from_toml::<Doc>("[source]\nprobs = [0.5, 0.4]\n").unwrap_err();
        assert!(e.to_string().contains("source"), "{e}");
        let e = from_toml::<Doc>("[source]\nprobs = [0.5, 0.5]\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        let e = from_toml::<Doc>("[source]\nprobs = [0.5, 0.5]\n[extra]\n").unwrap_err();
        assert!(e.to_string().contains("extra"), "{e}");
    }

    #[test]
    fn distortion_forms() {
        let d: Doc = from_toml("distortion = \"hamming\"\n[source]\nprobs = [0.5, 0.5]\n").unwrap();
        assert_eq!(d.distortion.build(d.source.len()).unwrap(), DistortionMatrix::hamming(2));
        let d: Doc = from_toml("distortion = [[0.0, 2.0], [1.0, 0.0]]\n[source]\nprobs = [0.5, 0.5]\n").unwrap();
        assert_eq!(d.distortion.build(2).unwrap().get(0, 1), 2.0);
        assert!(d.distortion.build(3).is_err());
        assert!(DistortionSpec::Named("l1".into()).build(2).is_err());
    }

    #[test]
    fn latent_model_round_trip() {
        let text = r#"
source = { probs = [0.5, 0.25, 0.25] }
blocks = [[0, 1], [2]]
enc_syn = [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
enc_det = [[[0.5, 0.5], [0.5, 0.5]], [[0.5, 0.5], [0.5, 0.5]], [[0.5, 0.5], [0.5, 0.5]]]
prior_syn = { probs = [0.75, 0.25] }
dec_lik = [[1.0, 0.0], [0.0, 1.0]]
"#;
        let spec: LatentModelSpec = from_toml(text).unwrap();
        let model = spec.build().unwrap();
        assert_eq!(LatentModelSpec::from_model(&model), spec);
        let again: LatentModelSpec = from_toml(&to_toml(&spec).unwrap()).unwrap();
        assert_eq!(again, spec);
    }
}
