//! Experiment configuration file.
//!
//! ```toml
//! seed = 42
//! distortion = "hamming"          # or an explicit matrix
//!
//! [source]
//! probs = [0.5, 0.25, 0.25]
//!
//! [partition]
//! blocks = [[0, 1], [2]]
//!
//! [codec]
//! n = 100000
//! sampler = "strict"              # or "free": uniform over the alphabet
//!
//! [sweep]
//! d_targets = [0.05, 0.1, 0.2, 0.3, 0.4]
//! p_targets = [0.0, 0.02, inf]
//! ```
//!
//! `[solver]`, `[latent_model]`, `[likelihood]` and `[output]` are optional.
//! Missing latent and likelihood models are drawn from the seed.

use std::path::PathBuf;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use synrdp::codec::{CodecModel, SamplerMode};
use synrdp::config::{DistortionSpec, LatentModelSpec, LikelihoodSpec};
use synrdp::likelihood::LikelihoodInstance;
use synrdp::svi::DiscreteLatentModel;
use synrdp::{random, DistortionMatrix, FiniteDistribution, SolverConfig, SynsetPartition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub source: FiniteDistribution,
    pub partition: PartitionSection,
    #[serde(default)]
    pub distortion: DistortionSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub codec: CodecSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub latent_model: Option<LatentModelSpec>,
    #[serde(default)]
    pub likelihood: Option<LikelihoodSpec>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    pub blocks: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecSection {
    pub n: usize,
    pub sampler: SamplerMode,
}

impl Default for CodecSection {
    fn default() -> Self {
        Self {
            n: 100_000,
            sampler: SamplerMode::Strict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub d_targets: Vec<f64>,
    pub p_targets: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            d_targets: vec![0.05, 0.1, 0.2, 0.3, 0.4],
            p_targets: vec![0.0, 0.005, 0.02, 0.1, f64::INFINITY],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// Fully validated inputs shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub seed: u64,
    pub source: FiniteDistribution,
    pub partition: SynsetPartition,
    pub distortion: DistortionMatrix,
    pub solver: SolverConfig,
    pub codec: CodecSection,
    pub sweep: SweepSection,
    pub latent_model: DiscreteLatentModel,
    pub likelihood: LikelihoodInstance,
}

/// Error with the offending field path.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn at(path: &str) -> impl Fn(synrdp::Error) -> ConfigError + '_ {
    move |e| ConfigError(format!("{path}: {e}"))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        synrdp::config::from_toml(text).map_err(|e| match e {
            synrdp::Error::Config(msg) => ConfigError(msg),
            other => ConfigError(other.to_string()),
        })
    }

    /// Source `(0.5, 0.25, 0.25)` with synsets `{0,1}, {2}`.
    pub fn canonical() -> Self {
        Self {
            seed: 0,
            source: FiniteDistribution::new(vec![0.5, 0.25, 0.25]).expect("valid"),
            partition: PartitionSection {
                blocks: vec![vec![0, 1], vec![2]],
            },
            distortion: DistortionSpec::default(),
            solver: SolverConfig::default(),
            codec: CodecSection::default(),
            sweep: SweepSection::default(),
            latent_model: None,
            likelihood: None,
            output: OutputSection::default(),
        }
    }

    pub fn build(&self, seed: u64) -> Result<Experiment, ConfigError> {
        let n = self.source.len();
        let partition = SynsetPartition::new(self.partition.blocks.clone(), n).map_err(at("partition.blocks"))?;
        let distortion = self.distortion.build(n).map_err(at("distortion"))?;
        let mut solver = self.solver.clone();
        solver.seed = seed;
        solver.validate().map_err(at("solver"))?;
        if self.codec.n == 0 {
            return Err(ConfigError("codec.n: must be >= 1".into()));
        }
        for (name, grid) in [("sweep.d_targets", &self.sweep.d_targets), ("sweep.p_targets", &self.sweep.p_targets)] {
            if grid.is_empty() {
                return Err(ConfigError(format!("{name}: grid is empty")));
            }
            if let Some(v) = grid.iter().find(|v| v.is_nan() || **v < 0.0) {
                return Err(ConfigError(format!("{name}: {v} is not a non-negative target")));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let latent_model = match &self.latent_model {
            Some(spec) => spec.build().map_err(at("latent_model"))?,
            None => {
                let ny_s = partition.num_blocks() + 1;
                DiscreteLatentModel::new(
                    self.source.clone(),
                    partition.clone(),
                    random::table(&mut rng, n, ny_s),
                    (0..n).map(|_| random::table(&mut rng, ny_s, 2)).collect(),
                    random::distribution(&mut rng, ny_s),
                    random::table(&mut rng, ny_s, partition.num_blocks()),
                )
                .map_err(at("latent_model"))?
            }
        };
        let likelihood = match &self.likelihood {
            Some(spec) => spec.build().map_err(at("likelihood"))?,
            None => LikelihoodInstance::new(self.source.clone(), random::distribution(&mut rng, n), partition.clone())
                .map_err(at("likelihood"))?,
        };

        Ok(Experiment {
            seed,
            source: self.source.clone(),
            partition,
            distortion,
            solver,
            codec: self.codec.clone(),
            sweep: self.sweep.clone(),
            latent_model,
            likelihood,
        })
    }
}

impl Experiment {
    pub fn codec_model(&self) -> synrdp::Result<CodecModel> {
        let m = CodecModel::new(self.source.clone(), self.partition.clone(), self.seed)?;
        match self.codec.sampler {
            SamplerMode::Strict => Ok(m),
            SamplerMode::Free => m.with_uniform_sampler(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[source]\nprobs = [0.5, 0.25, 0.25]\n[partition]\nblocks = [[0, 1], [2]]\n";

    #[test]
    fn defaults_fill_optional_sections() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let mut canon = ExperimentConfig::canonical();
        canon.seed = 0;
        assert_eq!(cfg, canon);
        let exp = cfg.build(7).unwrap();
        assert_eq!(exp.solver.seed, 7);
        assert_eq!(exp.latent_model.source(), &exp.source);
    }

    #[test]
    fn unknown_keys_and_bad_values_name_their_field() {
        let e = ExperimentConfig::parse(&format!("{MINIMAL}[codec]\nsamples = 3\n")).unwrap_err();
        assert!(e.0.contains("codec") && e.0.contains("samples"), "{e}");
        let e = ExperimentConfig::parse("[source]\nprobs = [0.5, 0.6]\n[partition]\nblocks = [[0, 1]]\n").unwrap_err();
        assert!(e.0.starts_with("source"), "{e}");
        let bad = ExperimentConfig::parse("[source]\nprobs = [0.5, 0.5]\n[partition]\nblocks = [[0]]\n").unwrap();
        assert!(bad.build(0).unwrap_err().0.starts_with("partition.blocks"));
        let empty = ExperimentConfig::parse(&format!("{MINIMAL}[sweep]\nd_targets = []\n")).unwrap();
        assert!(empty.build(0).unwrap_err().0.starts_with("sweep.d_targets"));
    }

    #[test]
    fn infinite_perception_targets_parse() {
        let cfg = ExperimentConfig::parse(&format!("{MINIMAL}[sweep]\np_targets = [0.0, inf]\n")).unwrap();
        assert_eq!(cfg.sweep.p_targets, vec![0.0, f64::INFINITY]);
    }
}
