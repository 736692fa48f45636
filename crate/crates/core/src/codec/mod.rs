//! Synonymous source codec.
//!
//! The encoder keeps only the synset (block) index of each sample and
//! range-codes it against the static block distribution. The decoder recovers
//! the block sequence exactly and draws a detail symbol from
//! `detail_sampler(. | block)`.

mod bitstream;
mod range_coder;

pub use bitstream::{BitStream, Header, MAGIC, VERSION};
pub use range_coder::{FrequencyTable, RangeDecoder, RangeEncoder, DEFAULT_TOTAL};

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::prob::{
    mutual_information, semantic_entropy, single_side_semantic_mi, ConditionalTable, FiniteDistribution, JointDistribution,
    SynsetPartition, VALIDATION_TOL,
};
use crate::rdp::DistortionMatrix;
use crate::{Error, Result};

const SOURCE_STREAM: u64 = 0;
const DETAIL_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMode {
    /// Every sampler row is supported inside its own block.
    #[default]
    Strict,
    /// Rows may put mass anywhere in the alphabet.
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecModel {
    source: FiniteDistribution,
    partition: SynsetPartition,
    /// Rows indexed by block, columns by reconstruction symbol.
    detail_sampler: ConditionalTable,
    mode: SamplerMode,
    seed: u64,
}

impl CodecModel {
    /// Strict model whose sampler is the within-block conditional of the source.
    pub fn new(source: FiniteDistribution, partition: SynsetPartition, seed: u64) -> Result<Self> {
        partition.check_alphabet(source.len())?;
        if source.len() > usize::from(u16::MAX) {
            return Err(Error::InvalidArgument(format!("alphabet of {} symbols exceeds u16", source.len())));
        }
        let detail_sampler = partition.within_block_conditional(&source)?;
        Ok(Self {
            source,
            partition,
            detail_sampler,
            mode: SamplerMode::Strict,
            seed,
        })
    }

    pub fn with_sampler(mut self, sampler: ConditionalTable, mode: SamplerMode) -> Result<Self> {
        let k = self.partition.num_blocks();
        let n = self.source.len();
        if sampler.n_rows() != k {
            return Err(Error::DimensionMismatch {
                what: "sampler rows",
                expected: k,
                got: sampler.n_rows(),
            });
        }
        if sampler.n_cols() != n {
            return Err(Error::DimensionMismatch {
                what: "sampler columns",
                expected: n,
                got: sampler.n_cols(),
            });
        }
        if mode == SamplerMode::Strict {
            for b in 0..k {
                if let Some(y) = (0..n).find(|&y| sampler.get(b, y) > 0.0 && self.partition.block_of(y) != b) {
                    return Err(Error::InvalidTable(format!(
                        "strict sampler row {b} puts mass on symbol {y} outside the block"
                    )));
                }
            }
        }
        self.detail_sampler = sampler;
        self.mode = mode;
        Ok(self)
    }

    /// Free-mode sampler that ignores the block and draws uniformly.
    pub fn with_uniform_sampler(self) -> Result<Self> {
        let n = self.source.len();
        let rows = ConditionalTable::constant_rows(self.partition.num_blocks(), &FiniteDistribution::uniform(n));
        self.with_sampler(rows, SamplerMode::Free)
    }

    pub fn source(&self) -> &FiniteDistribution {
        &self.source
    }

    pub fn partition(&self) -> &SynsetPartition {
        &self.partition
    }

    pub fn detail_sampler(&self) -> &ConditionalTable {
        &self.detail_sampler
    }

    pub fn mode(&self) -> SamplerMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn partition_hash(&self) -> u64 {
        fnv1a64(self.partition.canonical_string().as_bytes())
    }

    pub fn frequency_table(&self) -> FrequencyTable {
        let probs = self.partition.block_probs(&self.source).expect("validated at construction");
        FrequencyTable::quantize(&probs, DEFAULT_TOTAL.max(probs.len() as u32)).expect("alphabet fits in u16")
    }

    /// Synset index and position inside the synset.
    pub fn split(&self, x: usize) -> (usize, usize) {
        let b = self.partition.block_of(x);
        let detail = self.partition.blocks()[b].iter().position(|&m| m == x).expect("member of its block");
        (b, detail)
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// `n` i.i.d. source draws from the model's seeded generator.
pub fn sample_source(model: &CodecModel, n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let dist = WeightedIndex::new(model.source.probs()).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    let mut rng = model.rng(SOURCE_STREAM);
    Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
}

pub fn encode(symbols: &[usize], model: &CodecModel) -> Result<BitStream> {
    let n = model.source.len();
    if let Some(position) = symbols.iter().position(|&x| x >= n) {
        return Err(Error::SymbolOutOfRange {
            position,
            symbol: symbols[position],
        });
    }
    let table = model.frequency_table();
    let mut enc = RangeEncoder::new();
    for &x in symbols {
        let (block, _detail) = model.split(x);
        enc.encode(block, &table);
    }
    Ok(BitStream {
        header: Header {
            version: VERSION,
            alphabet_size: n as u16,
            partition_hash: model.partition_hash(),
            symbol_count: symbols.len() as u64,
            freq_table: table,
        },
        payload: enc.finish(),
    })
}

/// Block-index sequence carried by the stream.
pub fn decode_blocks(bs: &BitStream, model: &CodecModel) -> Result<Vec<usize>> {
    let h = &bs.header;
    let expected = model.partition_hash();
    if h.partition_hash != expected {
        return Err(Error::ModelMismatch {
            expected,
            found: h.partition_hash,
        });
    }
    if usize::from(h.alphabet_size) != model.source.len() {
        return Err(Error::Header(format!(
            "alphabet size {} does not match model ({})",
            h.alphabet_size,
            model.source.len()
        )));
    }
    if h.freq_table.len() != model.partition.num_blocks() {
        return Err(Error::Header(format!(
            "frequency table has {} entries for {} blocks",
            h.freq_table.len(),
            model.partition.num_blocks()
        )));
    }
    let mut dec = RangeDecoder::new(&bs.payload)?;
    let blocks = (0..h.symbol_count).map(|_| dec.decode(&h.freq_table)).collect::<Result<Vec<_>>>()?;
    dec.finish()?;
    Ok(blocks)
}

/// Reconstruction: exact blocks, details drawn from the sampler.
pub fn decode(bs: &BitStream, model: &CodecModel) -> Result<Vec<usize>> {
    let blocks = decode_blocks(bs, model)?;
    let samplers = (0..model.partition.num_blocks())
        .map(|b| WeightedIndex::new(model.detail_sampler.row(b)).map_err(|e| Error::InvalidTable(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = model.rng(DETAIL_STREAM);
    Ok(blocks.into_iter().map(|b| samplers[b].sample(&mut rng)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub n: usize,
    pub payload_bits: u64,
    pub rate_bits_per_symbol: f64,
    pub h_s: f64,
    pub expected_distortion: f64,
    pub empirical_kl_source_vs_recon: f64,
    pub empirical_mi_syntactic: f64,
    pub empirical_mi_semantic: f64,
}

fn histogram(symbols: &[usize], n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n];
    symbols.iter().for_each(|&s| h[s] += 1.0);
    h
}

pub fn measure(
    symbols: &[usize],
    recon: &[usize],
    model: &CodecModel,
    bs: &BitStream,
    delta: &DistortionMatrix,
) -> Result<RunReport> {
    let len = symbols.len();
    if recon.len() != len || len == 0 {
        return Err(Error::InvalidArgument(format!(
            "need equal non-empty sequences, got {len} and {}",
            recon.len()
        )));
    }
    let n = model.source.len();
    if delta.n_rows() != n || delta.n_cols() != n {
        return Err(Error::DimensionMismatch {
            what: "distortion matrix",
            expected: n,
            got: delta.n_rows(),
        });
    }
    if let Some(position) = symbols.iter().chain(recon).position(|&x| x >= n) {
        let symbol = symbols.iter().chain(recon).nth(position).copied().unwrap_or_default();
        return Err(Error::SymbolOutOfRange {
            position: position % len,
            symbol,
        });
    }
    let total = len as f64;
    let expected_distortion = symbols.iter().zip(recon).map(|(&x, &y)| delta.get(x, y)).sum::<f64>() / total;

    let smooth = |h: Vec<f64>| {
        let z = total + n as f64;
        h.into_iter().map(|c| (c + 1.0) / z).collect::<Vec<_>>()
    };
    let ps = smooth(histogram(symbols, n));
    let pr = smooth(histogram(recon, n));
    let kl = ps.iter().zip(&pr).map(|(&a, &b)| a * (a / b).log2()).sum::<f64>();

    let mut mass = vec![0.0; n * n];
    symbols.iter().zip(recon).for_each(|(&x, &y)| mass[x * n + y] += 1.0 / total);
    let joint = JointDistribution::new(n, n, mass)?;

    let payload_bits = bs.bit_length();
    Ok(RunReport {
        n: len,
        payload_bits,
        rate_bits_per_symbol: payload_bits as f64 / total,
        h_s: semantic_entropy(&model.source, &model.partition)?,
        expected_distortion,
        empirical_kl_source_vs_recon: kl,
        empirical_mi_syntactic: mutual_information(&joint),
        empirical_mi_semantic: single_side_semantic_mi(&joint, &model.partition)?,
    })
}

/// Exact `(x, xhat)` joint of the deterministic encoder followed by the sampler.
pub fn exact_joint(model: &CodecModel) -> JointDistribution {
    let n = model.source.len();
    let mut mass = vec![0.0; n * n];
    for x in 0..n {
        let b = model.partition.block_of(x);
        for y in 0..n {
            mass[x * n + y] = model.source.get(x) * model.detail_sampler.get(b, y);
        }
    }
    JointDistribution::new(n, n, mass).expect("product of stochastic factors")
}

/// `max_y |sum_b P(b) sampler(y|b) - p(y)|`, evaluated on the tables.
pub fn pushforward_residual(model: &CodecModel) -> f64 {
    let pb = model.partition.block_probs(&model.source).expect("validated at construction");
    (0..model.source.len())
        .map(|y| {
            let q: f64 = pb.iter().enumerate().map(|(b, &w)| w * model.detail_sampler.get(b, y)).sum();
            (q - model.source.get(y)).abs()
        })
        .fold(0.0, f64::max)
}

/// Whether the exact reconstruction marginal equals the source.
pub fn preserves_distribution(model: &CodecModel) -> bool {
    pushforward_residual(model) <= VALIDATION_TOL
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::entropy;

    fn spec_model(seed: u64) -> CodecModel {
        CodecModel::new(
            FiniteDistribution::new(vec![0.5, 0.25, 0.25]).unwrap(),
            SynsetPartition::new(vec![vec![0, 1], vec![2]], 3).unwrap(),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x8594_4171_f739_67e8);
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = spec_model(1);
        assert_eq!(sample_source(&m, 5).unwrap(), sample_source(&m, 5).unwrap());
        let m = CodecModel::new(FiniteDistribution::point(3, 0), SynsetPartition::singletons(3), 9).unwrap();
        assert!(sample_source(&m, 1000).unwrap().iter().all(|&x| x == 0));
        assert!(sample_source(&m, 0).is_err());
    }

    #[test]
    fn empirical_frequencies_match_source() {
        let m = spec_model(7);
        let xs = sample_source(&m, 100_000).unwrap();
        let h = histogram(&xs, 3);
        for (c, p) in h.iter().zip(m.source().probs()) {
            assert!((c / 1e5 - p).abs() < 0.01);
        }
    }

    #[test]
    fn single_block_stream_is_flush_only() {
        let p = FiniteDistribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let m = CodecModel::new(p, SynsetPartition::single_block(3), 3).unwrap();
        for n in [1, 100, 50_000] {
            let xs = sample_source(&m, n).unwrap();
            assert!(encode(&xs, &m).unwrap().bit_length() <= 32);
        }
    }

    #[test]
    fn rates_match_examples() {
        let m = spec_model(42);
        let xs = sample_source(&m, 100_000).unwrap();
        let bs = encode(&xs, &m).unwrap();
        let rate = bs.bit_length() as f64 / 1e5;
        assert!((0.80..=0.83).contains(&rate), "rate {rate}");

        let m = CodecModel::new(FiniteDistribution::uniform(4), SynsetPartition::singletons(4), 5).unwrap();
        let xs = sample_source(&m, 10_000).unwrap();
        let bs = encode(&xs, &m).unwrap();
        let rate = bs.bit_length() as f64 / 1e4;
        assert!((2.0..=2.01).contains(&rate), "rate {rate}");
        assert_eq!(decode(&bs, &m).unwrap(), xs);
    }

    #[test]
    fn strict_reconstruction_stays_in_block() {
        let m = spec_model(11);
        let xs = sample_source(&m, 20_000).unwrap();
        let bs = encode(&xs, &m).unwrap();
        let ys = decode(&bs, &m).unwrap();
        let s = m.partition();
        assert!(xs.iter().zip(&ys).all(|(&x, &y)| s.block_of(x) == s.block_of(y)));
        let r = measure(&xs, &ys, &m, &bs, &DistortionMatrix::hamming(3)).unwrap();
        assert!(r.empirical_kl_source_vs_recon < 0.01);
        assert!((r.empirical_mi_semantic - r.h_s).abs() < 0.05);
    }

    #[test]
    fn uniform_sampler_distortion() {
        let k = 4;
        let m = CodecModel::new(FiniteDistribution::uniform(k), SynsetPartition::single_block(k), 2)
            .unwrap()
            .with_uniform_sampler()
            .unwrap();
        let xs = sample_source(&m, 50_000).unwrap();
        let bs = encode(&xs, &m).unwrap();
        let ys = decode(&bs, &m).unwrap();
        let r = measure(&xs, &ys, &m, &bs, &DistortionMatrix::hamming(k)).unwrap();
        assert!((r.expected_distortion - 0.75).abs() < 0.01);
    }

    #[test]
    fn exact_joint_chain() {
        let m = spec_model(0);
        let j = exact_joint(&m);
        let hs = semantic_entropy(m.source(), m.partition()).unwrap();
        assert!((mutual_information(&j) - hs).abs() < 1e-9);
        assert!((single_side_semantic_mi(&j, m.partition()).unwrap() - hs).abs() < 1e-9);
        assert!(preserves_distribution(&m));
        let free = m.with_uniform_sampler().unwrap();
        assert!(!preserves_distribution(&free));
    }

    #[test]
    fn decode_errors() {
        let m = spec_model(3);
        let xs = sample_source(&m, 500).unwrap();
        let bs = encode(&xs, &m).unwrap();

        let other = CodecModel::new(m.source().clone(), SynsetPartition::new(vec![vec![0], vec![1, 2]], 3).unwrap(), 3).unwrap();
        assert!(matches!(decode(&bs, &other), Err(Error::ModelMismatch { .. })));

        let mut cut = bs.clone();
        cut.payload.truncate(cut.payload.len() / 2);
        assert!(matches!(decode(&cut, &m), Err(Error::CorruptPayload { .. })));

        assert!(matches!(encode(&[0, 1, 3], &m), Err(Error::SymbolOutOfRange { position: 2, symbol: 3 })));
    }

    #[test]
    fn strict_mode_rejects_leaky_rows() {
        let m = spec_model(0);
        let leaky = ConditionalTable::new(vec![vec![0.5, 0.25, 0.25], vec![0.0, 0.0, 1.0]]).unwrap();
        assert!(m.clone().with_sampler(leaky.clone(), SamplerMode::Strict).is_err());
        assert!(m.with_sampler(leaky, SamplerMode::Free).is_ok());
    }

    #[test]
    fn singleton_rate_approaches_entropy() {
        let p = FiniteDistribution::new(vec![0.5, 0.25, 0.25]).unwrap();
        let m = CodecModel::new(p.clone(), SynsetPartition::singletons(3), 42).unwrap();
        let xs = sample_source(&m, 100_000).unwrap();
        let bs = encode(&xs, &m).unwrap();
        assert_eq!(decode(&bs, &m).unwrap(), xs);
        let rate = bs.bit_length() as f64 / 1e5;
        assert!((rate - entropy(&p)).abs() < 0.02);
    }
}
