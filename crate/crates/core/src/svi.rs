//! Synonymous variational inference on fully discrete latent models.
//!
//! A [`DiscreteLatentModel`] holds a source over `X`, its synset partition,
//! an encoder that splits the latent into a synonymous part `y_s` and a detail
//! part `y_e`, and a generative model `p(y_s) p(block | y_s)`. All quantities
//! are finite sums, so the lower-bound identity and the decompositions hold to
//! rounding error.

use serde::Serialize;

use crate::prob::{
    self, kl_divergence, partial_semantic_kl, plog2p, ConditionalTable, FiniteDistribution,
    JointDistribution, SynsetPartition,
};
use crate::{Error, Result};

/// Residual tolerance for the exact identities.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Tolerance for the boolean lossless conditions.
pub const CONDITION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLatentModel {
    source: FiniteDistribution,
    source_partition: SynsetPartition,
    /// `q(y_s | x)`, rows indexed by `x`.
    enc_syn: ConditionalTable,
    /// `q(y_e | x, y_s)`, one table per `x` with rows indexed by `y_s`.
    enc_det: Vec<ConditionalTable>,
    /// `p(y_s)`.
    prior_syn: FiniteDistribution,
    /// `p(block | y_s)`, rows indexed by `y_s`.
    dec_lik: ConditionalTable,
}

fn expect_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { what, expected, got });
    }
    Ok(())
}

impl DiscreteLatentModel {
    pub fn new(
        source: FiniteDistribution,
        source_partition: SynsetPartition,
        enc_syn: ConditionalTable,
        enc_det: Vec<ConditionalTable>,
        prior_syn: FiniteDistribution,
        dec_lik: ConditionalTable,
    ) -> Result<Self> {
        let nx = source.len();
        source_partition.check_alphabet(nx)?;
        expect_dim("enc_syn rows", nx, enc_syn.n_rows())?;
        let ny_s = enc_syn.n_cols();
        expect_dim("prior_syn length", ny_s, prior_syn.len())?;
        expect_dim("enc_det tables", nx, enc_det.len())?;
        let ny_e = enc_det[0].n_cols();
        for t in &enc_det {
            expect_dim("enc_det rows", ny_s, t.n_rows())?;
            expect_dim("enc_det columns", ny_e, t.n_cols())?;
        }
        expect_dim("dec_lik rows", ny_s, dec_lik.n_rows())?;
        expect_dim("dec_lik columns", source_partition.num_blocks(), dec_lik.n_cols())?;
        Ok(Self {
            source,
            source_partition,
            enc_syn,
            enc_det,
            prior_syn,
            dec_lik,
        })
    }

    pub fn source(&self) -> &FiniteDistribution {
        &self.source
    }

    pub fn partition(&self) -> &SynsetPartition {
        &self.source_partition
    }

    pub fn enc_syn(&self) -> &ConditionalTable {
        &self.enc_syn
    }

    pub fn enc_det(&self) -> &[ConditionalTable] {
        &self.enc_det
    }

    pub fn prior_syn(&self) -> &FiniteDistribution {
        &self.prior_syn
    }

    pub fn dec_lik(&self) -> &ConditionalTable {
        &self.dec_lik
    }

    pub fn num_syn_latents(&self) -> usize {
        self.enc_syn.n_cols()
    }

    pub fn num_detail_latents(&self) -> usize {
        self.enc_det[0].n_cols()
    }

    /// Copy with the encoder row for `x` replaced by `row`.
    pub fn with_encoder_row(&self, x: usize, row: &[f64]) -> Result<Self> {
        let mut rows = self.enc_syn.to_rows();
        expect_dim("encoder row", self.num_syn_latents(), row.len())?;
        rows[x] = row.to_vec();
        let mut out = self.clone();
        out.enc_syn = ConditionalTable::new(rows)?;
        Ok(out)
    }

    /// Copy whose encoder equals the true synonymous posterior for every `x`.
    pub fn with_posterior_encoder(&self) -> Result<Self> {
        let rows = (0..self.source.len())
            .map(|x| Ok(true_syn_posterior(self, self.source_partition.block_of(x))?.probs().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let mut out = self.clone();
        out.enc_syn = ConditionalTable::new(rows)?;
        Ok(out)
    }

    fn check_symbol(&self, x: usize) -> Result<()> {
        if x >= self.source.len() {
            return Err(Error::InvalidArgument(format!(
                "symbol {x} outside alphabet of size {}",
                self.source.len()
            )));
        }
        Ok(())
    }

    /// Model probability of a synset, `p(block) = sum_y p(block | y) p(y)`.
    pub fn block_evidence(&self, block: usize) -> f64 {
        (0..self.num_syn_latents())
            .map(|y| self.dec_lik.get(y, block) * self.prior_syn.get(y))
            .sum()
    }

    /// Joint of the synset variable and `y_s` induced by source and encoder,
    /// `sum_{x in block} p(x) q(y_s | x)`.
    pub fn block_latent_joint(&self) -> JointDistribution {
        let k = self.source_partition.num_blocks();
        let ny = self.num_syn_latents();
        let mut mass = vec![0.0; k * ny];
        for x in 0..self.source.len() {
            let b = self.source_partition.block_of(x);
            for y in 0..ny {
                mass[b * ny + y] += self.source.get(x) * self.enc_syn.get(x, y);
            }
        }
        JointDistribution::new(k, ny, mass).expect("marginalised valid tables")
    }
}

/// `p(y_s | block)` by Bayes from the prior and the decoder likelihood.
pub fn true_syn_posterior(m: &DiscreteLatentModel, block: usize) -> Result<FiniteDistribution> {
    if block >= m.source_partition.num_blocks() {
        return Err(Error::InvalidArgument(format!("block {block} out of range")));
    }
    let weights: Vec<f64> = (0..m.num_syn_latents())
        .map(|y| m.dec_lik.get(y, block) * m.prior_syn.get(y))
        .collect();
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::ZeroEvidence { block });
    }
    FiniteDistribution::normalized(weights)
}

/// `D_KL[q(y_s | x) || p(y_s | block(x))]`.
pub fn full_semantic_kl(m: &DiscreteLatentModel, x: usize) -> Result<f64> {
    m.check_symbol(x)?;
    let posterior = true_syn_posterior(m, m.source_partition.block_of(x))?;
    kl_divergence(&m.enc_syn.row_distribution(x), &posterior)
}

/// The three quantities related by `partial = full - det_ce`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    /// Partial semantic KL of `q(y_s, y_e | x)` against the synset posterior.
    pub partial: f64,
    pub full: f64,
    /// `H(Y_e | X = x, Y_s)` under the encoder.
    pub det_ce: f64,
}

impl Decomposition {
    pub fn residual(&self) -> f64 {
        self.partial - (self.full - self.det_ce)
    }
}

/// Evaluates the partial-semantic and full-semantic formulations for `x`.
///
/// The partial form treats the pair `(y_s, y_e)` as the syntactic variable and
/// groups all detail values of one `y_s` into a synset whose mass is the true
/// posterior of `y_s`.
pub fn decomposition(m: &DiscreteLatentModel, x: usize) -> Result<Decomposition> {
    m.check_symbol(x)?;
    let posterior = true_syn_posterior(m, m.source_partition.block_of(x))?;
    let ny = m.num_syn_latents();
    let ne = m.num_detail_latents();
    let det = &m.enc_det[x];

    let mut q_joint = Vec::with_capacity(ny * ne);
    let mut p_spread = Vec::with_capacity(ny * ne);
    for y in 0..ny {
        let qy = m.enc_syn.get(x, y);
        for e in 0..ne {
            q_joint.push(qy * det.get(y, e));
            p_spread.push(posterior.get(y) / ne as f64);
        }
    }
    let groups = SynsetPartition::new((0..ny).map(|y| (y * ne..(y + 1) * ne).collect()).collect(), ny * ne)?;
    let partial = partial_semantic_kl(
        &FiniteDistribution::normalized(q_joint)?,
        &FiniteDistribution::normalized(p_spread)?,
        &groups,
    )?;

    let full = kl_divergence(&m.enc_syn.row_distribution(x), &posterior)?;
    let det_ce = (0..ny)
        .map(|y| -m.enc_syn.get(x, y) * det.row(y).iter().map(|&v| plog2p(v)).sum::<f64>())
        .sum();
    Ok(Decomposition { partial, full, det_ce })
}

/// Lower-bound report for one source symbol, all values in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SviReport {
    /// `log2 p(block(x))` under the generative model.
    pub evidence: f64,
    /// `E_q[log2 p(block, y_s) - log2 q(y_s | x)]`.
    pub svlbo: f64,
    pub full_kl: f64,
    /// Partial semantic KL from [`decomposition`].
    pub partial_kl: f64,
    pub det_cond_entropy: f64,
    /// `E_q[-log2 p(block | y_s)]`.
    pub likelihood_term: f64,
    /// `E_q[-log2 p(y_s)]`.
    pub rate_term: f64,
}

impl SviReport {
    /// `evidence - (svlbo + full_kl)`.
    pub fn identity_residual(&self) -> f64 {
        self.evidence - (self.svlbo + self.full_kl)
    }
}

/// Entropy of the encoder row `q(. | x)`; the term the lower bound keeps in
/// the discrete setting.
pub fn encoder_entropy(m: &DiscreteLatentModel, x: usize) -> f64 {
    -m.enc_syn.row(x).iter().map(|&v| plog2p(v)).sum::<f64>()
}

pub fn svlbo_report(m: &DiscreteLatentModel, x: usize) -> Result<SviReport> {
    m.check_symbol(x)?;
    let block = m.source_partition.block_of(x);
    let p_block = m.block_evidence(block);
    if p_block <= 0.0 {
        return Err(Error::ZeroEvidence { block });
    }
    let mut svlbo = 0.0;
    let mut likelihood_term = 0.0;
    let mut rate_term = 0.0;
    for y in 0..m.num_syn_latents() {
        let q = m.enc_syn.get(x, y);
        if q <= 0.0 {
            continue;
        }
        let lik = m.dec_lik.get(y, block);
        let prior = m.prior_syn.get(y);
        if lik <= 0.0 || prior <= 0.0 {
            return Err(Error::SupportViolation { index: y, p: q });
        }
        svlbo += q * ((lik * prior).log2() - q.log2());
        likelihood_term -= q * lik.log2();
        rate_term -= q * prior.log2();
    }
    let dec = decomposition(m, x)?;
    Ok(SviReport {
        evidence: p_block.log2(),
        svlbo,
        full_kl: dec.full,
        partial_kl: dec.partial,
        det_cond_entropy: dec.det_ce,
        likelihood_term,
        rate_term,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LosslessConditions {
    pub kl_zero: bool,
    pub likelihood_one: bool,
    pub hs_equals_mi: bool,
    /// `E_x[full_semantic_kl]`.
    pub expected_kl: f64,
    /// `H_s - I(block; y_s)`.
    pub hs_gap: f64,
}

impl LosslessConditions {
    /// The implication `(kl_zero && likelihood_one) => hs_equals_mi`.
    pub fn implication_holds(&self) -> bool {
        !(self.kl_zero && self.likelihood_one) || self.hs_equals_mi
    }
}

pub fn lossless_conditions_check(m: &DiscreteLatentModel) -> Result<LosslessConditions> {
    let mut expected_kl = 0.0;
    let mut likelihood_one = true;
    for x in 0..m.source.len() {
        let px = m.source.get(x);
        if px > 0.0 {
            expected_kl += px * full_semantic_kl(m, x)?;
        }
        let block = m.source_partition.block_of(x);
        for y in 0..m.num_syn_latents() {
            if m.enc_syn.get(x, y) > 0.0 && m.dec_lik.get(y, block) <= 1.0 - CONDITION_TOL {
                likelihood_one = false;
            }
        }
    }
    let hs = prob::semantic_entropy(&m.source, &m.source_partition)?;
    let mi = prob::mutual_information(&m.block_latent_joint());
    let hs_gap = hs - mi;
    Ok(LosslessConditions {
        kl_zero: expected_kl < CONDITION_TOL,
        likelihood_one,
        hs_equals_mi: hs_gap.abs() < CONDITION_TOL,
        expected_kl,
        hs_gap,
    })
}
