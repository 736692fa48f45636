//! Seeded generators for random instances used by property checks, the
//! verification battery and benchmarks.

use rand::Rng;

use crate::prob::{ConditionalTable, FiniteDistribution, JointDistribution, SynsetPartition};
use crate::svi::DiscreteLatentModel;

/// Strictly positive weights drawn as `Exp(1)`, i.e. a flat Dirichlet sample
/// after normalization.
fn positive_weights<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            -u.ln() + 1e-3
        })
        .collect()
}

pub fn distribution<R: Rng + ?Sized>(rng: &mut R, n: usize) -> FiniteDistribution {
    FiniteDistribution::normalized(positive_weights(rng, n)).expect("positive weights")
}

/// Like [`distribution`] but zeroes each entry with probability `zero_prob`
/// (at least one entry is kept).
pub fn sparse_distribution<R: Rng + ?Sized>(rng: &mut R, n: usize, zero_prob: f64) -> FiniteDistribution {
    let mut w = positive_weights(rng, n);
    let keep = rng.gen_range(0..n);
    for (i, v) in w.iter_mut().enumerate() {
        if i != keep && rng.gen_bool(zero_prob) {
            *v = 0.0;
        }
    }
    FiniteDistribution::normalized(w).expect("at least one positive weight")
}

pub fn partition<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SynsetPartition {
    let k = rng.gen_range(1..=n);
    let mut labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.gen_range(0..k) }).collect();
    // shuffle so the forced labels are not always the leading indices
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        labels.swap(i, j);
    }
    let mut blocks = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        blocks[l].push(i);
    }
    SynsetPartition::new(blocks, n).expect("labels cover every block")
}

pub fn table<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ConditionalTable {
    let data = (0..rows)
        .flat_map(|_| distribution(rng, cols).probs().to_vec())
        .collect();
    ConditionalTable::from_flat_unchecked(rows, cols, data)
}

pub fn joint<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> JointDistribution {
    let d = distribution(rng, rows * cols);
    JointDistribution::new(rows, cols, d.probs().to_vec()).expect("valid joint")
}

/// Random model with all conditionals strictly positive.
pub fn latent_model<R: Rng + ?Sized>(rng: &mut R, nx: usize, ny_s: usize, ny_e: usize) -> DiscreteLatentModel {
    let source = distribution(rng, nx);
    let partition = partition(rng, nx);
    let k = partition.num_blocks();
    let enc_syn = table(rng, nx, ny_s);
    let enc_det = (0..nx).map(|_| table(rng, ny_s, ny_e)).collect();
    let prior_syn = distribution(rng, ny_s);
    let dec_lik = table(rng, ny_s, k);
    DiscreteLatentModel::new(source, partition, enc_syn, enc_det, prior_syn, dec_lik)
        .expect("consistent random model")
}

/// Model satisfying the lossless-representation conditions by construction:
/// every synonymous latent belongs to exactly one synset, the decoder
/// likelihood is the indicator of that synset and the encoder equals the true
/// posterior of the sample's synset.
pub fn ideal_latent_model<R: Rng + ?Sized>(rng: &mut R, nx: usize, extra_latents: usize, ny_e: usize) -> DiscreteLatentModel {
    let source = distribution(rng, nx);
    let partition = partition(rng, nx);
    let k = partition.num_blocks();
    let ny_s = k + extra_latents;
    let owner: Vec<usize> = (0..ny_s).map(|y| if y < k { y } else { rng.gen_range(0..k) }).collect();
    let prior_syn = distribution(rng, ny_s);
    let dec_lik_rows: Vec<Vec<f64>> = owner
        .iter()
        .map(|&b| (0..k).map(|c| if c == b { 1.0 } else { 0.0 }).collect())
        .collect();
    let enc_rows: Vec<Vec<f64>> = (0..nx)
        .map(|x| {
            let b = partition.block_of(x);
            let w: Vec<f64> = (0..ny_s)
                .map(|y| if owner[y] == b { prior_syn.get(y) } else { 0.0 })
                .collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let enc_det = (0..nx).map(|_| table(rng, ny_s, ny_e)).collect();
    DiscreteLatentModel::new(
        source,
        partition,
        ConditionalTable::new(enc_rows).expect("normalized rows"),
        enc_det,
        prior_syn,
        ConditionalTable::new(dec_lik_rows).expect("indicator rows"),
    )
    .expect("consistent ideal model")
}
