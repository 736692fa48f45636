//! Fixed problem instances shared by the benchmarks.

use synrdp::codec::CodecModel;
use synrdp::{DistortionMatrix, FiniteDistribution, SynsetPartition};

/// Geometric-like source on `n` letters with Hamming distortion.
pub fn rd_instance(n: usize) -> (FiniteDistribution, DistortionMatrix) {
    let w: Vec<f64> = (0..n).map(|i| 0.7f64.powi(i as i32)).collect();
    (FiniteDistribution::normalized(w).expect("positive weights"), DistortionMatrix::hamming(n))
}

/// Source `(0.5, 0.25, 0.25)` with blocks `{0,1},{2}`.
pub fn codec_model(seed: u64) -> CodecModel {
    CodecModel::new(
        FiniteDistribution::new(vec![0.5, 0.25, 0.25]).expect("valid"),
        SynsetPartition::new(vec![vec![0, 1], vec![2]], 3).expect("valid"),
        seed,
    )
    .expect("valid")
}
