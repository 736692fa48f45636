//! Synonymous likelihood analysis.
//!
//! For a source `p_X`, a generative marginal `p_Xhat` and a synset partition,
//! the synset constant
//!
//! ```text
//! f       = sum_x p(x) / |B(x)| * sum_{i in B(x)} log2( p(x)    / p(x_i) )
//! delta_p = sum_x p(x) / |B(x)| * sum_{i in B(x)} log2( phat(x) / p(x_i) )
//! ```
//!
//! satisfies `f = KL(p || phat) + delta_p` exactly. `B(x)` is the block
//! containing `x`.

use serde::Serialize;

use crate::prob::{kl_divergence, project_to_simplex, ConditionalTable, FiniteDistribution, SynsetPartition};
use crate::rdp::DistortionMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodInstance {
    source: FiniteDistribution,
    model: FiniteDistribution,
    partition: SynsetPartition,
}

impl LikelihoodInstance {
    pub fn new(source: FiniteDistribution, model: FiniteDistribution, partition: SynsetPartition) -> Result<Self> {
        if source.len() != model.len() {
            return Err(Error::DimensionMismatch {
                what: "model alphabet",
                expected: source.len(),
                got: model.len(),
            });
        }
        partition.check_alphabet(source.len())?;
        for block in partition.blocks() {
            if block.iter().any(|&i| source.get(i) > 0.0) {
                for &i in block {
                    if model.get(i) <= 0.0 {
                        return Err(Error::SupportViolation { index: i, p: source.get(i) });
                    }
                }
            }
        }
        Ok(Self { source, model, partition })
    }

    pub fn source(&self) -> &FiniteDistribution {
        &self.source
    }

    pub fn model(&self) -> &FiniteDistribution {
        &self.model
    }

    pub fn partition(&self) -> &SynsetPartition {
        &self.partition
    }

    pub fn with_model(&self, model: FiniteDistribution) -> Result<Self> {
        Self::new(self.source.clone(), model, self.partition.clone())
    }

    /// `sum_x p(x)/|B(x)| sum_{i in B(x)} log2(numer(x) / p(x_i))`.
    fn block_mean_log_ratio(&self, numer: &FiniteDistribution) -> Result<f64> {
        let mut acc = 0.0;
        for block in self.partition.blocks() {
            let size = block.len() as f64;
            for &x in block {
                let px = self.source.get(x);
                if px <= 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for &i in block {
                    let pi = self.source.get(i);
                    if pi <= 0.0 {
                        return Err(Error::SupportViolation { index: i, p: px });
                    }
                    inner += (numer.get(x) / pi).log2();
                }
                acc += px * inner / size;
            }
        }
        Ok(acc)
    }
}

/// Synset constant `f(p_X, X)`; depends only on the source and partition.
pub fn f_constant(inst: &LikelihoodInstance) -> Result<f64> {
    inst.block_mean_log_ratio(&inst.source)
}

/// Model-dependent mean term `delta_p`.
pub fn delta_p(inst: &LikelihoodInstance) -> Result<f64> {
    inst.block_mean_log_ratio(&inst.model)
}

/// `f - KL(source || model) - delta_p`; zero up to rounding.
pub fn divergence_identity_residual(inst: &LikelihoodInstance) -> Result<f64> {
    Ok(f_constant(inst)? - kl_divergence(&inst.source, &inst.model)? - delta_p(inst)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaRecord {
    pub f: f64,
    pub kl: f64,
    pub delta_p: f64,
    pub residual: f64,
}

pub fn evaluate(inst: &LikelihoodInstance) -> Result<LemmaRecord> {
    let f = f_constant(inst)?;
    let kl = kl_divergence(&inst.source, &inst.model)?;
    let delta_p = delta_p(inst)?;
    Ok(LemmaRecord {
        f,
        kl,
        delta_p,
        residual: f - kl - delta_p,
    })
}

/// `sum_x p(x) sum_xhat recon(xhat | B(x)) delta(x, xhat)`.
pub fn expected_distortion(
    source: &FiniteDistribution,
    partition: &SynsetPartition,
    recon: &ConditionalTable,
    metric: &DistortionMatrix,
) -> Result<f64> {
    partition.check_alphabet(source.len())?;
    if recon.n_rows() != partition.num_blocks() {
        return Err(Error::DimensionMismatch {
            what: "reconstruction rows",
            expected: partition.num_blocks(),
            got: recon.n_rows(),
        });
    }
    if metric.n_rows() != source.len() || metric.n_cols() != recon.n_cols() {
        return Err(Error::DimensionMismatch {
            what: "distortion matrix shape",
            expected: source.len() * recon.n_cols(),
            got: metric.n_rows() * metric.n_cols(),
        });
    }
    let mut acc = 0.0;
    for x in 0..source.len() {
        let row = recon.row(partition.block_of(x));
        let inner: f64 = row.iter().enumerate().map(|(y, &w)| w * metric.get(x, y)).sum();
        acc += source.get(x) * inner;
    }
    Ok(acc)
}

/// Gaussian negative log-likelihood split into its data and constant parts,
/// all in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianReduction {
    pub dim: usize,
    pub sigma2: f64,
    pub nll: f64,
    /// `||x - xhat||^2 / (2 sigma^2 ln 2)`.
    pub weighted_mse: f64,
    /// `(d / 2) log2(2 pi sigma^2)`.
    pub constant: f64,
}

pub fn gaussian_reduction(x: &[f64], xhat: &[f64], sigma2: f64) -> Result<GaussianReduction> {
    if x.is_empty() || x.len() != xhat.len() {
        return Err(Error::DimensionMismatch {
            what: "gaussian vectors",
            expected: x.len(),
            got: xhat.len(),
        });
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma2 must be positive, got {sigma2}")));
    }
    let sq: f64 = x.iter().zip(xhat).map(|(a, b)| (a - b) * (a - b)).sum();
    let d = x.len();
    let weighted_mse = sq / (2.0 * sigma2 * std::f64::consts::LN_2);
    let constant = 0.5 * d as f64 * (2.0 * std::f64::consts::PI * sigma2).log2();
    Ok(GaussianReduction {
        dim: d,
        sigma2,
        nll: weighted_mse + constant,
        weighted_mse,
        constant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescentStep {
    pub iter: usize,
    pub kl: f64,
    pub delta_p: f64,
}

/// Fits the model marginal to the source by projected gradient descent on
/// `KL(source || model)` with Armijo backtracking, recording `(KL, delta_p)`
/// after every accepted step. Stops once `KL < kl_tol`.
pub fn kl_descent(inst: &LikelihoodInstance, kl_tol: f64, max_iters: usize) -> Result<(LikelihoodInstance, Vec<DescentStep>)> {
    let p = inst.source.probs();
    let mut current = inst.clone();
    let mut kl = kl_divergence(&current.source, &current.model)?;
    let mut trace = vec![DescentStep {
        iter: 0,
        kl,
        delta_p: delta_p(&current)?,
    }];
    let mut step = 1.0;
    for iter in 1..=max_iters {
        if kl < kl_tol {
            break;
        }
        let m = current.model.probs();
        let grad: Vec<f64> = p
            .iter()
            .zip(m)
            .map(|(&pi, &mi)| if pi > 0.0 { -pi / (mi * std::f64::consts::LN_2) } else { 0.0 })
            .collect();
        let mut accepted = None;
        while step > 1e-16 {
            let trial: Vec<f64> = m.iter().zip(&grad).map(|(mi, g)| mi - step * g).collect();
            let proj = project_to_simplex(&trial);
            let cand = FiniteDistribution::normalized(proj)?;
            if let Ok(next) = current.with_model(cand) {
                let next_kl = kl_divergence(&next.source, &next.model)?;
                let decrease: f64 = grad.iter().zip(m).zip(next.model.probs()).map(|((g, a), b)| g * (a - b)).sum();
                if next_kl <= kl - 1e-4 * decrease.max(0.0) && next_kl < kl {
                    accepted = Some((next, next_kl));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next, next_kl)) = accepted else { break };
        current = next;
        kl = next_kl;
        step = (step * 2.0).min(1.0);
        trace.push(DescentStep {
            iter,
            kl,
            delta_p: delta_p(&current)?,
        });
    }
    Ok((current, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(v: &[f64]) -> FiniteDistribution {
        FiniteDistribution::new(v.to_vec()).unwrap()
    }

    fn pair_part() -> SynsetPartition {
        SynsetPartition::new(vec![vec![0, 1], vec![2]], 3).unwrap()
    }

    #[test]
    fn f_constant_examples() {
        let p = d(&[0.5, 0.25, 0.25]);
        let inst = LikelihoodInstance::new(p.clone(), p.clone(), SynsetPartition::singletons(3)).unwrap();
        assert_eq!(f_constant(&inst).unwrap(), 0.0);

        let eq = d(&[0.25, 0.25, 0.5]);
        let inst = LikelihoodInstance::new(eq.clone(), eq, pair_part()).unwrap();
        assert_eq!(f_constant(&inst).unwrap(), 0.0);

        let inst = LikelihoodInstance::new(p.clone(), p, pair_part()).unwrap();
        // 0.5 * 1/2 * (0 + 1) + 0.25 * 1/2 * (-1 + 0)
        assert!((f_constant(&inst).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn delta_p_examples() {
        let p = d(&[0.5, 0.25, 0.25]);
        let q = d(&[0.2, 0.3, 0.5]);
        let same = LikelihoodInstance::new(p.clone(), p.clone(), pair_part()).unwrap();
        assert_eq!(delta_p(&same).unwrap(), f_constant(&same).unwrap());

        let single = LikelihoodInstance::new(p.clone(), q.clone(), SynsetPartition::singletons(3)).unwrap();
        let kl = kl_divergence(&p, &q).unwrap();
        assert!((delta_p(&single).unwrap() + kl).abs() < 1e-15);
        assert_eq!(f_constant(&single).unwrap(), 0.0);
        assert!(divergence_identity_residual(&single).unwrap().abs() < 1e-15);
    }

    #[test]
    fn support_is_validated() {
        let p = d(&[0.5, 0.5, 0.0]);
        let q = d(&[0.5, 0.0, 0.5]);
        assert!(LikelihoodInstance::new(p.clone(), q, pair_part()).is_err());
        // zero source mass on a block member referenced by a positive-mass symbol
        let inst = LikelihoodInstance::new(d(&[1.0, 0.0, 0.0]), d(&[0.4, 0.3, 0.3]), pair_part()).unwrap();
        assert!(matches!(f_constant(&inst), Err(Error::SupportViolation { index: 1, .. })));
    }

    #[test]
    fn expected_distortion_examples() {
        let p = d(&[0.5, 0.25, 0.25]);
        let ham = DistortionMatrix::hamming(3);
        let single = SynsetPartition::singletons(3);
        let v = expected_distortion(&p, &single, &ConditionalTable::identity(3), &ham).unwrap();
        assert_eq!(v, 0.0);

        // within-block conditional: block {0,1} resamples (2/3, 1/3)
        let recon = pair_part().within_block_conditional(&p).unwrap();
        let v = expected_distortion(&p, &pair_part(), &recon, &ham).unwrap();
        let brute = 0.5 * (1.0 / 3.0) + 0.25 * (2.0 / 3.0);
        assert!((v - brute).abs() < 1e-15);

        let uni = ConditionalTable::constant_rows(2, &FiniteDistribution::uniform(3));
        let v = expected_distortion(&p, &pair_part(), &uni, &ham).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);

        assert!(expected_distortion(&p, &single, &uni, &ham).is_err());
    }

    #[test]
    fn gaussian_examples() {
        let g = gaussian_reduction(&[0.3], &[0.3], 1.0 / (2.0 * std::f64::consts::PI)).unwrap();
        assert!(g.nll.abs() < 1e-15);
        let g = gaussian_reduction(&[1.0, 0.0], &[0.0, 0.0], 1.0).unwrap();
        assert!((g.weighted_mse - 1.0 / (2.0 * std::f64::consts::LN_2)).abs() < 1e-15);
        assert!(gaussian_reduction(&[1.0], &[1.0], 0.0).is_err());
        assert!(gaussian_reduction(&[1.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn descent_drives_delta_to_f() {
        let p = d(&[0.5, 0.25, 0.15, 0.1]);
        let q = d(&[0.05, 0.15, 0.3, 0.5]);
        let part = SynsetPartition::new(vec![vec![0, 3], vec![1, 2]], 4).unwrap();
        let inst = LikelihoodInstance::new(p, q, part).unwrap();
        let f = f_constant(&inst).unwrap();
        let (fit, trace) = kl_descent(&inst, 1e-8, 10_000).unwrap();
        let last = trace.last().unwrap();
        assert!(last.kl < 1e-8, "kl = {}", last.kl);
        assert!((last.delta_p - f).abs() < 1e-6);
        assert!((delta_p(&fit).unwrap() - last.delta_p).abs() < 1e-15);
    }
}
