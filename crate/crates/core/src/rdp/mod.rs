//! Coding limits on finite alphabets: rate-distortion via Blahut-Arimoto,
//! rate-distortion-perception via a double-Lagrangian channel solver, and the
//! synonymous rate.

mod ba;
mod solver;
mod transport;

pub use ba::{blahut_arimoto, blahut_arimoto_traced, rd_point, BaTrace};
pub use solver::rdp_solve;
pub use transport::perfect_perception_floor;

use serde::{Deserialize, Serialize};

use crate::prob::{self, semantic_entropy, ConditionalTable, FiniteDistribution, JointDistribution, SynsetPartition};
use crate::{Error, Result};

/// Row-stochastic test channel `p(xhat | x)`.
pub type Channel = ConditionalTable;

/// Non-negative per-letter distortion `delta(x, xhat)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct DistortionMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for DistortionMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        DistortionMatrix::new(rows)
    }
}

impl From<DistortionMatrix> for Vec<Vec<f64>> {
    fn from(d: DistortionMatrix) -> Self {
        d.data.chunks(d.cols).map(<[f64]>::to_vec).collect()
    }
}

impl DistortionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(Error::InvalidArgument("empty distortion matrix".into()));
        }
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != c {
                return Err(Error::InvalidArgument(format!("distortion row {i} has {} entries", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidArgument(format!("distortion[{i}][{j}] = {v} must be >= 0")));
                }
                if r == c && i == j && v != 0.0 {
                    return Err(Error::InvalidArgument(format!("distortion[{i}][{i}] must be 0")));
                }
            }
            data.extend(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn hamming(n: usize) -> Self {
        let data = (0..n * n).map(|k| if k / n == k % n { 0.0 } else { 1.0 }).collect();
        Self { rows: n, cols: n, data }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[x * self.cols + y]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Smallest achievable expected distortion, `sum_x p(x) min_y delta(x, y)`.
    pub fn min_distortion(&self, p: &FiniteDistribution) -> f64 {
        (0..self.rows)
            .map(|x| p.get(x) * (0..self.cols).map(|y| self.get(x, y)).fold(f64::INFINITY, f64::min))
            .sum()
    }

    /// Distortion reachable at zero rate, `min_y sum_x p(x) delta(x, y)`,
    /// together with the minimizing reconstruction letter.
    pub fn zero_rate_distortion(&self, p: &FiniteDistribution) -> (f64, usize) {
        (0..self.cols)
            .map(|y| ((0..self.rows).map(|x| p.get(x) * self.get(x, y)).sum::<f64>(), y))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
    }
}

/// How the reconstruction marginal is compared with the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerceptionMeasure {
    /// `KL(p_X || p_Xhat)` in bits.
    #[default]
    Kl,
    /// Total variation `1/2 sum |p_X - p_Xhat|`.
    TotalVariation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Convergence tolerance in nats: per-step objective decrease for the
    /// RDP solver, Lagrangian bound gap (floored at 1e-10) for Blahut-Arimoto.
    pub tol: f64,
    /// Bisection steps per Lagrange multiplier.
    pub bisection_iters: usize,
    /// Upper end of the multiplier bracket before a target is declared
    /// infeasible.
    pub lambda_max: f64,
    /// Seeded random restarts at the final multipliers.
    pub restarts: usize,
    pub seed: u64,
    pub perception: PerceptionMeasure,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 200_000,
            tol: 1e-14,
            bisection_iters: 60,
            lambda_max: 1e4,
            restarts: 5,
            seed: 0,
            perception: PerceptionMeasure::Kl,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be > 0".into()));
        }
        if !(self.lambda_max > 0.0) {
            return Err(Error::InvalidArgument("lambda_max must be > 0".into()));
        }
        Ok(())
    }
}

/// A solved operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdpPoint {
    pub d_target: f64,
    pub p_target: f64,
    pub rate: f64,
    pub channel: Channel,
    pub achieved_d: f64,
    pub achieved_p: f64,
    pub iters: usize,
    pub converged: bool,
}

pub fn pushforward(p: &FiniteDistribution, w: &Channel) -> Vec<f64> {
    let mut q = vec![0.0; w.n_cols()];
    for x in 0..p.len() {
        let px = p.get(x);
        for (qy, &v) in q.iter_mut().zip(w.row(x)) {
            *qy += px * v;
        }
    }
    q
}

/// `I(X; Xhat)` in bits for source `p` through `w`.
pub fn channel_rate(p: &FiniteDistribution, w: &Channel) -> f64 {
    let q = pushforward(p, w);
    let mut acc = 0.0;
    for x in 0..p.len() {
        let px = p.get(x);
        if px <= 0.0 {
            continue;
        }
        for (y, &v) in w.row(x).iter().enumerate() {
            if v > 0.0 {
                acc += px * v * (v / q[y]).log2();
            }
        }
    }
    acc.max(0.0)
}

pub fn channel_distortion(p: &FiniteDistribution, w: &Channel, delta: &DistortionMatrix) -> f64 {
    (0..p.len())
        .map(|x| p.get(x) * w.row(x).iter().enumerate().map(|(y, &v)| v * delta.get(x, y)).sum::<f64>())
        .sum()
}

/// Perception divergence between the source and the pushforward of `w`;
/// `+inf` when the KL support condition fails.
pub fn channel_perception(p: &FiniteDistribution, w: &Channel, measure: PerceptionMeasure) -> f64 {
    let q = pushforward(p, w);
    perception_of(p.probs(), &q, measure)
}

pub(crate) fn perception_of(p: &[f64], q: &[f64], measure: PerceptionMeasure) -> f64 {
    if p.len() != q.len() {
        return f64::INFINITY;
    }
    match measure {
        PerceptionMeasure::Kl => {
            let mut acc = 0.0;
            for (&a, &b) in p.iter().zip(q) {
                if a > 0.0 {
                    if b <= 0.0 {
                        return f64::INFINITY;
                    }
                    acc += a * (a / b).log2();
                }
            }
            acc.max(0.0)
        }
        PerceptionMeasure::TotalVariation => 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>(),
    }
}

/// Minimum rate for synset-lossless coding: the semantic entropy.
pub fn synonymous_rate(p: &FiniteDistribution, s: &SynsetPartition) -> Result<f64> {
    semantic_entropy(p, s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, residual: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            passed: residual.is_finite() && residual.abs() < tol,
            residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegenerationReport {
    pub entropy: f64,
    pub synonymous_rate: f64,
    pub checks: Vec<Check>,
}

impl DegenerationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Tolerance for the degeneration assertions.
pub const DEGENERATION_TOL: f64 = 1e-6;

/// Checks that the synonymous limits collapse onto the classical ones.
///
/// Failed assertions are recorded in the report; only solver errors are
/// returned as `Err`.
pub fn degeneration_suite(
    p: &FiniteDistribution,
    delta: &DistortionMatrix,
    s: &SynsetPartition,
    cfg: &SolverConfig,
) -> Result<DegenerationReport> {
    let h = prob::entropy(p);
    let syn = synonymous_rate(p, s)?;
    let mut checks = Vec::new();

    let corner = rd_point(p, delta, 0.0, cfg)?;
    let singleton = synonymous_rate(p, &SynsetPartition::singletons(p.len()))?;
    checks.push(Check::new("singleton_syn_rate_equals_lossless_rd_corner", singleton - corner.rate, DEGENERATION_TOL));

    let (d_max, _) = delta.zero_rate_distortion(p);
    let d_min = delta.min_distortion(p);
    let mut worst: f64 = 0.0;
    for frac in [0.25, 0.5] {
        let d = d_min + frac * (d_max - d_min);
        let ba = rd_point(p, delta, d, cfg)?;
        let rdp = rdp_solve(p, delta, d, f64::INFINITY, cfg)?;
        let r = rdp.rate - ba.rate;
        if r.abs() > worst.abs() {
            worst = r;
        }
    }
    checks.push(Check::new("rdp_without_perception_equals_rd", worst, DEGENERATION_TOL));

    checks.push(Check::new("syn_rate_at_most_entropy", (syn - h).max(0.0), DEGENERATION_TOL));

    Ok(DegenerationReport {
        entropy: h,
        synonymous_rate: syn,
        checks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MiComparison {
    pub i_semantic: f64,
    pub i_syntactic: f64,
}

impl MiComparison {
    pub fn holds(&self, tol: f64) -> bool {
        self.i_semantic <= self.i_syntactic + tol
    }
}

/// Single-side semantic MI (columns collapsed to synsets) next to the plain MI.
pub fn semantic_mi_comparison(j: &JointDistribution, s_out: &SynsetPartition) -> Result<MiComparison> {
    Ok(MiComparison {
        i_semantic: prob::single_side_semantic_mi(j, s_out)?,
        i_syntactic: prob::mutual_information(j),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distortion_validation() {
        assert!(DistortionMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.5]]).is_err());
        assert!(DistortionMatrix::new(vec![vec![0.0, -1.0], vec![1.0, 0.0]]).is_err());
        assert!(DistortionMatrix::new(vec![vec![0.2, 1.0, 3.0]]).is_ok());
        let h = DistortionMatrix::hamming(3);
        assert_eq!(h.get(1, 1), 0.0);
        assert_eq!(h.get(1, 2), 1.0);
    }

    #[test]
    fn synonymous_rate_examples() {
        let p = FiniteDistribution::new(vec![0.5, 0.25, 0.25]).unwrap();
        assert!((synonymous_rate(&p, &SynsetPartition::singletons(3)).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(synonymous_rate(&p, &SynsetPartition::single_block(3)).unwrap(), 0.0);
        let s = SynsetPartition::new(vec![vec![0, 1], vec![2]], 3).unwrap();
        assert!((synonymous_rate(&p, &s).unwrap() - 0.811278).abs() < 1e-6);
    }

    #[test]
    fn degeneration_examples() {
        let cfg = SolverConfig::default();
        let p = FiniteDistribution::uniform(2);
        let r = degeneration_suite(&p, &DistortionMatrix::hamming(2), &SynsetPartition::singletons(2), &cfg).unwrap();
        assert!(r.all_passed(), "{r:?}");

        let p = FiniteDistribution::uniform(4);
        let s = SynsetPartition::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        let r = degeneration_suite(&p, &DistortionMatrix::hamming(4), &s, &cfg).unwrap();
        assert!(r.all_passed(), "{r:?}");
        assert!((r.synonymous_rate - 1.0).abs() < 1e-15);
        assert!((r.entropy - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mi_comparison_singleton_is_equal() {
        let j = JointDistribution::from_rows(vec![vec![0.1, 0.2], vec![0.4, 0.3]]).unwrap();
        let c = semantic_mi_comparison(&j, &SynsetPartition::singletons(2)).unwrap();
        assert_eq!(c.i_semantic, c.i_syntactic);
        let c = semantic_mi_comparison(&j, &SynsetPartition::single_block(2)).unwrap();
        assert_eq!(c.i_semantic, 0.0);
        assert!(c.holds(1e-12));
    }
}
