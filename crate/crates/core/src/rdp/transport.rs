//! Perfect-perception operating points.
//!
//! With `p_Xhat = p_X` enforced exactly, the mutual information becomes
//! `KL(pi || p x p)` over couplings `pi` with both marginals equal to `p`, so
//! the Lagrangian `I + ld * E[delta]` is an entropic transport problem solved
//! by log-domain Sinkhorn iterations.

use super::{channel_distortion, channel_perception, channel_rate, DistortionMatrix, RdpPoint, SolverConfig};
use crate::prob::{ConditionalTable, FiniteDistribution};
use crate::{Error, Result};

const MARGINAL_TOL: f64 = 1e-14;

fn log_sum_exp(it: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = it.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Sinkhorn potentials for `pi(x, y) = p(x) p(y) exp(f(x) + g(y) - ld delta(x, y))`
/// on the support of `p`. `g` is updated in place as a warm start.
fn sinkhorn(p: &[f64], delta: &DistortionMatrix, ld: f64, g: &mut [f64], max_iters: usize) -> (Vec<f64>, usize) {
    let n = p.len();
    let lp: Vec<f64> = p.iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect();
    let mut f = vec![0.0; n];
    for iter in 1..=max_iters {
        for x in 0..n {
            f[x] = -log_sum_exp((0..n).map(|y| g[y] - ld * delta.get(x, y) + lp[y]));
        }
        let mut err: f64 = 0.0;
        for y in 0..n {
            if p[y] <= 0.0 {
                continue;
            }
            let col = log_sum_exp((0..n).map(|x| f[x] - ld * delta.get(x, y) + lp[x]));
            err = err.max(((g[y] + col).exp() - 1.0).abs() * p[y]);
            g[y] = -col;
        }
        if err < MARGINAL_TOL {
            // final row update so every row of the channel sums to one
            for x in 0..n {
                f[x] = -log_sum_exp((0..n).map(|y| g[y] - ld * delta.get(x, y) + lp[y]));
            }
            return (f, iter);
        }
    }
    (f, max_iters)
}

fn channel_from(p: &[f64], delta: &DistortionMatrix, ld: f64, g: &[f64], f: &[f64]) -> ConditionalTable {
    let n = p.len();
    let mut data = vec![0.0; n * n];
    for x in 0..n {
        if p[x] <= 0.0 {
            data[x * n + x] = 1.0;
            continue;
        }
        let row = &mut data[x * n..(x + 1) * n];
        for y in 0..n {
            row[y] = if p[y] > 0.0 {
                (f[x] + g[y] - ld * delta.get(x, y) + p[y].ln()).exp()
            } else {
                0.0
            };
        }
        let z: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= z);
    }
    ConditionalTable::from_flat_unchecked(n, n, data)
}

fn check_square(p: &FiniteDistribution, delta: &DistortionMatrix) -> Result<()> {
    if !delta.is_square() || delta.n_rows() != p.len() {
        return Err(Error::DimensionMismatch {
            what: "square distortion matrix",
            expected: p.len(),
            got: delta.n_cols(),
        });
    }
    Ok(())
}

/// Least expected distortion among channels whose pushforward equals `p`,
/// approached by annealing the transport multiplier up to `lambda_max`.
pub fn perfect_perception_floor(p: &FiniteDistribution, delta: &DistortionMatrix, cfg: &SolverConfig) -> Result<f64> {
    check_square(p, delta)?;
    let mut g = vec![0.0; p.len()];
    let mut ld = 1.0;
    let mut best = f64::INFINITY;
    while ld <= cfg.lambda_max {
        let (f, _) = sinkhorn(p.probs(), delta, ld, &mut g, cfg.max_iters);
        let w = channel_from(p.probs(), delta, ld, &g, &f);
        best = best.min(channel_distortion(p, &w, delta));
        ld *= 2.0;
    }
    Ok(best)
}

pub(super) fn perfect_perception_point(
    p: &FiniteDistribution,
    delta: &DistortionMatrix,
    d_target: f64,
    cfg: &SolverConfig,
) -> Result<RdpPoint> {
    check_square(p, delta)?;
    let probs = p.probs();
    let n = p.len();
    let mut g = vec![0.0; n];
    let mut iters = 0;
    let mut solve = |ld: f64, g: &mut Vec<f64>| {
        let (f, it) = sinkhorn(probs, delta, ld, g, cfg.max_iters);
        iters += it;
        let w = channel_from(probs, delta, ld, g, &f);
        let d = channel_distortion(p, &w, delta);
        (w, d)
    };

    let (mut best, d0) = solve(0.0, &mut g);
    if d0 > d_target {
        let mut hi = 1.0;
        let (mut w, mut d) = solve(hi, &mut g);
        while d > d_target {
            hi *= 2.0;
            if hi > cfg.lambda_max {
                return Err(Error::Infeasible {
                    binding: "distortion",
                    floor: d,
                });
            }
            (w, d) = solve(hi, &mut g);
        }
        best = w;
        let mut lo = if hi == 1.0 { 0.0 } else { hi / 2.0 };
        for _ in 0..cfg.bisection_iters {
            let mid = 0.5 * (lo + hi);
            let (w, d) = solve(mid, &mut g);
            if d <= d_target {
                hi = mid;
                best = w;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
    }
    Ok(RdpPoint {
        d_target,
        p_target: 0.0,
        rate: channel_rate(p, &best),
        achieved_d: channel_distortion(p, &best, delta),
        achieved_p: channel_perception(p, &best, cfg.perception),
        channel: best,
        iters,
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_is_zero_for_hamming() {
        let p = FiniteDistribution::new(vec![0.5, 0.3, 0.2]).unwrap();
        let cfg = SolverConfig {
            lambda_max: 64.0,
            ..SolverConfig::default()
        };
        let floor = perfect_perception_floor(&p, &DistortionMatrix::hamming(3), &cfg).unwrap();
        assert!(floor < 1e-9, "floor = {floor}");
    }

    #[test]
    fn marginal_is_preserved() {
        let p = FiniteDistribution::new(vec![0.5, 0.3, 0.2]).unwrap();
        let h = DistortionMatrix::hamming(3);
        let pt = perfect_perception_point(&p, &h, 0.2, &SolverConfig::default()).unwrap();
        assert!(pt.achieved_d <= 0.2 + 1e-9);
        assert!(pt.achieved_p < 1e-12);
    }
}
