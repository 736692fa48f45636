//! Rate-distortion-perception solver.
//!
//! For multipliers `(ld, lp)` the inner problem
//!
//! ```text
//! min_W  I(X; Xhat) + ld * E[delta] + lp * Div(p_X, p W)
//! ```
//!
//! is convex in the channel `W`. It is minimised by exponentiated-gradient
//! steps on each row (a softmax parameterisation) with backtracking; a unit
//! step with `lp = 0` is exactly one Blahut-Arimoto update. The outer loop
//! bisects `ld` to meet the distortion target and, around that, `lp` to meet
//! the perception target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    channel_distortion, channel_perception, channel_rate, perception_of, transport, DistortionMatrix, PerceptionMeasure,
    RdpPoint, SolverConfig,
};
use crate::prob::{ConditionalTable, FiniteDistribution};
use crate::{Error, Result};

/// Constraint slack accepted when picking among restarts.
const FEASIBILITY_SLACK: f64 = 1e-9;

struct Problem<'a> {
    p: &'a FiniteDistribution,
    delta: &'a DistortionMatrix,
    measure: PerceptionMeasure,
    nx: usize,
    ny: usize,
}

struct Inner {
    w: Vec<f64>,
    iters: usize,
    converged: bool,
}

impl Problem<'_> {
    fn pushforward(&self, w: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.ny];
        for x in 0..self.nx {
            let px = self.p.get(x);
            for y in 0..self.ny {
                q[y] += px * w[x * self.ny + y];
            }
        }
        q
    }

    /// Lagrangian in nats.
    fn objective(&self, w: &[f64], ld: f64, lp: f64) -> f64 {
        let q = self.pushforward(w);
        let mut mi = 0.0;
        let mut dist = 0.0;
        for x in 0..self.nx {
            let px = self.p.get(x);
            if px <= 0.0 {
                continue;
            }
            for y in 0..self.ny {
                let v = w[x * self.ny + y];
                if v > 0.0 {
                    mi += px * v * (v / q[y]).ln();
                    dist += px * v * self.delta.get(x, y);
                }
            }
        }
        let mut obj = mi + ld * dist;
        if lp > 0.0 {
            obj += lp * perception_of(self.p.probs(), &q, self.measure) * std::f64::consts::LN_2;
        }
        obj
    }

    /// One mirror-descent step of size `eta` from `w` into `out`.
    fn step(&self, w: &[f64], ld: f64, lp: f64, eta: f64, out: &mut [f64]) {
        let q = self.pushforward(w);
        let pull: Vec<f64> = (0..self.ny)
            .map(|y| {
                if lp == 0.0 {
                    return 0.0;
                }
                let py = self.p.get(y);
                match self.measure {
                    PerceptionMeasure::Kl => {
                        if q[y] > 0.0 {
                            lp * py / q[y]
                        } else {
                            0.0
                        }
                    }
                    PerceptionMeasure::TotalVariation => -0.5 * lp * (q[y] - py).signum(),
                }
            })
            .collect();
        let mut logs = vec![0.0; self.ny];
        for x in 0..self.nx {
            let row = &w[x * self.ny..(x + 1) * self.ny];
            let dst = &mut out[x * self.ny..(x + 1) * self.ny];
            if self.p.get(x) <= 0.0 {
                dst.copy_from_slice(row);
                continue;
            }
            for y in 0..self.ny {
                logs[y] = if row[y] > 0.0 && q[y] > 0.0 {
                    (1.0 - eta) * row[y].ln() + eta * (q[y].ln() - ld * self.delta.get(x, y) + pull[y])
                } else {
                    f64::NEG_INFINITY
                };
            }
            let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (d, &l) in dst.iter_mut().zip(&logs) {
                *d = (l - m).exp();
                z += *d;
            }
            dst.iter_mut().for_each(|d| *d /= z);
        }
    }

    fn solve(&self, ld: f64, lp: f64, init: &[f64], cfg: &SolverConfig) -> Inner {
        // keep every entry positive so warm starts from steep multipliers can
        // still move mass back into underflowed cells
        let floor = 1e-12 / self.ny as f64;
        let mut w: Vec<f64> = init.iter().map(|&v| (1.0 - 1e-12) * v + floor).collect();
        let mut next = vec![0.0; w.len()];
        let mut obj = self.objective(&w, ld, lp);
        let mut eta = 1.0;
        for iter in 1..=cfg.max_iters {
            let mut accepted = false;
            while eta >= 1e-10 {
                self.step(&w, ld, lp, eta, &mut next);
                let cand = self.objective(&next, ld, lp);
                if cand <= obj + 1e-15 * obj.abs().max(1.0) {
                    std::mem::swap(&mut w, &mut next);
                    let decrease = obj - cand;
                    obj = cand;
                    accepted = true;
                    if decrease < cfg.tol && eta == 1.0 || decrease < cfg.tol * 1e-3 {
                        return Inner {
                            w,
                            iters: iter,
                            converged: true,
                        };
                    }
                    break;
                }
                eta *= 0.5;
            }
            if !accepted {
                // no descent direction left at machine precision
                return Inner {
                    w,
                    iters: iter,
                    converged: true,
                };
            }
            eta = (eta * 2.0).min(1.0);
        }
        Inner {
            w,
            iters: cfg.max_iters,
            converged: false,
        }
    }

    fn channel(&self, w: Vec<f64>) -> ConditionalTable {
        ConditionalTable::from_flat_unchecked(self.nx, self.ny, w)
    }

    fn distortion_of(&self, w: &[f64]) -> f64 {
        channel_distortion(self.p, &self.channel(w.to_vec()), self.delta)
    }

    fn perception_of(&self, w: &[f64]) -> f64 {
        perception_of(self.p.probs(), &self.pushforward(w), self.measure)
    }
}

struct DistFit {
    ld: f64,
    inner: Inner,
    solves: usize,
}

/// Smallest `ld` (to bisection precision) whose solution meets `d_target`.
fn fit_distortion(prob: &Problem, lp: f64, d_target: f64, warm: &mut Vec<f64>, cfg: &SolverConfig) -> Result<DistFit> {
    let mut solves = 1;
    let first = prob.solve(0.0, lp, warm, cfg);
    if prob.distortion_of(&first.w) <= d_target {
        *warm = first.w.clone();
        return Ok(DistFit {
            ld: 0.0,
            inner: first,
            solves,
        });
    }
    let mut hi = 1.0;
    let mut best = prob.solve(hi, lp, warm, cfg);
    solves += 1;
    while prob.distortion_of(&best.w) > d_target {
        hi *= 2.0;
        if hi > cfg.lambda_max {
            return Err(Error::Infeasible {
                binding: "distortion",
                floor: prob.distortion_of(&best.w),
            });
        }
        best = prob.solve(hi, lp, &best.w, cfg);
        solves += 1;
    }
    let mut lo = if hi == 1.0 { 0.0 } else { hi / 2.0 };
    *warm = best.w.clone();
    for _ in 0..cfg.bisection_iters {
        let mid = 0.5 * (lo + hi);
        let cand = prob.solve(mid, lp, warm, cfg);
        solves += 1;
        *warm = cand.w.clone();
        if prob.distortion_of(&cand.w) <= d_target {
            hi = mid;
            best = cand;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(DistFit { ld: hi, inner: best, solves })
}

/// Minimum of `I(X; Xhat)` over channels with `E[delta] <= d_target` and
/// `Div(p_X, p_Xhat) <= p_target` (bits for KL).
///
/// `p_target = +inf` disables the perception constraint; `p_target = 0`
/// forces `p_Xhat = p_X` and is solved as an entropic transport problem.
pub fn rdp_solve(
    p: &FiniteDistribution,
    delta: &DistortionMatrix,
    d_target: f64,
    p_target: f64,
    cfg: &SolverConfig,
) -> Result<RdpPoint> {
    cfg.validate()?;
    if !(d_target >= 0.0) || !(p_target >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "targets must be non-negative (d = {d_target}, p = {p_target})"
        )));
    }
    if delta.n_rows() != p.len() {
        return Err(Error::DimensionMismatch {
            what: "distortion rows",
            expected: p.len(),
            got: delta.n_rows(),
        });
    }
    if p_target.is_finite() && !delta.is_square() {
        return Err(Error::InvalidArgument(
            "a perception constraint needs the reconstruction alphabet to equal the source alphabet".into(),
        ));
    }
    let d_min = delta.min_distortion(p);
    if d_target < d_min {
        return Err(Error::Infeasible {
            binding: "distortion",
            floor: d_min,
        });
    }
    if d_target <= d_min {
        let mut pt = super::rd_point(p, delta, d_target, cfg)?;
        if !(pt.achieved_p <= p_target) {
            return Err(Error::Infeasible {
                binding: "perception",
                floor: pt.achieved_p,
            });
        }
        pt.p_target = p_target;
        return Ok(pt);
    }
    if p_target == 0.0 {
        return transport::perfect_perception_point(p, delta, d_target, cfg);
    }

    let prob = Problem {
        p,
        delta,
        measure: cfg.perception,
        nx: p.len(),
        ny: delta.n_cols(),
    };
    let uniform = vec![1.0 / prob.ny as f64; prob.nx * prob.ny];
    let mut warm = uniform.clone();

    let (ld, lp, mut best, mut iters) = {
        let fit0 = fit_distortion(&prob, 0.0, d_target, &mut warm, cfg)?;
        if prob.perception_of(&fit0.inner.w) <= p_target {
            let it = fit0.inner.iters;
            (fit0.ld, 0.0, fit0.inner, it)
        } else {
            let mut hi = 1.0;
            let mut fit = fit_distortion(&prob, hi, d_target, &mut warm, cfg)?;
            while prob.perception_of(&fit.inner.w) > p_target {
                hi *= 2.0;
                if hi > cfg.lambda_max {
                    return Err(Error::Infeasible {
                        binding: "perception",
                        floor: prob.perception_of(&fit.inner.w),
                    });
                }
                fit = fit_distortion(&prob, hi, d_target, &mut warm, cfg)?;
            }
            let mut lo = if hi == 1.0 { 0.0 } else { hi / 2.0 };
            let mut total = fit.solves;
            for _ in 0..cfg.bisection_iters {
                let mid = 0.5 * (lo + hi);
                let cand = fit_distortion(&prob, mid, d_target, &mut warm, cfg)?;
                total += cand.solves;
                if prob.perception_of(&cand.inner.w) <= p_target {
                    hi = mid;
                    fit = cand;
                } else {
                    lo = mid;
                }
                if hi - lo <= 1e-10 * hi {
                    break;
                }
            }
            let it = fit.inner.iters + total;
            (fit.ld, hi, fit.inner, it)
        }
    };

    // seeded restarts at the final multipliers; keep the lowest feasible rate
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let feasible = |w: &[f64]| {
        prob.distortion_of(w) <= d_target + FEASIBILITY_SLACK && prob.perception_of(w) <= p_target + FEASIBILITY_SLACK
    };
    let rate_of = |w: &[f64]| channel_rate(p, &prob.channel(w.to_vec()));
    for _ in 0..cfg.restarts {
        let mut init = vec![0.0; prob.nx * prob.ny];
        for row in init.chunks_mut(prob.ny) {
            let mut z = 0.0;
            for v in row.iter_mut() {
                *v = rng.gen_range(0.05..1.0);
                z += *v;
            }
            row.iter_mut().for_each(|v| *v /= z);
        }
        let cand = prob.solve(ld, lp, &init, cfg);
        iters += cand.iters;
        if feasible(&cand.w) && (!feasible(&best.w) || rate_of(&cand.w) < rate_of(&best.w)) {
            best = cand;
        }
    }

    if !best.converged {
        return Err(Error::NonConvergence {
            iters,
            last_rate: rate_of(&best.w),
        });
    }
    let channel = prob.channel(best.w);
    Ok(RdpPoint {
        d_target,
        p_target,
        rate: channel_rate(p, &channel),
        achieved_d: channel_distortion(p, &channel, delta),
        achieved_p: if delta.is_square() {
            channel_perception(p, &channel, cfg.perception)
        } else {
            f64::INFINITY
        },
        channel,
        iters,
        converged: true,
    })
}
