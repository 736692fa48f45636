use super::{channel_distortion, channel_perception, channel_rate, DistortionMatrix, RdpPoint, SolverConfig};
use crate::prob::{ConditionalTable, FiniteDistribution};
use crate::{Error, Result};

/// Loosest bound gap (nats) accepted as converged, whatever `cfg.tol` says.
const GAP_TOL: f64 = 1e-10;

/// Per-iteration record of a Blahut-Arimoto run.
#[derive(Debug, Clone, PartialEq)]
pub struct BaTrace {
    /// `I(X; Xhat)` in bits after each channel update.
    pub rates: Vec<f64>,
    /// Lagrangian `I - slope * D / ln 2` in bits; non-increasing.
    pub objective: Vec<f64>,
}

/// Blahut-Arimoto at a fixed slope `slope <= 0`: the fixed point of
/// `W(y|x) ~ r(y) exp(slope * delta(x, y))`, `r = p W`.
pub fn blahut_arimoto(p: &FiniteDistribution, delta: &DistortionMatrix, slope: f64, cfg: &SolverConfig) -> Result<RdpPoint> {
    blahut_arimoto_traced(p, delta, slope, cfg).map(|(pt, _)| pt)
}

pub fn blahut_arimoto_traced(
    p: &FiniteDistribution,
    delta: &DistortionMatrix,
    slope: f64,
    cfg: &SolverConfig,
) -> Result<(RdpPoint, BaTrace)> {
    cfg.validate()?;
    if !(slope <= 0.0) {
        return Err(Error::InvalidArgument(format!("slope must be <= 0, got {slope}")));
    }
    if delta.n_rows() != p.len() {
        return Err(Error::DimensionMismatch {
            what: "distortion rows",
            expected: p.len(),
            got: delta.n_rows(),
        });
    }
    let nx = p.len();
    let ny = delta.n_cols();
    let mut r = vec![1.0 / ny as f64; ny];
    let mut w = vec![0.0; nx * ny];
    let mut log_z = vec![0.0; nx];
    let mut trace = BaTrace {
        rates: Vec::new(),
        objective: Vec::new(),
    };
    let mut last_rate = f64::NAN;
    for iter in 1..=cfg.max_iters {
        for x in 0..nx {
            let row = &mut w[x * ny..(x + 1) * ny];
            // log-domain normalisation keeps steep slopes finite
            let logs: Vec<f64> = (0..ny)
                .map(|y| if r[y] > 0.0 { r[y].ln() + slope * delta.get(x, y) } else { f64::NEG_INFINITY })
                .collect();
            let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (v, &l) in row.iter_mut().zip(&logs) {
                *v = (l - m).exp();
                z += *v;
            }
            row.iter_mut().for_each(|v| *v /= z);
            log_z[x] = m + z.ln();
        }
        let channel = ConditionalTable::from_flat_unchecked(nx, ny, w.clone());
        let rate = channel_rate(p, &channel);
        let dist = channel_distortion(p, &channel, delta);
        trace.rates.push(rate);
        trace.objective.push(rate - slope * dist / std::f64::consts::LN_2);

        // c(y) = sum_x p(x) exp(slope delta(x,y)) / Z(x); the Lagrangian is
        // within ln max c - sum r ln c (nats) of its minimum
        let c: Vec<f64> = (0..ny)
            .map(|y| {
                (0..nx)
                    .filter(|&x| p.get(x) > 0.0)
                    .map(|x| p.get(x) * (slope * delta.get(x, y) - log_z[x]).exp())
                    .sum()
            })
            .collect();
        let max_c = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean_log_c: f64 = r.iter().zip(&c).filter(|(&ry, _)| ry > 0.0).map(|(ry, cy)| ry * cy.ln()).sum();
        let gap = max_c.ln() - mean_log_c;

        r = super::pushforward(p, &channel);
        if gap < cfg.tol.max(GAP_TOL) {
            let achieved_p = if delta.is_square() {
                channel_perception(p, &channel, cfg.perception)
            } else {
                f64::INFINITY
            };
            let point = RdpPoint {
                d_target: dist,
                p_target: f64::INFINITY,
                rate,
                channel,
                achieved_d: dist,
                achieved_p,
                iters: iter,
                converged: true,
            };
            return Ok((point, trace));
        }
        last_rate = rate;
    }
    Err(Error::NonConvergence {
        iters: cfg.max_iters,
        last_rate,
    })
}

/// Point on the rate-distortion curve at expected distortion `d_target`,
/// found by bisection on the slope. The zero-distortion corner is evaluated
/// directly on the deterministic nearest-letter channel.
pub fn rd_point(p: &FiniteDistribution, delta: &DistortionMatrix, d_target: f64, cfg: &SolverConfig) -> Result<RdpPoint> {
    cfg.validate()?;
    if !(d_target >= 0.0) {
        return Err(Error::InvalidArgument(format!("d_target must be >= 0, got {d_target}")));
    }
    let nx = p.len();
    let ny = delta.n_cols();
    let d_min = delta.min_distortion(p);
    let (d_max, y_star) = delta.zero_rate_distortion(p);

    let finish = |channel: ConditionalTable, iters: usize| {
        let achieved_d = channel_distortion(p, &channel, delta);
        RdpPoint {
            d_target,
            p_target: f64::INFINITY,
            rate: channel_rate(p, &channel),
            achieved_p: if delta.is_square() {
                channel_perception(p, &channel, cfg.perception)
            } else {
                f64::INFINITY
            },
            achieved_d,
            channel,
            iters,
            converged: true,
        }
    };

    if d_target >= d_max {
        let data = (0..nx).flat_map(|_| (0..ny).map(move |y| if y == y_star { 1.0 } else { 0.0 })).collect();
        return Ok(finish(ConditionalTable::from_flat_unchecked(nx, ny, data), 0));
    }
    if d_target < d_min {
        return Err(Error::Infeasible {
            binding: "distortion",
            floor: d_min,
        });
    }
    if d_target == d_min {
        // nearest-letter map, ties broken towards the smallest index
        let mut data = vec![0.0; nx * ny];
        for x in 0..nx {
            let y = (0..ny).fold(0, |b, y| if delta.get(x, y) < delta.get(x, b) { y } else { b });
            data[x * ny + y] = 1.0;
        }
        return Ok(finish(ConditionalTable::from_flat_unchecked(nx, ny, data), 0));
    }

    let mut hi = -1.0;
    let mut best = blahut_arimoto(p, delta, hi, cfg)?;
    while best.achieved_d > d_target {
        hi *= 2.0;
        if -hi > cfg.lambda_max {
            return Err(Error::Infeasible {
                binding: "distortion",
                floor: best.achieved_d,
            });
        }
        best = blahut_arimoto(p, delta, hi, cfg)?;
    }
    // slope `hi` is feasible, `lo` is not (or is the zero-rate end)
    let mut lo = if hi == -1.0 { 0.0 } else { hi / 2.0 };
    let mut iters = best.iters;
    for _ in 0..cfg.bisection_iters {
        let mid = 0.5 * (lo + hi);
        let pt = blahut_arimoto(p, delta, mid, cfg)?;
        iters += pt.iters;
        if pt.achieved_d <= d_target {
            hi = mid;
            best = pt;
        } else {
            lo = mid;
        }
        if (hi - lo).abs() <= 1e-13 * hi.abs() {
            break;
        }
    }
    let mut out = finish(best.channel, iters);
    out.d_target = d_target;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hb(d: f64) -> f64 {
        -(d * d.log2() + (1.0 - d) * (1.0 - d).log2())
    }

    #[test]
    fn binary_symmetric_curve() {
        let p = FiniteDistribution::uniform(2);
        let h = DistortionMatrix::hamming(2);
        let cfg = SolverConfig::default();
        let pt = rd_point(&p, &h, 0.1, &cfg).unwrap();
        assert!((pt.achieved_d - 0.1).abs() < 1e-9);
        assert!((pt.rate - (1.0 - hb(0.1))).abs() < 1e-4);
        assert!((pt.rate - 0.531004).abs() < 1e-4);

        let pt = rd_point(&p, &h, 0.5, &cfg).unwrap();
        assert_eq!(pt.rate, 0.0);
        let pt = rd_point(&p, &h, 0.7, &cfg).unwrap();
        assert_eq!(pt.rate, 0.0);

        let pt = rd_point(&p, &h, 0.0, &cfg).unwrap();
        assert_eq!(pt.rate, 1.0);
    }

    #[test]
    fn objective_is_monotone() {
        let p = FiniteDistribution::new(vec![0.6, 0.3, 0.1]).unwrap();
        let (_, trace) = blahut_arimoto_traced(&p, &DistortionMatrix::hamming(3), -2.5, &SolverConfig::default()).unwrap();
        assert!(trace.objective.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = FiniteDistribution::uniform(2);
        let cfg = SolverConfig::default();
        assert!(blahut_arimoto(&p, &DistortionMatrix::hamming(2), 0.5, &cfg).is_err());
        assert!(rd_point(&p, &DistortionMatrix::hamming(2), -0.1, &cfg).is_err());
        let tight = SolverConfig {
            max_iters: 1,
            ..SolverConfig::default()
        };
        assert!(matches!(
            blahut_arimoto(&FiniteDistribution::new(vec![0.7, 0.2, 0.1]).unwrap(), &DistortionMatrix::hamming(3), -1.0, &tight),
            Err(Error::NonConvergence { .. })
        ));
    }
}
