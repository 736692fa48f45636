//! Subcommand bodies. Each returns its artifacts as bytes plus the checks it
//! asserted; writing and exit codes are handled by the caller.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use synrdp::codec::{self, SamplerMode};
use synrdp::likelihood::{evaluate, kl_descent};
use synrdp::prob::{entropy, semantic_entropy};
use synrdp::rdp::{degeneration_suite, rd_point, rdp_solve, synonymous_rate, Check};
use synrdp::svi::{lossless_conditions_check, svlbo_report};
use synrdp::{RdpPoint, Result};

use crate::config::Experiment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub checks: Vec<Check>,
}

impl Outcome {
    fn merge(&mut self, other: Outcome) {
        self.artifacts.extend(other.artifacts);
        self.checks.extend(other.checks);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializable report");
    out.push(b'\n');
    out
}

/// Finite numbers as JSON numbers, infinities as `"inf"`.
fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn check(name: &str, residual: f64, tol: f64) -> Check {
    Check::new(name, residual, tol)
}

/// Check that passes iff `ok`; the residual is the size of the violation.
fn holds(name: &str, violation: f64) -> Check {
    Check::new(name, violation.max(0.0), f64::MIN_POSITIVE)
}

pub fn entropy_cmd(exp: &Experiment) -> Result<Outcome> {
    let h = entropy(&exp.source);
    let h_s = semantic_entropy(&exp.source, &exp.partition)?;
    let syn_rate = synonymous_rate(&exp.source, &exp.partition)?;
    Ok(Outcome {
        artifacts: vec![("entropy.json".into(), to_json(&json!({ "h": h, "h_s": h_s, "syn_rate": syn_rate })))],
        checks: vec![check("semantic_entropy_at_most_entropy", (h_s - h).max(0.0), 1e-12)],
    })
}

pub fn svi_cmd(exp: &Experiment) -> Result<Outcome> {
    let m = &exp.latent_model;
    let mut records = Vec::new();
    let (mut identity, mut decomposition, mut min_kl) = (0.0f64, 0.0f64, 0.0f64);
    for x in 0..m.source().len() {
        let r = svlbo_report(m, x)?;
        let dec = r.partial_kl - (r.full_kl - r.det_cond_entropy);
        identity = identity.max(r.identity_residual().abs());
        decomposition = decomposition.max(dec.abs());
        min_kl = min_kl.min(r.full_kl);
        records.push(json!({ "x": x, "report": r, "decomposition_residual": dec }));
    }
    let lossless = lossless_conditions_check(m)?;
    let report = json!({ "symbols": records, "lossless_conditions": lossless });
    Ok(Outcome {
        artifacts: vec![("svi_check.json".into(), to_json(&report))],
        checks: vec![
            check("svlbo_identity", identity, 1e-10),
            check("partial_equals_full_minus_detail_entropy", decomposition, 1e-10),
            holds("full_kl_nonnegative", -min_kl - 1e-12),
            holds("lossless_implication", if lossless.implication_holds() { 0.0 } else { 1.0 }),
        ],
    })
}

pub fn lemma_cmd(exp: &Experiment) -> Result<Outcome> {
    let rec = evaluate(&exp.likelihood)?;
    let (fitted, trace) = kl_descent(&exp.likelihood, 1e-8, 100_000)?;
    let fit = evaluate(&fitted)?;
    let last = trace.last().expect("trace starts with the initial model");
    let report = json!({
        "record": rec,
        "descent": { "steps": trace.len() - 1, "kl": last.kl, "delta_p": last.delta_p, "f": fit.f },
    });
    Ok(Outcome {
        artifacts: vec![("lemma_check.json".into(), to_json(&report))],
        checks: vec![
            check("f_equals_kl_plus_delta", rec.residual, 1e-12),
            holds("descent_reaches_kl_floor", last.kl - 1e-8),
            check("delta_converges_to_f", fit.delta_p - fit.f, 1e-6),
        ],
    })
}

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool")
}

fn rd_points(exp: &Experiment, jobs: usize) -> Result<Vec<RdpPoint>> {
    pool(jobs).install(|| {
        exp.sweep
            .d_targets
            .par_iter()
            .map(|&d| rd_point(&exp.source, &exp.distortion, d, &exp.solver))
            .collect()
    })
}

fn rdp_points(exp: &Experiment, jobs: usize) -> Result<Vec<RdpPoint>> {
    let grid: Vec<(f64, f64)> = exp
        .sweep
        .d_targets
        .iter()
        .flat_map(|&d| exp.sweep.p_targets.iter().map(move |&p| (d, p)))
        .collect();
    pool(jobs).install(|| {
        grid.par_iter()
            .map(|&(d, p)| rdp_solve(&exp.source, &exp.distortion, d, p, &exp.solver))
            .collect()
    })
}

const HEADER: &str = "d_target,p_target,rate,achieved_d,achieved_p,iters,converged";

fn sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.8e}")
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn sweep_bytes(points: &[RdpPoint], format: Format) -> Vec<u8> {
    match format {
        Format::Csv => {
            let mut s = String::from(HEADER);
            s.push('\n');
            for p in points {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    sci(p.d_target),
                    sci(p.p_target),
                    sci(p.rate),
                    sci(p.achieved_d),
                    sci(p.achieved_p),
                    p.iters,
                    p.converged
                ));
            }
            s.into_bytes()
        }
        Format::Json => {
            let rows: Vec<Value> = points
                .iter()
                .map(|p| {
                    json!({
                        "d_target": num(p.d_target),
                        "p_target": num(p.p_target),
                        "rate": num(p.rate),
                        "achieved_d": num(p.achieved_d),
                        "achieved_p": num(p.achieved_p),
                        "iters": p.iters,
                        "converged": p.converged,
                    })
                })
                .collect();
            to_json(&rows)
        }
    }
}

fn sweep_name(stem: &str, format: Format) -> String {
    match format {
        Format::Csv => format!("{stem}.csv"),
        Format::Json => format!("{stem}.json"),
    }
}

pub fn rd_curve_cmd(exp: &Experiment, format: Format, jobs: usize) -> Result<Outcome> {
    let pts = rd_points(exp, jobs)?;
    let feasible = pts
        .iter()
        .map(|p| (p.achieved_d - p.d_target).max(0.0))
        .fold(0.0, f64::max);
    Ok(Outcome {
        artifacts: vec![(sweep_name("rd_curve", format), sweep_bytes(&pts, format))],
        checks: vec![holds("rd_distortion_met", feasible - 1e-6)],
    })
}

pub fn rdp_surface_cmd(exp: &Experiment, format: Format, jobs: usize) -> Result<Outcome> {
    let pts = rdp_points(exp, jobs)?;
    let rd = rd_points(exp, jobs)?;
    let np = exp.sweep.p_targets.len();
    let (mut mono_d, mut mono_p, mut dominance, mut infinite, mut constraints) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (k, pt) in pts.iter().enumerate() {
        let (i, j) = (k / np, k % np);
        let d_prev = exp.sweep.d_targets[..i].iter().rposition(|&d| d <= pt.d_target);
        if let Some(ip) = d_prev {
            mono_d = mono_d.max(pt.rate - pts[ip * np + j].rate);
        }
        let p_prev = exp.sweep.p_targets[..j].iter().rposition(|&p| p <= pt.p_target);
        if let Some(jp) = p_prev {
            mono_p = mono_p.max(pt.rate - pts[i * np + jp].rate);
        }
        dominance = dominance.max(rd[i].rate - pt.rate);
        if pt.p_target.is_infinite() {
            infinite = infinite.max((pt.rate - rd[i].rate).abs());
        }
        constraints = constraints
            .max(pt.achieved_d - pt.d_target)
            .max(pt.achieved_p - pt.p_target);
    }
    Ok(Outcome {
        artifacts: vec![(sweep_name("rdp_surface", format), sweep_bytes(&pts, format))],
        checks: vec![
            holds("rate_nonincreasing_in_d", mono_d - 1e-4),
            holds("rate_nonincreasing_in_p", mono_p - 1e-4),
            holds("rdp_dominates_rd", dominance - 1e-4),
            check("infinite_p_matches_rd", infinite, 1e-4),
            holds("constraints_met", constraints - 1e-6),
        ],
    })
}

pub fn codec_cmd(exp: &Experiment, input: Option<Vec<usize>>) -> Result<Outcome> {
    let model = exp.codec_model()?;
    let symbols = match input {
        Some(s) => s,
        None => codec::sample_source(&model, exp.codec.n)?,
    };
    let bs = codec::encode(&symbols, &model)?;
    let blocks = codec::decode_blocks(&bs, &model)?;
    let recon = codec::decode(&bs, &model)?;
    let report = codec::measure(&symbols, &recon, &model, &bs, &exp.distortion)?;

    let s = model.partition();
    let sent: Vec<usize> = symbols.iter().map(|&x| s.block_of(x)).collect();
    let block_errors = sent.iter().zip(&blocks).filter(|(a, b)| a != b).count();
    let ideal = model.frequency_table().ideal_code_length(&sent);
    let mut checks = vec![
        holds("semantic_roundtrip", block_errors as f64),
        holds("rate_bound", bs.bit_length() as f64 - ideal - 32.0 - 1e-6),
    ];
    if model.mode() == SamplerMode::Strict {
        let outside = symbols.iter().zip(&recon).filter(|(&x, &y)| s.block_of(x) != s.block_of(y)).count();
        checks.push(holds("reconstruction_within_synset", outside as f64));
        checks.push(check("pushforward_equals_source", codec::pushforward_residual(&model), 1e-12));
    }

    let mut recon_text = String::with_capacity(recon.len() * 2);
    for y in &recon {
        recon_text.push_str(&y.to_string());
        recon_text.push('\n');
    }
    Ok(Outcome {
        artifacts: vec![
            ("bitstream.srdp".into(), bs.to_bytes()),
            ("codec_report.json".into(), to_json(&report)),
            ("reconstruction.txt".into(), recon_text.into_bytes()),
        ],
        checks,
    })
}

pub fn degenerate_cmd(exp: &Experiment) -> Result<Outcome> {
    let report = degeneration_suite(&exp.source, &exp.distortion, &exp.partition, &exp.solver)?;
    Ok(Outcome {
        artifacts: vec![("degeneration.json".into(), to_json(&report))],
        checks: report.checks,
    })
}

pub fn all_cmd(exp: &Experiment, format: Format, jobs: usize) -> Result<Outcome> {
    let mut out = Outcome::default();
    out.merge(entropy_cmd(exp)?);
    out.merge(svi_cmd(exp)?);
    out.merge(lemma_cmd(exp)?);
    out.merge(rd_curve_cmd(exp, format, jobs)?);
    out.merge(rdp_surface_cmd(exp, format, jobs)?);
    out.merge(codec_cmd(exp, None)?);
    out.merge(degenerate_cmd(exp)?);
    let summary = json!({
        "seed": exp.seed,
        "passed": out.passed(),
        "checks": out.checks,
    });
    out.artifacts.push(("summary.json".into(), to_json(&summary)));
    Ok(out)
}
