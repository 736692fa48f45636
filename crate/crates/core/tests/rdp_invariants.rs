use synrdp::rdp::{
    blahut_arimoto_traced, channel_distortion, channel_perception, perfect_perception_floor, rd_point, rdp_solve,
    semantic_mi_comparison, PerceptionMeasure,
};
use synrdp::{random, DistortionMatrix, FiniteDistribution, RdpPoint, SolverConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const D_GRID: [f64; 5] = [0.05, 0.1, 0.2, 0.3, 0.4];
const P_GRID: [f64; 5] = [0.0, 0.005, 0.02, 0.1, f64::INFINITY];

fn source() -> FiniteDistribution {
    FiniteDistribution::new(vec![0.5, 0.3, 0.2]).unwrap()
}

fn grid() -> Vec<Vec<RdpPoint>> {
    let p = source();
    let h = DistortionMatrix::hamming(3);
    let cfg = SolverConfig::default();
    D_GRID
        .iter()
        .map(|&d| P_GRID.iter().map(|&pt| rdp_solve(&p, &h, d, pt, &cfg).unwrap()).collect())
        .collect()
}

#[test]
fn surface_is_monotone_feasible_and_dominates_rd() {
    let p = source();
    let h = DistortionMatrix::hamming(3);
    let cfg = SolverConfig::default();
    let g = grid();
    for (i, row) in g.iter().enumerate() {
        let rd = rd_point(&p, &h, D_GRID[i], &cfg).unwrap();
        for (j, pt) in row.iter().enumerate() {
            if i > 0 {
                assert!(pt.rate <= g[i - 1][j].rate + 1e-4, "D monotonicity at ({i},{j})");
            }
            if j > 0 {
                assert!(pt.rate <= row[j - 1].rate + 1e-4, "P monotonicity at ({i},{j})");
            }
            assert!(pt.rate >= rd.rate - 1e-4, "dominance at ({i},{j})");

            let w = &pt.channel;
            for x in 0..3 {
                assert!((w.row(x).iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(w.row(x).iter().all(|&v| v >= 0.0));
            }
            assert!(channel_distortion(&p, w, &h) <= D_GRID[i] + 1e-6);
            assert!(channel_perception(&p, w, PerceptionMeasure::Kl) <= P_GRID[j] + 1e-6);
        }
    }
}

#[test]
fn ba_objective_never_increases() {
    let mut r = ChaCha8Rng::seed_from_u64(17);
    let cfg = SolverConfig::default();
    for n in 2..7 {
        let p = random::distribution(&mut r, n);
        for slope in [-0.5, -2.0, -8.0] {
            let (_, trace) = blahut_arimoto_traced(&p, &DistortionMatrix::hamming(n), slope, &cfg).unwrap();
            assert!(trace.objective.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }
}

#[test]
fn perfect_perception_floor_is_zero_for_hamming() {
    let cfg = SolverConfig {
        lambda_max: 64.0,
        ..SolverConfig::default()
    };
    let floor = perfect_perception_floor(&source(), &DistortionMatrix::hamming(3), &cfg).unwrap();
    assert!(floor < 1e-9);
}

#[test]
fn collapsed_mi_never_exceeds_mi() {
    let mut r = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let j = random::joint(&mut r, 4, 5);
        let s = random::partition(&mut r, 5);
        assert!(semantic_mi_comparison(&j, &s).unwrap().holds(1e-12));
    }
}
