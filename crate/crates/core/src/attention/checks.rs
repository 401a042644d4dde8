//! Structural invariants of the attention path, run on random tensors.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub trials: usize,
    /// Worst deviation observed, or 0 for exact checks that held.
    pub worst: f64,
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-2.0..2.0))
}

/// Runs every invariant `trials` times with inputs drawn from `seed`.
pub fn run_invariant_suite(seed: u64, trials: usize) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stochastic = 0.0f64;
    let mut hull = 0.0f64;
    let mut perm = 0.0f64;
    let (mut round_trip, mut swap, mut same_frames, mut identity) = (true, true, true, true);

    for trial in 0..trials {
        let rows = rng.random_range(1..12);
        let keys = rng.random_range(1..12);
        let d = rng.random_range(1..6);
        let q = random_matrix(&mut rng, rows, d);
        let k = random_matrix(&mut rng, keys, d);
        let v = random_matrix(&mut rng, keys, d);

        let w = attention_weights(q.view(), k.view(), None);
        for row in w.rows() {
            stochastic = stochastic.max((row.sum() - 1.0).abs());
            if row.iter().any(|&p| p < 0.0) {
                stochastic = f64::INFINITY;
            }
        }

        let out = wmsa(q.view(), k.view(), v.view(), 1)?;
        for (j, col) in v.axis_iter(Axis(1)).enumerate() {
            let lo = col.fold(f64::INFINITY, |m, &x| m.min(x));
            let hi = col.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            for &o in out.column(j) {
                hull = hull.max(lo - o).max(o - hi);
            }
        }

        let mut order: Vec<usize> = (0..keys).collect();
        order.shuffle(&mut rng);
        let kp = k.select(Axis(0), &order);
        let vp = v.select(Axis(0), &order);
        let outp = wmsa(q.view(), kp.view(), vp.view(), 1)?;
        perm = perm.max((&out - &outp).iter().fold(0.0, |m, x: &f64| m.max(x.abs())));

        let (t, h, wd, c) = (
            2 * rng.random_range(1..3),
            rng.random_range(1..10),
            rng.random_range(1..10),
            rng.random_range(1..5),
        );
        let x = FeatureTensor::random(t, h, wd, c, seed ^ trial as u64);
        let ws = window_partition(&x, DEFAULT_WINDOW)?;
        round_trip &= window_reverse(&ws)? == x;

        let heads = 2;
        let dim = 2 * rng.random_range(1..4);
        let n = rng.random_range(1..10);
        let m: Vec<Array2<f64>> = (0..6).map(|_| random_matrix(&mut rng, n, dim)).collect();
        let a = FrameQkv { q: m[0].view(), k: m[1].view(), v: m[2].view() };
        let b = FrameQkv { q: m[3].view(), k: m[4].view(), v: m[5].view() };
        let (y1, y2) = mutual_pair(a, b, heads)?;
        let (s1, s2) = mutual_pair(b, a, heads)?;
        swap &= y1 == s2 && y2 == s1;
        let (i1, i2) = mutual_pair(a, a, heads)?;
        let self_out = wmsa(a.q, a.k, a.v, heads)?;
        same_frames &= i1 == self_out && i2 == self_out;

        let mut p = AttentionParams::seeded(4, 2, DEFAULT_WINDOW, trial % 2 == 0, trial as u64)?;
        p.zero_output_layers();
        let z = FeatureTensor::random(2, h, wd, 4, trial as u64 + 1);
        identity &= attention_block_shifted(&z, &p, (trial % 3, trial % 3))? == z;
    }

    let exact = |passed: bool| if passed { 0.0 } else { f64::INFINITY };
    Ok(vec![
        CheckReport { name: "attention rows are stochastic", passed: stochastic <= 1e-6, trials, worst: stochastic },
        CheckReport { name: "outputs lie within value bounds", passed: hull <= 1e-12, trials, worst: hull },
        CheckReport { name: "key/value permutation equivariance", passed: perm <= 1e-12, trials, worst: perm },
        CheckReport { name: "window partition round trip", passed: round_trip, trials, worst: exact(round_trip) },
        CheckReport { name: "mutual attention frame swap", passed: swap, trials, worst: exact(swap) },
        CheckReport { name: "identical frames: mutual equals self", passed: same_frames, trials, worst: exact(same_frames) },
        CheckReport { name: "zeroed output layers give identity", passed: identity, trials, worst: exact(identity) },
    ])
}
