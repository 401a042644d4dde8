//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// `||T - T0||^2 + alpha * sum(w |∇T|)`, periodic forward differences,
/// evaluated with explicit loops.
pub fn tv_objective(t: &[f64], t0: &[f64], w: usize, h: usize, wh: &[f64], wv: &[f64], alpha: f64) -> f64 {
    let mut f = 0.0;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            f += (t[i] - t0[i]) * (t[i] - t0[i]);
            let right = t[y * w + (x + 1) % w];
            let down = t[((y + 1) % h) * w + x];
            f += alpha * (wh[i] * (right - t[i]).abs() + wv[i] * (down - t[i]).abs());
        }
    }
    f
}

/// Projected subgradient descent on the TV objective, started at `T0` and
/// projected onto `[min T0, max T0]` (the minimizer lies in that box).
/// Step `1 / (k + 1)` matches the strong-convexity modulus 2 of the data term.
/// Returns the best objective seen.
pub fn tv_subgradient_oracle(t0: &[f64], w: usize, h: usize, wh: &[f64], wv: &[f64], alpha: f64, steps: usize) -> f64 {
    let lo = t0.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = t0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut t = t0.to_vec();
    let mut best = tv_objective(&t, t0, w, h, wh, wv, alpha);
    let mut g = vec![0.0; t.len()];
    let sgn = |v: f64| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 };
    for k in 0..steps {
        for i in 0..t.len() {
            g[i] = 2.0 * (t[i] - t0[i]);
        }
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let r = y * w + (x + 1) % w;
                let d = ((y + 1) % h) * w + x;
                let sh = alpha * wh[i] * sgn(t[r] - t[i]);
                g[r] += sh;
                g[i] -= sh;
                let sv = alpha * wv[i] * sgn(t[d] - t[i]);
                g[d] += sv;
                g[i] -= sv;
            }
        }
        let step = 1.0 / (k as f64 + 1.0);
        for i in 0..t.len() {
            t[i] = (t[i] - step * g[i]).clamp(lo, hi);
        }
        best = best.min(tv_objective(&t, t0, w, h, wh, wv, alpha));
    }
    best
}

/// Per-pixel mean of linearized frames, re-encoded and clamped. Frames are
/// flat `f32` buffers; `gamma = None` means an identity response.
pub fn blur_oracle(frames: &[Vec<f32>], gamma: Option<f64>) -> Vec<f64> {
    let n = frames[0].len();
    let mut out = vec![0.0; n];
    for p in 0..n {
        let mut sum = 0.0;
        for f in frames {
            let y = f[p] as f64;
            sum += match gamma {
                Some(g) => y.max(0.0).powf(g),
                None => y,
            };
        }
        let mean = sum / frames.len() as f64;
        let y = match gamma {
            Some(g) => mean.max(0.0).powf(1.0 / g),
            None => mean,
        };
        out[p] = y.clamp(0.0, 1.0);
    }
    out
}

pub fn psnr_oracle(a: &[f32], b: &[f32]) -> f64 {
    let mut se = 0.0;
    for i in 0..a.len() {
        let d = a[i] as f64 - b[i] as f64;
        se += d * d;
    }
    let mse = se / a.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// SSIM with a direct 2-D 11x11 Gaussian window at every valid position,
/// averaged over channels. Frames are interleaved `w x h x ch` buffers.
pub fn ssim_oracle(a: &[f32], b: &[f32], w: usize, h: usize, ch: usize) -> f64 {
    const N: usize = 11;
    let sigma = 1.5f64;
    let mut kernel = [[0.0f64; N]; N];
    let mut total = 0.0;
    for (i, row) in kernel.iter_mut().enumerate() {
        for (j, k) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *k = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
            total += *k;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut acc = 0.0;
    for c in 0..ch {
        let px = |f: &[f32], x: usize, y: usize| f[(y * w + x) * ch + c] as f64;
        let mut sum = 0.0;
        let mut count = 0usize;
        for y0 in 0..=h - N {
            for x0 in 0..=w - N {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (i, row) in kernel.iter().enumerate() {
                    for (j, k) in row.iter().enumerate() {
                        let k = k / total;
                        let (va, vb) = (px(a, x0 + j, y0 + i), px(b, x0 + j, y0 + i));
                        ma += k * va;
                        mb += k * vb;
                        saa += k * va * va;
                        sbb += k * vb * vb;
                        sab += k * va * vb;
                    }
                }
                let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                sum += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
        acc += sum / count as f64;
    }
    acc / ch as f64
}

/// Single-head softmax attention with explicit loops.
pub fn attention_oracle(q: &[Vec<f64>], k: &[Vec<f64>], v: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = q[0].len() as f64;
    q.iter()
        .map(|qi| {
            let logits: Vec<f64> = k
                .iter()
                .map(|kj| qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / d.sqrt())
                .collect();
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let z: f64 = e.iter().sum();
            (0..v[0].len())
                .map(|c| e.iter().zip(v).map(|(p, vj)| p / z * vj[c]).sum())
                .collect()
        })
        .collect()
}

/// Minimizer over `s = σ²` of `L / (2s) + ln(1 + s)`: a coarse grid, then
/// repeated 10x zooms around the best point.
pub fn sigma_sq_grid_search(l: f64) -> f64 {
    let f = |s: f64| l / (2.0 * s) + (1.0 + s).ln();
    let (mut lo, mut hi) = (1e-6, 1e3);
    let mut best = lo;
    for _ in 0..12 {
        let steps = 2000;
        let dx = (hi - lo) / steps as f64;
        best = (0..=steps)
            .map(|i| lo + dx * i as f64)
            .min_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap();
        lo = (best - 10.0 * dx).max(1e-9);
        hi = best + 10.0 * dx;
    }
    best
}

/// Every file under `root`, keyed by relative path.
pub fn read_tree(root: &std::path::Path) -> std::collections::BTreeMap<std::path::PathBuf, Vec<u8>> {
    fn walk(
        root: &std::path::Path,
        dir: &std::path::Path,
        out: &mut std::collections::BTreeMap<std::path::PathBuf, Vec<u8>>,
    ) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Writes `scenes` toy clips of `frames` 8-bit RGB frames under `root`.
pub fn write_toy_corpus(root: &std::path::Path, scenes: usize, frames: usize, w: usize, h: usize) {
    for s in 0..scenes {
        let dir = root.join(format!("scene{s:02}"));
        std::fs::create_dir_all(&dir).unwrap();
        for k in 0..frames {
            let f = lbn::Frame::from_fn(w, h, 3, |x, y, c| {
                let v = ((x + k + s) % 5) as f32 / 5.0 * 0.7 + ((y + c) % 3) as f32 * 0.1;
                v.clamp(0.0, 1.0)
            })
            .unwrap();
            lbn::frame::save_frame(&f, dir.join(format!("{k:04}.png")), lbn::frame::BitDepth::Eight).unwrap();
        }
    }
}

/// Accelerated projected gradient on the dual of the TV problem,
/// `max_{|p_e| <= alpha w_e} min_T ||T - T0||^2 + pᵀ D T`, whose inner
/// minimizer is `T = T0 - Dᵀp / 2`. Returns `(primal, dual)`: the objective
/// of the recovered `T` and the dual value, which bracket the optimum.
pub fn tv_dual_oracle(t0: &[f64], w: usize, h: usize, wh: &[f64], wv: &[f64], alpha: f64, iters: usize) -> (f64, f64) {
    let n = w * h;
    let right = |i: usize| (i / w) * w + (i % w + 1) % w;
    let down = |i: usize| ((i / w + 1) % h) * w + i % w;
    let primal_of = |ph: &[f64], pv: &[f64]| {
        let mut t = t0.to_vec();
        for i in 0..n {
            t[right(i)] -= ph[i] / 2.0;
            t[i] += ph[i] / 2.0;
            t[down(i)] -= pv[i] / 2.0;
            t[i] += pv[i] / 2.0;
        }
        t
    };
    let cap_h: Vec<f64> = wh.iter().map(|x| alpha * x).collect();
    let cap_v: Vec<f64> = wv.iter().map(|x| alpha * x).collect();
    let (mut ph, mut pv) = (vec![0.0; n], vec![0.0; n]);
    let (mut yh, mut yv) = (ph.clone(), pv.clone());
    let mut momentum = 1.0f64;
    let step = 0.25;
    for _ in 0..iters {
        let t = primal_of(&yh, &yv);
        let (prev_h, prev_v) = (ph.clone(), pv.clone());
        for i in 0..n {
            ph[i] = (yh[i] + step * (t[right(i)] - t[i])).clamp(-cap_h[i], cap_h[i]);
            pv[i] = (yv[i] + step * (t[down(i)] - t[i])).clamp(-cap_v[i], cap_v[i]);
        }
        let next = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
        let beta = (momentum - 1.0) / next;
        for i in 0..n {
            yh[i] = ph[i] + beta * (ph[i] - prev_h[i]);
            yv[i] = pv[i] + beta * (pv[i] - prev_v[i]);
        }
        momentum = next;
    }
    let t = primal_of(&ph, &pv);
    let primal = tv_objective(&t, t0, w, h, wh, wv, alpha);
    let mut dual = 0.0;
    for i in 0..n {
        dual += (t[i] - t0[i]).powi(2) + ph[i] * (t[right(i)] - t[i]) + pv[i] * (t[down(i)] - t[i]);
    }
    (primal, dual)
}
