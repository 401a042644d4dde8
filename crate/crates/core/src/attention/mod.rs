//! Forward pass of the windowed mutual/self attention block and the
//! tier-to-tier feature fusion.
//!
//! Frames are processed in pairs: every space-time window spans two frames,
//! queries from one frame attend to the keys/values of the other (mutual
//! attention) and of itself (self attention). The block is
//!
//! ```text
//! X          = LN(Z)
//! Q, K, V    = X Wq, X Wk, X Wv
//! Ŷ1, Ŷ2     = MHA(Q2, K1, V1), MHA(Q1, K2, V2)
//! Y1, Y2     = MHA(Q1, K1, V1), MHA(Q2, K2, V2)
//! Ẑ          = [Ŷ | Y] Wout + Z
//! Z'         = FFN(LN(Ẑ)) + Ẑ
//! ```
//!
//! Self-only blocks drop the `Ŷ` half. Weights are seeded, never trained.

pub mod checks;
mod window;

use ndarray::{concatenate, s, Array1, Array2, Array4, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub use window::{pad_to_window, window_partition, window_reverse, Window, WindowLayout, WindowSet, WindowSize};

/// Layer-norm variance stabilizer.
pub const LN_EPS: f64 = 1e-5;

/// Default window for small experiments; the full-size model uses 6×8×8.
pub const DEFAULT_WINDOW: WindowSize = WindowSize::new(2, 4, 4);

/// Activations laid out as (t, h, w, c).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    data: Array4<f64>,
}

impl FeatureTensor {
    pub fn new(t: usize, h: usize, w: usize, c: usize, data: Vec<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("feature values must be finite".into()));
        }
        let data = Array4::from_shape_vec((t, h, w, c), data)
            .map_err(|e| Error::DimensionMismatch(format!("feature tensor {t}x{h}x{w}x{c}: {e}")))?;
        Ok(Self { data })
    }

    pub fn zeros(t: usize, h: usize, w: usize, c: usize) -> Self {
        Self {
            data: Array4::zeros((t, h, w, c)),
        }
    }

    pub fn from_fn(
        t: usize,
        h: usize,
        w: usize,
        c: usize,
        f: impl FnMut((usize, usize, usize, usize)) -> f64,
    ) -> Self {
        Self {
            data: Array4::from_shape_fn((t, h, w, c), f),
        }
    }

    /// Uniform random values in `[-1, 1)`.
    pub fn random(t: usize, h: usize, w: usize, c: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::from_fn(t, h, w, c, |_| rng.random_range(-1.0..1.0))
    }

    pub(crate) fn from_array(data: Array4<f64>) -> Self {
        Self { data }
    }

    pub fn array(&self) -> &Array4<f64> {
        &self.data
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        self.data.dim()
    }

    pub fn t(&self) -> usize {
        self.data.dim().0
    }

    pub fn h(&self) -> usize {
        self.data.dim().1
    }

    pub fn w(&self) -> usize {
        self.data.dim().2
    }

    pub fn c(&self) -> usize {
        self.data.dim().3
    }

    /// One row per token, (t, h, w) row-major.
    pub fn tokens(&self) -> Array2<f64> {
        let (t, h, w, c) = self.shape();
        self.data
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((t * h * w, c))
            .expect("standard layout")
    }

    fn from_tokens(tokens: Array2<f64>, t: usize, h: usize, w: usize) -> Self {
        let c = tokens.ncols();
        Self {
            data: tokens
                .as_standard_layout()
                .to_owned()
                .into_shape_with_order((t, h, w, c))
                .expect("token count matches shape"),
        }
    }

    /// Swaps frames `2i` and `2i + 1` for every pair.
    pub fn swap_pairs(&self) -> Self {
        let t = self.t();
        let mut out = self.data.clone();
        for i in (0..t - t % 2).step_by(2) {
            out.index_axis_mut(Axis(0), i).assign(&self.data.index_axis(Axis(0), i + 1));
            out.index_axis_mut(Axis(0), i + 1).assign(&self.data.index_axis(Axis(0), i));
        }
        Self { data: out }
    }

    /// Cyclic spatial shift: `out[y][x] = in[(y + dy) % h][(x + dx) % w]`.
    fn roll_spatial(&self, dy: usize, dx: usize) -> Self {
        let (t, h, w, c) = self.shape();
        let src = &self.data;
        Self::from_fn(t, h, w, c, |(ti, y, x, ci)| src[[ti, (y + dy) % h, (x + dx) % w, ci]])
    }
}

/// Per-row standardization followed by `gain * x + bias`.
pub fn layer_norm(x: ArrayView2<f64>, gain: &Array1<f64>, bias: &Array1<f64>) -> Array2<f64> {
    let c = x.ncols() as f64;
    let mut out = x.to_owned();
    for mut row in out.rows_mut() {
        let mean = row.sum() / c;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - mean) * inv * gain[j] + bias[j];
        }
    }
    out
}

/// Row-stochastic `softmax(q kᵀ / sqrt(d))` for a single head.
///
/// With `labels`, query `i` may only attend to key `j` when
/// `labels.0[i] == labels.1[j]`.
pub fn attention_weights(q: ArrayView2<f64>, k: ArrayView2<f64>, labels: Option<(&[u32], &[u32])>) -> Array2<f64> {
    let scale = 1.0 / (q.ncols() as f64).sqrt();
    let mut logits = q.dot(&k.t()) * scale;
    if let Some((lq, lk)) = labels {
        for ((i, j), v) in logits.indexed_iter_mut() {
            if lq[i] != lk[j] {
                *v = f64::NEG_INFINITY;
            }
        }
    }
    for mut row in logits.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    logits
}

fn check_heads(q: &ArrayView2<f64>, k: &ArrayView2<f64>, v: &ArrayView2<f64>, heads: usize) -> Result<()> {
    if heads == 0 || q.ncols() % heads != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{} channels do not split into {heads} heads",
            q.ncols()
        )));
    }
    if q.ncols() != k.ncols() || k.ncols() != v.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "q/k/v widths {}/{}/{}",
            q.ncols(),
            k.ncols(),
            v.ncols()
        )));
    }
    if k.nrows() != v.nrows() || k.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!("{} keys vs {} values", k.nrows(), v.nrows())));
    }
    Ok(())
}

/// Multi-head scaled dot-product attention; heads are concatenated.
pub fn multi_head_attention(
    q: ArrayView2<f64>,
    k: ArrayView2<f64>,
    v: ArrayView2<f64>,
    heads: usize,
    labels: Option<(&[u32], &[u32])>,
) -> Result<Array2<f64>> {
    check_heads(&q, &k, &v, heads)?;
    let d = q.ncols() / heads;
    let outs: Vec<Array2<f64>> = (0..heads)
        .map(|h| {
            let cols = s![.., h * d..(h + 1) * d];
            attention_weights(q.slice(cols), k.slice(cols), labels).dot(&v.slice(cols))
        })
        .collect();
    let views: Vec<_> = outs.iter().map(|o| o.view()).collect();
    Ok(concatenate(Axis(1), &views).expect("equal row counts"))
}

/// Window self-attention: queries, keys and values from the same frame.
pub fn wmsa(q: ArrayView2<f64>, k: ArrayView2<f64>, v: ArrayView2<f64>, heads: usize) -> Result<Array2<f64>> {
    multi_head_attention(q, k, v, heads, None)
}

/// Window mutual attention: queries from the paired frame attend to this
/// frame's keys and values.
pub fn wmma(
    q_other: ArrayView2<f64>,
    k_self: ArrayView2<f64>,
    v_self: ArrayView2<f64>,
    heads: usize,
) -> Result<Array2<f64>> {
    multi_head_attention(q_other, k_self, v_self, heads, None)
}

/// Per-frame projections of one frame pair.
#[derive(Debug, Clone, Copy)]
pub struct FrameQkv<'a> {
    pub q: ArrayView2<'a, f64>,
    pub k: ArrayView2<'a, f64>,
    pub v: ArrayView2<'a, f64>,
}

/// `(Ŷ1, Ŷ2)` for a frame pair.
pub fn mutual_pair(first: FrameQkv, second: FrameQkv, heads: usize) -> Result<(Array2<f64>, Array2<f64>)> {
    Ok((
        wmma(second.q, first.k, first.v, heads)?,
        wmma(first.q, second.k, second.v, heads)?,
    ))
}

fn seeded_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-0.1..=0.1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub channels: usize,
    pub heads: usize,
    pub window: WindowSize,
    /// Mutual + self attention when true, self attention only otherwise.
    pub mutual: bool,
    pub norm1_gain: Array1<f64>,
    pub norm1_bias: Array1<f64>,
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
    /// `2c x c` for mutual blocks, `c x c` otherwise.
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
    pub norm2_gain: Array1<f64>,
    pub norm2_bias: Array1<f64>,
    pub mlp_w1: Array2<f64>,
    pub mlp_b1: Array1<f64>,
    pub mlp_w2: Array2<f64>,
    pub mlp_b2: Array1<f64>,
}

impl AttentionParams {
    /// Weights uniform in `[-0.1, 0.1]`, zero biases, unit norm gains. The
    /// feed-forward hidden width is `2c`.
    pub fn seeded(channels: usize, heads: usize, window: WindowSize, mutual: bool, seed: u64) -> Result<Self> {
        if channels == 0 || heads == 0 || channels % heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "{channels} channels do not split into {heads} heads"
            )));
        }
        if window.t != 2 {
            return Err(Error::InvalidArgument(format!(
                "attention windows pair frames, temporal extent must be 2, got {}",
                window.t
            )));
        }
        if window.h == 0 || window.w == 0 {
            return Err(Error::InvalidArgument("window dimensions must be positive".into()));
        }
        let c = channels;
        let hidden = 2 * c;
        let out_in = if mutual { 2 * c } else { c };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            channels,
            heads,
            window,
            mutual,
            norm1_gain: Array1::ones(c),
            norm1_bias: Array1::zeros(c),
            w_q: seeded_matrix(&mut rng, c, c),
            w_k: seeded_matrix(&mut rng, c, c),
            w_v: seeded_matrix(&mut rng, c, c),
            w_out: seeded_matrix(&mut rng, out_in, c),
            b_out: Array1::zeros(c),
            norm2_gain: Array1::ones(c),
            norm2_bias: Array1::zeros(c),
            mlp_w1: seeded_matrix(&mut rng, c, hidden),
            mlp_b1: Array1::zeros(hidden),
            mlp_w2: seeded_matrix(&mut rng, hidden, c),
            mlp_b2: Array1::zeros(c),
        })
    }

    /// Zeroes both residual-branch output layers, making the block an identity.
    pub fn zero_output_layers(&mut self) {
        self.w_out.fill(0.0);
        self.b_out.fill(0.0);
        self.mlp_w2.fill(0.0);
        self.mlp_b2.fill(0.0);
    }
}

fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

/// Region labels for a spatially rolled, padded grid so that tokens wrapped
/// around by the roll do not attend across the seam.
fn shift_labels(ph: usize, pw: usize, window: WindowSize, shift: (usize, usize)) -> Vec<u32> {
    let region = |i: usize, n: usize, win: usize, sh: usize| -> u32 {
        if sh == 0 || i < n - win {
            0
        } else if i < n - sh {
            1
        } else {
            2
        }
    };
    let mut labels = Vec::with_capacity(ph * pw);
    for y in 0..ph {
        for x in 0..pw {
            labels.push(region(y, ph, window.h, shift.0) * 3 + region(x, pw, window.w, shift.1));
        }
    }
    labels
}

/// The attention block with unshifted windows.
pub fn attention_block(z: &FeatureTensor, params: &AttentionParams) -> Result<FeatureTensor> {
    attention_block_shifted(z, params, (0, 0))
}

/// The attention block with windows offset by `shift = (dy, dx)` pixels.
pub fn attention_block_shifted(
    z: &FeatureTensor,
    params: &AttentionParams,
    shift: (usize, usize),
) -> Result<FeatureTensor> {
    let (t, h, w, c) = z.shape();
    if t % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "attention block needs an even frame count, got {t}"
        )));
    }
    if c != params.channels {
        return Err(Error::DimensionMismatch(format!(
            "tensor has {c} channels, block expects {}",
            params.channels
        )));
    }
    let win = params.window;
    let shift = (shift.0 % win.h, shift.1 % win.w);

    let tokens = z.tokens();
    let x = layer_norm(tokens.view(), &params.norm1_gain, &params.norm1_bias);
    let project = |m: &Array2<f64>| -> Result<WindowSet> {
        let padded = pad_to_window(&FeatureTensor::from_tokens(x.dot(m), t, h, w), win)?;
        let rolled = if shift == (0, 0) {
            padded
        } else {
            padded.roll_spatial(shift.0, shift.1)
        };
        window_partition(&rolled, win)
    };
    let (qs, ks, vs) = (project(&params.w_q)?, project(&params.w_k)?, project(&params.w_v)?);
    let layout = qs.layout;
    let (_, ph, pw) = layout.padded;

    let grid_labels = (shift != (0, 0)).then(|| shift_labels(ph, pw, win, shift));
    let n = win.frame_tokens();
    let mut out_windows = Vec::with_capacity(qs.windows.len());
    for ((qw, kw), vw) in qs.windows.iter().zip(&ks.windows).zip(&vs.windows) {
        let (_, gh, gw) = qw.origin;
        let labels: Option<Vec<u32>> = grid_labels.as_ref().map(|g| {
            (0..n)
                .map(|i| g[(gh * win.h + i / win.w) * pw + gw * win.w + i % win.w])
                .collect()
        });
        let lab = labels.as_deref().map(|l| (l, l));
        let half = |m: &Array2<f64>, f: usize| m.slice(s![f * n..(f + 1) * n, ..]).to_owned();
        let (q1, q2) = (half(&qw.tokens, 0), half(&qw.tokens, 1));
        let (k1, k2) = (half(&kw.tokens, 0), half(&kw.tokens, 1));
        let (v1, v2) = (half(&vw.tokens, 0), half(&vw.tokens, 1));

        let y1 = multi_head_attention(q1.view(), k1.view(), v1.view(), params.heads, lab)?;
        let y2 = multi_head_attention(q2.view(), k2.view(), v2.view(), params.heads, lab)?;
        let (f1, f2) = if params.mutual {
            let yh1 = multi_head_attention(q2.view(), k1.view(), v1.view(), params.heads, lab)?;
            let yh2 = multi_head_attention(q1.view(), k2.view(), v2.view(), params.heads, lab)?;
            (
                concatenate(Axis(1), &[yh1.view(), y1.view()]).expect("same rows"),
                concatenate(Axis(1), &[yh2.view(), y2.view()]).expect("same rows"),
            )
        } else {
            (y1, y2)
        };
        out_windows.push(Window {
            origin: qw.origin,
            tokens: concatenate(Axis(0), &[f1.view(), f2.view()]).expect("same width"),
        });
    }

    let mixed = window_reverse(&WindowSet {
        windows: out_windows,
        layout,
    })?;
    let mixed = if shift == (0, 0) {
        mixed
    } else {
        mixed.roll_spatial(ph - shift.0, pw - shift.1)
    };
    let mixed = mixed.data.slice(s![..t, ..h, ..w, ..]).to_owned();
    let mixed = FeatureTensor::from_array(mixed).tokens();

    let z_hat = mixed.dot(&params.w_out) + &params.b_out + &tokens;
    let normed = layer_norm(z_hat.view(), &params.norm2_gain, &params.norm2_bias);
    let hidden = (normed.dot(&params.mlp_w1) + &params.mlp_b1).mapv(gelu);
    let z2 = hidden.dot(&params.mlp_w2) + &params.mlp_b2 + &z_hat;
    Ok(FeatureTensor::from_tokens(z2, t, h, w))
}

/// A run of attention blocks: `mutual_blocks` mutual+self blocks followed by
/// `self_blocks` self-only blocks. Odd-indexed blocks shift their windows by
/// half a window.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStack {
    pub blocks: Vec<AttentionParams>,
}

impl BlockStack {
    pub fn seeded(
        channels: usize,
        heads: usize,
        window: WindowSize,
        mutual_blocks: usize,
        self_blocks: usize,
        seed: u64,
    ) -> Result<Self> {
        let blocks = (0..mutual_blocks + self_blocks)
            .map(|i| AttentionParams::seeded(channels, heads, window, i < mutual_blocks, seed.wrapping_add(i as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks })
    }

    pub fn shift_for(&self, index: usize) -> (usize, usize) {
        let win = self.blocks[index].window;
        if index % 2 == 1 {
            (win.h / 2, win.w / 2)
        } else {
            (0, 0)
        }
    }

    pub fn forward(&self, z: &FeatureTensor) -> Result<FeatureTensor> {
        let mut x = z.clone();
        for (i, block) in self.blocks.iter().enumerate() {
            x = attention_block_shifted(&x, block, self.shift_for(i))?;
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub channels: usize,
    pub norm_gain: Array1<f64>,
    pub norm_bias: Array1<f64>,
    /// `2c x c` down-projection.
    pub down: Array2<f64>,
}

impl FusionParams {
    pub fn seeded(channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            channels,
            norm_gain: Array1::ones(2 * channels),
            norm_bias: Array1::zeros(2 * channels),
            down: seeded_matrix(&mut rng, 2 * channels, channels),
        }
    }

    /// `[I | 0]ᵀ`: keeps the previous tier's (normalized) half.
    pub fn selector(channels: usize) -> Self {
        let mut down = Array2::zeros((2 * channels, channels));
        for i in 0..channels {
            down[[i, i]] = 1.0;
        }
        Self {
            channels,
            norm_gain: Array1::ones(2 * channels),
            norm_bias: Array1::zeros(2 * channels),
            down,
        }
    }
}

/// Concatenates the previous tier's features with the current ones along
/// channels, normalizes over `2c` and projects back to `c`.
pub fn feature_fusion(prev_tier: &FeatureTensor, current: &FeatureTensor, params: &FusionParams) -> Result<FeatureTensor> {
    let (t, h, w, c) = prev_tier.shape();
    let (t2, h2, w2, c2) = current.shape();
    if (t, h, w) != (t2, h2, w2) {
        return Err(Error::DimensionMismatch(format!(
            "fusion inputs {t}x{h}x{w} vs {t2}x{h2}x{w2}"
        )));
    }
    if c != params.channels || c2 != params.channels {
        return Err(Error::DimensionMismatch(format!(
            "fusion expects {} channels, got {c} and {c2}",
            params.channels
        )));
    }
    let joined = concatenate(Axis(1), &[prev_tier.tokens().view(), current.tokens().view()]).expect("same rows");
    let normed = layer_norm(joined.view(), &params.norm_gain, &params.norm_bias);
    Ok(FeatureTensor::from_tokens(normed.dot(&params.down), t, h, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn layer_norm_closed_forms() {
        let ones = Array1::ones(4);
        let zeros = Array1::zeros(4);
        let out = layer_norm(array![[1.0, 1.0, 1.0, 1.0]].view(), &ones, &zeros);
        assert!(out.iter().all(|&v| v == 0.0));

        let out = layer_norm(array![[-1.0, 1.0]].view(), &Array1::ones(2), &Array1::zeros(2));
        assert!((out[[0, 0]] + 1.0).abs() < 1e-3 && (out[[0, 1]] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn zero_keys_average_values() {
        let q = array![[1.0, 2.0], [-3.0, 0.5], [0.0, 1.0]];
        let k = Array2::zeros((3, 2));
        let v = array![[1.0, 0.0], [2.0, 3.0], [6.0, 3.0]];
        let out = wmsa(q.view(), k.view(), v.view(), 1).unwrap();
        for row in out.rows() {
            assert!((row[0] - 3.0).abs() < 1e-12 && (row[1] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_row_returns_value() {
        let out = wmsa(array![[0.3, -1.0]].view(), array![[2.0, 1.0]].view(), array![[5.0, 7.0]].view(), 2).unwrap();
        assert_eq!(out, array![[5.0, 7.0]]);
    }

    #[test]
    fn head_mismatch_rejected() {
        let m = Array2::<f64>::zeros((2, 3));
        assert!(wmsa(m.view(), m.view(), m.view(), 2).is_err());
        let k = Array2::<f64>::zeros((3, 3));
        assert!(wmsa(m.view(), k.view(), m.view(), 1).is_err());
    }

    #[test]
    fn block_rejects_bad_shapes() {
        let p = AttentionParams::seeded(6, 3, DEFAULT_WINDOW, true, 1).unwrap();
        assert!(attention_block(&FeatureTensor::random(3, 4, 4, 6, 0), &p).is_err());
        assert!(attention_block(&FeatureTensor::random(2, 4, 4, 4, 0), &p).is_err());
        assert!(AttentionParams::seeded(6, 4, DEFAULT_WINDOW, true, 1).is_err());
        assert!(AttentionParams::seeded(6, 3, WindowSize::new(3, 4, 4), true, 1).is_err());
    }

    #[test]
    fn block_keeps_shape_and_is_deterministic() {
        let p = AttentionParams::seeded(6, 2, DEFAULT_WINDOW, true, 9).unwrap();
        let z = FeatureTensor::random(4, 5, 7, 6, 3);
        let a = attention_block(&z, &p).unwrap();
        let b = attention_block(&z, &p).unwrap();
        assert_eq!(a.shape(), z.shape());
        assert_eq!(a, b);
        let shifted = attention_block_shifted(&z, &p, (2, 2)).unwrap();
        assert_eq!(shifted.shape(), z.shape());
    }

    #[test]
    fn zeroed_outputs_are_identity() {
        for mutual in [true, false] {
            let mut p = AttentionParams::seeded(4, 2, DEFAULT_WINDOW, mutual, 5).unwrap();
            p.zero_output_layers();
            let z = FeatureTensor::random(2, 6, 5, 4, 8);
            assert_eq!(attention_block_shifted(&z, &p, (2, 2)).unwrap(), z);
        }
    }

    #[test]
    fn block_stack_runs() {
        let stack = BlockStack::seeded(6, 6, DEFAULT_WINDOW, 2, 1, 11).unwrap();
        assert_eq!(stack.blocks.iter().filter(|b| b.mutual).count(), 2);
        assert_eq!(stack.shift_for(1), (2, 2));
        let z = FeatureTensor::random(2, 8, 8, 6, 1);
        assert_eq!(stack.forward(&z).unwrap().shape(), z.shape());
    }

    #[test]
    fn shift_labels_regions() {
        let labels = shift_labels(8, 8, DEFAULT_WINDOW, (2, 2));
        // top-left window is a single region
        assert!((0..4).all(|y| (0..4).all(|x| labels[y * 8 + x] == 0)));
        // bottom-right window mixes four regions
        let mut seen: Vec<u32> = (4..8).flat_map(|y| (4..8).map(move |x| y * 8 + x)).map(|i| labels[i]).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn fusion_selector_keeps_previous_tier() {
        let prev = FeatureTensor::random(2, 3, 3, 4, 1);
        let cur = FeatureTensor::random(2, 3, 3, 4, 2);
        let out = feature_fusion(&prev, &cur, &FusionParams::selector(4)).unwrap();
        assert_eq!(out.c(), 4);
        let joined = concatenate(Axis(1), &[prev.tokens().view(), cur.tokens().view()]).unwrap();
        let normed = layer_norm(joined.view(), &Array1::ones(8), &Array1::zeros(8));
        let want = normed.slice(s![.., ..4]).to_owned();
        assert_eq!(out.tokens(), want);
        assert!(feature_fusion(&prev, &FeatureTensor::random(2, 3, 4, 4, 2), &FusionParams::selector(4)).is_err());
    }
}
