//! Signal-dependent sensor noise.
//!
//! Noise is Gaussian with variance `shot * x + read`, where `x` is the clean
//! intensity in linear space. Samples come from a counter-based generator
//! keyed by `(seed, frame index, sample index)`, so the result does not depend
//! on how the work is split across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blur::CameraResponse;
use crate::frame::Frame;
use crate::{Error, Result};

/// Samples generated per parallel work item.
const CHUNK: usize = 1 << 14;
/// 32-bit words drawn per sample (two `u64` for one Box-Muller draw).
const WORDS_PER_SAMPLE: u128 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDomain {
    /// Noise is added after inverting the CRF and re-encoded afterwards.
    Linear,
    /// Noise is added to stored pixel values directly.
    Display,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    /// Variance slope with respect to intensity.
    pub shot: f64,
    /// Variance floor.
    pub read: f64,
    pub seed: u64,
    pub domain: NoiseDomain,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            shot: 0.01,
            read: 1e-4,
            seed: 0,
            domain: NoiseDomain::Linear,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("shot", self.shot), ("read", self.read)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.shot == 0.0 && self.read == 0.0
    }

    pub fn variance_at(&self, x: f64) -> f64 {
        (self.shot * x + self.read).max(0.0)
    }
}

/// Standard normal draws addressed by sample index.
struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    fn at(seed: u64, frame_index: u64, sample_index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(frame_index);
        rng.set_word_pos(sample_index as u128 * WORDS_PER_SAMPLE);
        Self { rng }
    }

    fn next(&mut self) -> f64 {
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = ((self.rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
        let u2 = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Adds noise to `frame` as frame 0 of the stream.
pub fn add_signal_dependent_noise(frame: &Frame, params: &NoiseParams, crf: CameraResponse) -> Result<Frame> {
    add_noise_indexed(frame, params, crf, 0)
}

/// Adds noise to the `frame_index`-th frame of a sequence.
pub fn add_noise_indexed(
    frame: &Frame,
    params: &NoiseParams,
    crf: CameraResponse,
    frame_index: u64,
) -> Result<Frame> {
    params.validate()?;
    if params.is_identity() {
        return Ok(frame.clone());
    }
    let crf = match params.domain {
        NoiseDomain::Linear => crf,
        NoiseDomain::Display => CameraResponse::Identity,
    };
    let mut out = vec![0.0f32; frame.data().len()];
    out.par_chunks_mut(CHUNK)
        .zip(frame.data().par_chunks(CHUNK))
        .enumerate()
        .for_each(|(chunk, (dst, src))| {
            let mut normals = NormalStream::at(params.seed, frame_index, chunk * CHUNK);
            for (d, &s) in dst.iter_mut().zip(src) {
                let x = crf.invert(s as f64);
                let y = x + params.variance_at(x).sqrt() * normals.next();
                *d = crf.apply(y.clamp(0.0, 1.0)) as f32;
            }
        });
    Ok(frame.with_data(out))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBin {
    /// Mean clean linear intensity of the samples in the bin.
    pub intensity: f64,
    /// Unbiased variance of `noisy - clean` in linear space.
    pub variance: f64,
    pub mean_residual: f64,
    pub count: usize,
}

/// Buckets samples by clean linear intensity into `bins` equal-width bins over
/// `[0, 1]` and reports the residual variance per bucket. Buckets with fewer
/// than two samples are omitted.
pub fn estimate_noise_variance(
    clean: &Frame,
    noisy: &Frame,
    bins: usize,
    crf: CameraResponse,
) -> Result<Vec<NoiseBin>> {
    clean.check_same_shape(noisy)?;
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be at least 1".into()));
    }
    // (count, sum x, sum r, sum r^2) with residuals shifted by the first
    // residual in each bin to limit cancellation.
    let mut acc = vec![(0usize, 0.0f64, 0.0f64, 0.0f64, None::<f64>); bins];
    for (&c, &n) in clean.data().iter().zip(noisy.data()) {
        let x = crf.invert(c as f64);
        let r = crf.invert(n as f64) - x;
        let b = ((x * bins as f64).floor() as isize).clamp(0, bins as isize - 1) as usize;
        let slot = &mut acc[b];
        let shift = *slot.4.get_or_insert(r);
        slot.0 += 1;
        slot.1 += x;
        slot.2 += r - shift;
        slot.3 += (r - shift) * (r - shift);
    }
    Ok(acc
        .into_iter()
        .filter(|s| s.0 >= 2)
        .map(|(count, sx, sr, srr, shift)| {
            let n = count as f64;
            let mean = sr / n;
            NoiseBin {
                intensity: sx / n,
                variance: ((srr - n * mean * mean) / (n - 1.0)).max(0.0),
                mean_residual: mean + shift.unwrap_or(0.0),
                count,
            }
        })
        .collect())
}

/// Least-squares line `variance = slope * intensity + intercept`, weighting
/// each bin by its sample count.
pub fn fit_variance_line(bins: &[NoiseBin]) -> Result<(f64, f64)> {
    if bins.len() < 2 {
        return Err(Error::InvalidArgument("need at least two bins to fit a line".into()));
    }
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for b in bins {
        let w = b.count as f64;
        sw += w;
        sx += w * b.intensity;
        sy += w * b.variance;
        sxx += w * b.intensity * b.intensity;
        sxy += w * b.intensity * b.variance;
    }
    let denom = sw * sxx - sx * sx;
    if denom.abs() < f64::EPSILON * sw * sxx {
        return Err(Error::InvalidArgument("bin intensities are degenerate".into()));
    }
    let slope = (sw * sxy - sx * sy) / denom;
    Ok((slope, (sy - slope * sx) / sw))
}
