//! Motion blur by averaging consecutive frames in CRF-linearized space.
//!
//! A blurry frame is `g(mean_t g^-1(I_t))` where `g` is the camera response.
//! High frame rates are emulated by linear cross-fades between source frames;
//! windows of consecutive (interpolated) frames are then averaged and paired
//! with their middle frame as the sharp target.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::frame::{Frame, FrameSequence};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CameraResponse {
    Identity,
    Gamma { gamma: f64 },
}

impl Default for CameraResponse {
    fn default() -> Self {
        CameraResponse::Gamma { gamma: 2.2 }
    }
}

impl CameraResponse {
    pub fn gamma(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma.is_finite() {
            Ok(CameraResponse::Gamma { gamma })
        } else {
            Err(Error::InvalidArgument(format!("CRF gamma must be positive, got {gamma}")))
        }
    }

    /// Linear radiance to display value.
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            CameraResponse::Identity => x,
            CameraResponse::Gamma { gamma } => x.max(0.0).powf(gamma.recip()),
        }
    }

    /// Display value to linear radiance; exact inverse of [`apply`](Self::apply).
    #[inline]
    pub fn invert(self, y: f64) -> f64 {
        match self {
            CameraResponse::Identity => y,
            CameraResponse::Gamma { gamma } => y.max(0.0).powf(gamma),
        }
    }
}

pub fn crf_apply(x: f64, crf: CameraResponse) -> f64 {
    crf.apply(x)
}

pub fn crf_invert(y: f64, crf: CameraResponse) -> f64 {
    crf.invert(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlurConfig {
    /// Frames averaged into one blurry frame, counted after interpolation.
    pub window_len: usize,
    /// Interpolated steps per source frame interval (60 -> 1920 FPS is 32).
    pub interp_factor: usize,
    pub crf: CameraResponse,
}

impl Default for BlurConfig {
    fn default() -> Self {
        Self {
            window_len: 160,
            interp_factor: 32,
            crf: CameraResponse::default(),
        }
    }
}

impl BlurConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 {
            return Err(Error::InvalidArgument("window_len must be at least 1".into()));
        }
        if self.interp_factor == 0 {
            return Err(Error::InvalidArgument("interp_factor must be at least 1".into()));
        }
        if let CameraResponse::Gamma { gamma } = self.crf {
            CameraResponse::gamma(gamma)?;
        }
        Ok(())
    }

    /// Index of the sharp frame inside a window.
    pub fn middle_index(&self) -> usize {
        self.window_len / 2
    }
}

/// Linear cross-fade between two frames: `(1 - t) * a + t * b`.
pub fn blend(a: &Frame, b: &Frame, t: f64) -> Result<Frame> {
    a.check_same_shape(b)?;
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| ((1.0 - t) * x as f64 + t * y as f64) as f32)
        .collect();
    Ok(a.with_data(data))
}

/// Inserts `factor - 1` cross-faded frames between every consecutive pair.
///
/// Source frames appear unchanged at indices `0, factor, 2 * factor, ...`.
pub fn interpolate_sequence(seq: &FrameSequence, factor: usize) -> Result<FrameSequence> {
    if factor == 0 {
        return Err(Error::InvalidArgument("interpolation factor must be at least 1".into()));
    }
    if seq.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "interpolation needs at least 2 frames, got {}",
            seq.len()
        )));
    }
    let out_len = interpolated_len(seq.len(), factor);
    let frames = (0..out_len)
        .map(|j| interpolated_frame(seq.frames(), factor, j))
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames, seq.frame_rate() * factor as f64)
}

fn interpolated_len(len: usize, factor: usize) -> usize {
    (len - 1) * factor + 1
}

fn interpolated_frame(frames: &[Frame], factor: usize, j: usize) -> Result<Frame> {
    let (i, k) = (j / factor, j % factor);
    if k == 0 {
        Ok(frames[i].clone())
    } else {
        blend(&frames[i], &frames[i + 1], k as f64 / factor as f64)
    }
}

/// Running sum of CRF-linearized frames.
#[derive(Debug, Clone)]
pub struct BlurAccumulator {
    crf: CameraResponse,
    template: Option<Frame>,
    sum: Vec<f64>,
    count: usize,
}

impl BlurAccumulator {
    pub fn new(crf: CameraResponse) -> Self {
        Self {
            crf,
            template: None,
            sum: Vec::new(),
            count: 0,
        }
    }

    pub fn push(&mut self, frame: &Frame) -> Result<()> {
        match &self.template {
            Some(t) => t.check_same_shape(frame)?,
            None => {
                self.template = Some(frame.clone());
                self.sum = vec![0.0; frame.data().len()];
            }
        }
        for (acc, &v) in self.sum.iter_mut().zip(frame.data()) {
            *acc += self.crf.invert(v as f64);
        }
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `g(sum / count)`, clamped to `[0, 1]`.
    pub fn finish(&self) -> Result<Frame> {
        self.finish_with(true)
    }

    fn finish_with(&self, clamp: bool) -> Result<Frame> {
        let template = self.template.as_ref().ok_or(Error::Empty("no frames to blur"))?;
        let n = self.count as f64;
        let data = self
            .sum
            .iter()
            .map(|&s| {
                let v = self.crf.apply(s / n);
                (if clamp { v.clamp(0.0, 1.0) } else { v }) as f32
            })
            .collect();
        Ok(template.with_data(data))
    }
}

/// Averages `frames` in linear space and maps the mean back through the CRF.
pub fn synthesize_blur(frames: &[Frame], crf: CameraResponse) -> Result<Frame> {
    if frames.is_empty() {
        return Err(Error::Empty("synthesize_blur needs at least one frame"));
    }
    let mut acc = BlurAccumulator::new(crf);
    for f in frames {
        acc.push(f)?;
    }
    acc.finish()
}

/// Like [`synthesize_blur`] but without the final clamp, for mass checks.
pub fn synthesize_blur_unclamped(frames: &[Frame], crf: CameraResponse) -> Result<Frame> {
    if frames.is_empty() {
        return Err(Error::Empty("synthesize_blur needs at least one frame"));
    }
    let mut acc = BlurAccumulator::new(crf);
    for f in frames {
        acc.push(f)?;
    }
    acc.finish_with(false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlurPair {
    pub blurry: Frame,
    pub sharp: Frame,
}

/// Splits an already high-rate sequence into disjoint windows of
/// `config.window_len` frames and blurs each one.
///
/// Trailing frames that do not fill a window are dropped. `interp_factor` is
/// not applied here; see [`make_pairs_from_source`].
pub fn make_pairs(seq: &FrameSequence, config: &BlurConfig) -> Result<Vec<BlurPair>> {
    config.validate()?;
    let w = config.window_len;
    if seq.len() < w {
        return Err(Error::SequenceTooShort { len: seq.len(), window: w });
    }
    seq.frames()
        .par_chunks_exact(w)
        .map(|window| {
            Ok(BlurPair {
                blurry: synthesize_blur(window, config.crf)?,
                sharp: window[config.middle_index()].clone(),
            })
        })
        .collect()
}

/// Number of blur windows produced from `source_len` frames at the source rate.
pub fn pair_count(source_len: usize, config: &BlurConfig) -> usize {
    if source_len == 0 {
        return 0;
    }
    let len = if config.interp_factor == 1 || source_len < 2 {
        source_len
    } else {
        interpolated_len(source_len, config.interp_factor)
    };
    len / config.window_len
}

/// Interpolates `source` by `config.interp_factor` and blurs disjoint windows,
/// generating interpolated frames on the fly instead of materializing the
/// whole high-rate sequence. Equivalent to
/// `make_pairs(&interpolate_sequence(source, factor)?, config)`.
pub fn make_pairs_from_source(source: &FrameSequence, config: &BlurConfig) -> Result<Vec<BlurPair>> {
    config.validate()?;
    if config.interp_factor == 1 || source.len() < 2 {
        return make_pairs(source, config);
    }
    let (w, factor) = (config.window_len, config.interp_factor);
    let total = interpolated_len(source.len(), factor);
    if total < w {
        return Err(Error::SequenceTooShort { len: total, window: w });
    }
    let frames = source.frames();
    (0..total / w)
        .into_par_iter()
        .map(|p| {
            let start = p * w;
            let mut acc = BlurAccumulator::new(config.crf);
            let mut sharp = None;
            for j in start..start + w {
                let f = interpolated_frame(frames, factor, j)?;
                acc.push(&f)?;
                if j - start == config.middle_index() {
                    sharp = Some(f);
                }
            }
            Ok(BlurPair {
                blurry: acc.finish()?,
                sharp: sharp.expect("middle index lies inside the window"),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(v: f32) -> Frame {
        Frame::filled(3, 2, 1, v).unwrap()
    }

    #[test]
    fn crf_closed_forms() {
        assert_eq!(crf_apply(0.37, CameraResponse::Identity), 0.37);
        let g22 = CameraResponse::gamma(2.2).unwrap();
        assert_eq!(crf_apply(0.0, g22), 0.0);
        assert_eq!(crf_apply(1.0, g22), 1.0);
        let g2 = CameraResponse::gamma(2.0).unwrap();
        assert!((crf_apply(0.25, g2) - 0.5).abs() < 1e-15);
        assert!((crf_invert(0.5, g2) - 0.25).abs() < 1e-15);
        assert_eq!(crf_invert(0.8, CameraResponse::Identity), 0.8);
        assert!(CameraResponse::gamma(0.0).is_err());
    }

    #[test]
    fn interpolation_factor_one_is_identity() {
        let seq = FrameSequence::new(vec![constant(0.1), constant(0.7)], 60.0).unwrap();
        let out = interpolate_sequence(&seq, 1).unwrap();
        assert_eq!(out.frames(), seq.frames());
        assert!(interpolate_sequence(&seq, 0).is_err());
    }

    #[test]
    fn interpolation_thirds() {
        let seq = FrameSequence::new(vec![constant(0.0), constant(0.9)], 60.0).unwrap();
        let out = interpolate_sequence(&seq, 3).unwrap();
        assert_eq!(out.len(), 4);
        for (f, want) in out.frames().iter().zip([0.0, 0.3, 0.6, 0.9]) {
            assert!(f.data().iter().all(|&v| (v as f64 - want).abs() < 1e-6));
        }
        assert_eq!(out.frame_rate(), 180.0);
    }

    #[test]
    fn blur_closed_forms() {
        let b = synthesize_blur(&[constant(0.0), constant(1.0)], CameraResponse::Identity).unwrap();
        assert!(b.data().iter().all(|&v| v == 0.5));

        let g2 = CameraResponse::gamma(2.0).unwrap();
        let b = synthesize_blur(&[constant(0.25), constant(1.0)], g2).unwrap();
        let want = 0.53125f64.sqrt();
        assert!(b.data().iter().all(|&v| (v as f64 - want).abs() < 1e-7));

        let same = synthesize_blur(&vec![constant(0.4); 5], CameraResponse::default()).unwrap();
        assert!(same.data().iter().all(|&v| (v - 0.4).abs() < 1e-6));
    }

    #[test]
    fn blur_errors() {
        assert!(matches!(synthesize_blur(&[], CameraResponse::Identity), Err(Error::Empty(_))));
        let other = Frame::filled(2, 2, 1, 0.0).unwrap();
        assert!(synthesize_blur(&[constant(0.0), other], CameraResponse::Identity).is_err());
    }

    #[test]
    fn make_pairs_constant_window() {
        let seq = FrameSequence::new(vec![constant(0.6); 160], 1920.0).unwrap();
        let pairs = make_pairs(&seq, &BlurConfig::default()).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].sharp, constant(0.6));
        assert!(pairs[0].blurry.data().iter().all(|&v| (v - 0.6).abs() < 1e-6));
    }

    #[test]
    fn make_pairs_too_short() {
        let seq = FrameSequence::new(vec![constant(0.6); 10], 1920.0).unwrap();
        let err = make_pairs(&seq, &BlurConfig::default()).unwrap_err();
        assert!(matches!(err, Error::SequenceTooShort { len: 10, window: 160 }));
    }

    #[test]
    fn middle_frame_is_sharp() {
        let frames: Vec<Frame> = (0..8).map(|i| constant(i as f32 / 10.0)).collect();
        let seq = FrameSequence::new(frames, 30.0).unwrap();
        let cfg = BlurConfig {
            window_len: 4,
            interp_factor: 1,
            crf: CameraResponse::Identity,
        };
        let pairs = make_pairs(&seq, &cfg).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].sharp, constant(0.2));
        assert_eq!(pairs[1].sharp, constant(0.6));
    }

    #[test]
    fn streaming_matches_materialized() {
        let frames: Vec<Frame> = (0..7)
            .map(|i| Frame::from_fn(4, 3, 3, |x, y, c| ((x + 2 * y + c + i) % 5) as f32 / 4.0).unwrap())
            .collect();
        let seq = FrameSequence::new(frames, 60.0).unwrap();
        let cfg = BlurConfig {
            window_len: 5,
            interp_factor: 4,
            crf: CameraResponse::default(),
        };
        let a = make_pairs_from_source(&seq, &cfg).unwrap();
        let b = make_pairs(&interpolate_sequence(&seq, 4).unwrap(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), pair_count(seq.len(), &cfg));
    }
}
