//! Float image containers, resampling and lossless PNG I/O.
//!
//! Samples are stored as `f32` in row-major, channel-interleaved order with a
//! nominal range of `[0, 1]`. Arithmetic elsewhere in the crate promotes to
//! `f64`; quantization only happens when a frame is written to disk.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "frames carry 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height}x{channels} frame needs {} samples, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite sample at index {i}")));
        }
        Ok(Self { width, height, channels, data })
    }

    /// A frame with every sample set to `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds a frame from `f(x, y, c)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn check_same_shape(&self, other: &Frame) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    /// Applies `f` to every sample, keeping the shape.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Same shape as `self`, new samples. Caller guarantees the length.
    pub(crate) fn with_data(&self, data: Vec<f32>) -> Frame {
        debug_assert_eq!(data.len(), self.data.len());
        Frame {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data,
        }
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn clamped(&self) -> Frame {
        self.map(|v| v.clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    frame_rate: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, frame_rate: f64) -> Result<Self> {
        if !(frame_rate > 0.0 && frame_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("frame rate must be positive, got {frame_rate}")));
        }
        if let Some(first) = frames.first() {
            for (i, f) in frames.iter().enumerate().skip(1) {
                if !f.same_shape(first) {
                    return Err(Error::DimensionMismatch(format!(
                        "frame {i} is {}x{}x{}, frame 0 is {}x{}x{}",
                        f.width, f.height, f.channels, first.width, first.height, first.channels
                    )));
                }
            }
        }
        Ok(Self { frames, frame_rate })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Supported on-disk sample depths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BitDepth {
    #[serde(rename = "8")]
    Eight,
    #[serde(rename = "16")]
    Sixteen,
}

impl BitDepth {
    pub fn from_bits(bits: u8) -> Result<Self> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            other => Err(Error::InvalidArgument(format!("bit depth must be 8 or 16, got {other}"))),
        }
    }

    pub fn max_value(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

/// Reads an 8- or 16-bit grayscale or RGB PNG into a normalized frame.
pub fn load_frame(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut decoder = png::Decoder::new(BufReader::new(File::open(path)?));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info()?;

    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    let channels = match color {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => {
            return Err(Error::UnsupportedChannels {
                path: path.to_path_buf(),
                layout: format!("{other:?}"),
            })
        }
    };
    let bit_depth = match depth {
        png::BitDepth::Eight => BitDepth::Eight,
        png::BitDepth::Sixteen => BitDepth::Sixteen,
        other => {
            return Err(Error::UnsupportedBitDepth {
                path: path.to_path_buf(),
                depth: other as u8,
            })
        }
    };

    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is too large to decode", path.display())))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf)?;
    let (width, height) = (info.width as usize, info.height as usize);
    let samples = width * height * channels;
    let scale = bit_depth.max_value();

    let data: Vec<f32> = match bit_depth {
        BitDepth::Eight => buf[..samples].iter().map(|&b| (b as f64 / scale) as f32).collect(),
        BitDepth::Sixteen => buf[..samples * 2]
            .chunks_exact(2)
            .map(|b| (u16::from_be_bytes([b[0], b[1]]) as f64 / scale) as f32)
            .collect(),
    };
    Frame::new(width, height, channels, data)
}

/// Writes `frame` as PNG, clamping to `[0, 1]` and rounding to the nearest code.
pub fn save_frame(frame: &Frame, path: impl AsRef<Path>, bit_depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path)?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), frame.width as u32, frame.height as u32);
    encoder.set_color(if frame.channels == 1 {
        png::ColorType::Grayscale
    } else {
        png::ColorType::Rgb
    });
    let scale = bit_depth.max_value();
    let quantize = |v: f32| (v.clamp(0.0, 1.0) as f64 * scale).round();
    let bytes: Vec<u8> = match bit_depth {
        BitDepth::Eight => {
            encoder.set_depth(png::BitDepth::Eight);
            frame.data.iter().map(|&v| quantize(v) as u8).collect()
        }
        BitDepth::Sixteen => {
            encoder.set_depth(png::BitDepth::Sixteen);
            frame
                .data
                .iter()
                .flat_map(|&v| (quantize(v) as u16).to_be_bytes())
                .collect()
        }
    };
    let mut writer = encoder.write_header()?;
    writer.write_image_data(&bytes)?;
    writer.finish()?;
    Ok(())
}

/// Lists the `.png` files directly inside `dir`, sorted by file name.
pub fn list_pngs(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if path.is_file() && is_png {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Loads a directory of numbered PNG frames as a sequence.
pub fn load_sequence(dir: impl AsRef<Path>, frame_rate: f64) -> Result<FrameSequence> {
    let frames = list_pngs(dir)?
        .iter()
        .map(load_frame)
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames, frame_rate)
}

/// Bilinear resampling with half-pixel centers and edge replication.
///
/// Output pixel `(x, y)` samples the source at
/// `((x + 0.5) * w_in / w_out - 0.5, (y + 0.5) * h_in / h_out - 0.5)`, with the
/// coordinate clamped to `[0, dim - 1]`. Every output sample is a convex
/// combination of source samples.
pub fn resize_bilinear(frame: &Frame, out_w: usize, out_h: usize) -> Result<Frame> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidArgument(format!(
            "resize target must be positive, got {out_w}x{out_h}"
        )));
    }
    if out_w == frame.width && out_h == frame.height {
        return Ok(frame.clone());
    }
    let xs = axis_taps(frame.width, out_w);
    let ys = axis_taps(frame.height, out_h);
    let ch = frame.channels;
    let mut data = Vec::with_capacity(out_w * out_h * ch);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..ch {
                let top = lerp(frame.get(x0, y0, c) as f64, frame.get(x1, y0, c) as f64, fx);
                let bottom = lerp(frame.get(x0, y1, c) as f64, frame.get(x1, y1, c) as f64, fx);
                data.push(lerp(top, bottom, fy) as f32);
            }
        }
    }
    Frame::new(out_w, out_h, ch, data)
}

fn axis_taps(len_in: usize, len_out: usize) -> Vec<(usize, usize, f64)> {
    let scale = len_in as f64 / len_out as f64;
    let last = (len_in - 1) as f64;
    (0..len_out)
        .map(|i| {
            let src = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let i0 = src.floor() as usize;
            let i1 = (i0 + 1).min(len_in - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Centered crop; odd leftovers are dropped from the bottom/right edge.
pub fn center_crop(frame: &Frame, out_w: usize, out_h: usize) -> Result<Frame> {
    if out_w == 0 || out_h == 0 || out_w > frame.width || out_h > frame.height {
        return Err(Error::InvalidArgument(format!(
            "cannot crop {out_w}x{out_h} from {}x{}",
            frame.width, frame.height
        )));
    }
    let x0 = (frame.width - out_w) / 2;
    let y0 = (frame.height - out_h) / 2;
    let ch = frame.channels;
    let mut data = Vec::with_capacity(out_w * out_h * ch);
    for y in y0..y0 + out_h {
        let start = (y * frame.width + x0) * ch;
        data.extend_from_slice(&frame.data[start..start + out_w * ch]);
    }
    Frame::new(out_w, out_h, ch, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> Frame {
        Frame::from_fn(w, h, 1, |x, y, _| (y * w + x) as f32).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Frame::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(Frame::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Frame::new(0, 2, 1, vec![]).is_err());
        assert!(Frame::new(1, 1, 1, vec![f32::NAN]).is_err());
    }

    #[test]
    fn sequence_requires_matching_frames() {
        let a = Frame::filled(2, 2, 1, 0.0).unwrap();
        let b = Frame::filled(3, 2, 1, 0.0).unwrap();
        assert!(FrameSequence::new(vec![a.clone(), b], 30.0).is_err());
        assert!(FrameSequence::new(vec![a.clone()], 0.0).is_err());
        assert_eq!(FrameSequence::new(vec![a.clone(), a], 60.0).unwrap().len(), 2);
    }

    #[test]
    fn resize_constant_stays_constant() {
        let f = Frame::filled(7, 5, 3, 0.3).unwrap();
        let r = resize_bilinear(&f, 3, 11).unwrap();
        assert_eq!((r.width(), r.height()), (3, 11));
        assert!(r.data().iter().all(|&v| (v - 0.3).abs() < 1e-7));
    }

    #[test]
    fn resize_two_pixels_to_one_is_midpoint() {
        let f = Frame::new(2, 1, 1, vec![0.0, 1.0]).unwrap();
        let r = resize_bilinear(&f, 1, 1).unwrap();
        assert_eq!(r.data(), &[0.5]);
    }

    #[test]
    fn resize_identity() {
        let f = ramp(4, 4);
        assert_eq!(resize_bilinear(&f, 4, 4).unwrap(), f);
    }

    #[test]
    fn resize_rejects_zero() {
        assert!(resize_bilinear(&ramp(4, 4), 0, 3).is_err());
    }

    #[test]
    fn crop_offsets() {
        let f = ramp(4, 4);
        let c = center_crop(&f, 2, 2).unwrap();
        assert_eq!(c.data(), &[5.0, 6.0, 9.0, 10.0]);

        let f5 = ramp(5, 5);
        let c5 = center_crop(&f5, 2, 2).unwrap();
        // floor((5 - 2) / 2) = 1 on both axes
        assert_eq!(c5.data(), &[6.0, 7.0, 11.0, 12.0]);

        assert_eq!(center_crop(&f, 4, 4).unwrap(), f);
        assert!(center_crop(&f, 5, 2).is_err());
    }

    #[test]
    fn load_missing_file() {
        let err = load_frame("/definitely/not/here.png").unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)));
    }
}
