//! Space-time window partitioning.

use ndarray::{s, Array2, Array4};

use super::FeatureTensor;
use crate::{Error, Result};

/// Window extent along (time, height, width).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSize {
    pub t: usize,
    pub h: usize,
    pub w: usize,
}

impl WindowSize {
    pub const fn new(t: usize, h: usize, w: usize) -> Self {
        Self { t, h, w }
    }

    pub fn volume(&self) -> usize {
        self.t * self.h * self.w
    }

    /// Tokens per frame inside a window.
    pub fn frame_tokens(&self) -> usize {
        self.h * self.w
    }

    fn validate(&self) -> Result<()> {
        if self.t == 0 || self.h == 0 || self.w == 0 {
            return Err(Error::InvalidArgument(format!(
                "window dimensions must be positive, got {}x{}x{}",
                self.t, self.h, self.w
            )));
        }
        Ok(())
    }
}

/// Shape bookkeeping needed to undo a partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowLayout {
    /// Unpadded (t, h, w).
    pub original: (usize, usize, usize),
    /// Padded (t, h, w), multiples of the window.
    pub padded: (usize, usize, usize),
    pub window: WindowSize,
    pub channels: usize,
}

impl WindowLayout {
    /// Windows along (t, h, w).
    pub fn grid(&self) -> (usize, usize, usize) {
        (
            self.padded.0 / self.window.t,
            self.padded.1 / self.window.h,
            self.padded.2 / self.window.w,
        )
    }

    pub fn window_count(&self) -> usize {
        let (a, b, c) = self.grid();
        a * b * c
    }
}

/// Tokens of one window, ordered (t, h, w) row-major, one row per token.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Grid coordinate of this window.
    pub origin: (usize, usize, usize),
    pub tokens: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub windows: Vec<Window>,
    pub layout: WindowLayout,
}

/// Index into `[0, n)` reflecting about the edges without repeating them.
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Pads to window multiples: reflect in space, repeat the last frame in time.
pub fn pad_to_window(x: &FeatureTensor, window: WindowSize) -> Result<FeatureTensor> {
    window.validate()?;
    let (t, h, w, c) = x.shape();
    let pt = t.div_ceil(window.t) * window.t;
    let ph = h.div_ceil(window.h) * window.h;
    let pw = w.div_ceil(window.w) * window.w;
    if (pt, ph, pw) == (t, h, w) {
        return Ok(x.clone());
    }
    let src = x.array();
    let data = Array4::from_shape_fn((pt, ph, pw, c), |(ti, hi, wi, ci)| {
        src[[ti.min(t - 1), reflect_index(hi as isize, h), reflect_index(wi as isize, w), ci]]
    });
    Ok(FeatureTensor::from_array(data))
}

/// Pads `x` and cuts it into disjoint windows.
pub fn window_partition(x: &FeatureTensor, window: WindowSize) -> Result<WindowSet> {
    let original = (x.t(), x.h(), x.w());
    let padded = pad_to_window(x, window)?;
    let layout = WindowLayout {
        original,
        padded: (padded.t(), padded.h(), padded.w()),
        window,
        channels: x.c(),
    };
    let (nt, nh, nw) = layout.grid();
    let arr = padded.array();
    let mut windows = Vec::with_capacity(layout.window_count());
    for gt in 0..nt {
        for gh in 0..nh {
            for gw in 0..nw {
                let block = arr.slice(s![
                    gt * window.t..(gt + 1) * window.t,
                    gh * window.h..(gh + 1) * window.h,
                    gw * window.w..(gw + 1) * window.w,
                    ..
                ]);
                let tokens = block
                    .to_owned()
                    .into_shape_with_order((window.volume(), layout.channels))
                    .expect("contiguous window block");
                windows.push(Window {
                    origin: (gt, gh, gw),
                    tokens,
                });
            }
        }
    }
    Ok(WindowSet { windows, layout })
}

/// Reassembles windows into a tensor and strips the padding.
///
/// The channel count is taken from the windows, so windows whose tokens were
/// transformed to a different width reassemble too. Fails when windows are
/// missing, duplicated, out of order or of the wrong size.
pub fn window_reverse(ws: &WindowSet) -> Result<FeatureTensor> {
    let layout = &ws.layout;
    layout.window.validate()?;
    let (pt, ph, pw) = layout.padded;
    let win = layout.window;
    if pt % win.t != 0 || ph % win.h != 0 || pw % win.w != 0 {
        return Err(Error::CorruptLayout(format!(
            "padded shape {pt}x{ph}x{pw} is not a multiple of window {}x{}x{}",
            win.t, win.h, win.w
        )));
    }
    let (ot, oh, ow) = layout.original;
    if ot > pt || oh > ph || ow > pw || ot == 0 || oh == 0 || ow == 0 {
        return Err(Error::CorruptLayout("original shape exceeds padded shape".into()));
    }
    if ws.windows.len() != layout.window_count() {
        return Err(Error::CorruptLayout(format!(
            "expected {} windows, found {}",
            layout.window_count(),
            ws.windows.len()
        )));
    }
    let channels = ws.windows.first().map_or(layout.channels, |w| w.tokens.ncols());
    let (_, nh, nw) = layout.grid();
    let mut out = Array4::<f64>::zeros((pt, ph, pw, channels));
    for (k, window) in ws.windows.iter().enumerate() {
        let expected = (k / (nh * nw), (k / nw) % nh, k % nw);
        if window.origin != expected {
            return Err(Error::CorruptLayout(format!(
                "window {k} carries origin {:?}, expected {:?}",
                window.origin, expected
            )));
        }
        if window.tokens.dim() != (win.volume(), channels) {
            return Err(Error::CorruptLayout(format!(
                "window {k} has token block {:?}, expected {:?}",
                window.tokens.dim(),
                (win.volume(), channels)
            )));
        }
        let block = window
            .tokens
            .view()
            .into_shape_with_order((win.t, win.h, win.w, channels))
            .expect("checked token count");
        let (gt, gh, gw) = expected;
        out.slice_mut(s![
            gt * win.t..(gt + 1) * win.t,
            gh * win.h..(gh + 1) * win.h,
            gw * win.w..(gw + 1) * win.w,
            ..
        ])
        .assign(&block);
    }
    Ok(FeatureTensor::from_array(
        out.slice(s![..ot, ..oh, ..ow, ..]).to_owned(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(t: usize, h: usize, w: usize, c: usize) -> FeatureTensor {
        FeatureTensor::from_fn(t, h, w, c, |(ti, hi, wi, ci)| (ti * 1000 + hi * 100 + wi * 10 + ci) as f64)
    }

    #[test]
    fn reflect_bounces() {
        let got: Vec<usize> = (-3..8).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1]);
        assert_eq!(reflect_index(5, 1), 0);
    }

    #[test]
    fn divisible_tensor_needs_no_padding() {
        let ws = window_partition(&tensor(2, 8, 8, 4), WindowSize::new(2, 4, 4)).unwrap();
        assert_eq!(ws.windows.len(), 4);
        assert_eq!(ws.layout.padded, (2, 8, 8));
    }

    #[test]
    fn ragged_tensor_is_padded() {
        let ws = window_partition(&tensor(2, 5, 5, 1), WindowSize::new(2, 4, 4)).unwrap();
        assert_eq!(ws.layout.padded, (2, 8, 8));
        assert_eq!(ws.windows.len(), 4);
    }

    #[test]
    fn round_trip_and_single_window() {
        for (t, h, w) in [(2, 5, 7), (3, 4, 4), (1, 1, 1), (4, 9, 3)] {
            let x = tensor(t, h, w, 3);
            let ws = window_partition(&x, WindowSize::new(2, 4, 4)).unwrap();
            assert_eq!(window_reverse(&ws).unwrap(), x);
        }
        let x = tensor(2, 4, 4, 2);
        let ws = window_partition(&x, WindowSize::new(2, 4, 4)).unwrap();
        assert_eq!(ws.windows.len(), 1);
        assert_eq!(window_reverse(&ws).unwrap(), x);
    }

    #[test]
    fn zero_window_rejected() {
        assert!(window_partition(&tensor(2, 4, 4, 1), WindowSize::new(2, 0, 4)).is_err());
    }

    #[test]
    fn permuted_windows_detected() {
        let mut ws = window_partition(&tensor(2, 8, 8, 1), WindowSize::new(2, 4, 4)).unwrap();
        ws.windows.swap(0, 3);
        assert!(matches!(window_reverse(&ws), Err(Error::CorruptLayout(_))));

        let mut ws = window_partition(&tensor(2, 8, 8, 1), WindowSize::new(2, 4, 4)).unwrap();
        ws.windows.pop();
        assert!(matches!(window_reverse(&ws), Err(Error::CorruptLayout(_))));
    }
}
