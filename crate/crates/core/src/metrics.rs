//! Full-reference quality metrics: MSE, PSNR and SSIM.

use crate::frame::Frame;
use crate::{Error, Result};

/// Side length of the SSIM window.
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

pub fn mse(a: &Frame, b: &Frame) -> Result<f64> {
    a.check_same_shape(b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// `10 log10(peak² / MSE)`; identical frames give `f64::INFINITY`.
pub fn psnr(a: &Frame, b: &Frame, peak: f64) -> Result<f64> {
    let e = mse(a, b)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / e).log10())
}

/// Normalized 1-D Gaussian taps.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let taps: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable "valid" filtering of one plane.
fn filter_valid(plane: &[f64], width: usize, height: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (ow, oh) = (width - n + 1, height - n + 1);
    let mut rows = vec![0.0; ow * height];
    for y in 0..height {
        let src = &plane[y * width..(y + 1) * width];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&src[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k.iter().enumerate().map(|(j, w)| w * rows[(y + j) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

fn ssim_plane(a: &[f64], b: &[f64], width: usize, height: usize, kernel: &[f64]) -> f64 {
    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let (mu_a, _, _) = filter_valid(a, width, height, kernel);
    let (mu_b, _, _) = filter_valid(b, width, height, kernel);
    let (e_aa, _, _) = filter_valid(&prod(a, a), width, height, kernel);
    let (e_bb, _, _) = filter_valid(&prod(b, b), width, height, kernel);
    let (e_ab, _, _) = filter_valid(&prod(a, b), width, height, kernel);
    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
    total / n as f64
}

/// Mean SSIM over all valid 11×11 Gaussian windows (σ = 1.5, peak 1),
/// averaged across channels.
pub fn ssim(a: &Frame, b: &Frame) -> Result<f64> {
    a.check_same_shape(b)?;
    if a.width() < SSIM_WINDOW || a.height() < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {}x{}",
            a.width(),
            a.height()
        )));
    }
    let kernel = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA);
    let ch = a.channels();
    let plane = |f: &Frame, c: usize| f.data().iter().skip(c).step_by(ch).map(|&v| v as f64).collect::<Vec<_>>();
    let sum: f64 = (0..ch)
        .map(|c| ssim_plane(&plane(a, c), &plane(b, c), a.width(), a.height(), &kernel))
        .sum();
    Ok(sum / ch as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_cases() {
        let a = Frame::filled(8, 8, 3, 0.5).unwrap();
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        let b = Frame::filled(8, 8, 3, 0.0).unwrap();
        let c = Frame::filled(8, 8, 3, 0.1).unwrap();
        let want = 10.0 * (1.0 / (0.1f32 as f64).powi(2)).log10();
        assert!((psnr(&b, &c, 1.0).unwrap() - want).abs() < 1e-9);
        assert!((psnr(&b, &c, 1.0).unwrap() - 20.0).abs() < 1e-5);
    }

    #[test]
    fn ssim_identical_is_one() {
        let a = Frame::from_fn(16, 13, 3, |x, y, c| ((x * 5 + y * 3 + c) % 7) as f32 / 7.0).unwrap();
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ssim_small_frame_rejected() {
        let a = Frame::filled(10, 20, 1, 0.5).unwrap();
        assert!(ssim(&a, &a).is_err());
    }

    #[test]
    fn kernel_normalized() {
        let k = gaussian_kernel(11, 1.5);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((k[0] - k[10]).abs() < 1e-18);
    }
}
