// PSNR, SSIM and Charbonnier distance as noise grows.
//
// Run with `cargo run --example quality_metrics`.

use lbn::blur::CameraResponse;
use lbn::losses::{charbonnier, CHARBONNIER_EPS};
use lbn::metrics::{psnr, ssim};
use lbn::noise::{add_signal_dependent_noise, NoiseParams};
use lbn::Frame;

pub fn run_example() -> lbn::Result<()> {
    let clean = Frame::from_fn(48, 48, 3, |x, y, c| {
        (0.5 + 0.3 * ((x as f32 * 0.3).sin() * (y as f32 * 0.2).cos()) + 0.05 * c as f32).clamp(0.0, 1.0)
    })?;
    println!("identical: psnr {}, ssim {:.6}", psnr(&clean, &clean, 1.0)?, ssim(&clean, &clean)?);

    println!("shot      psnr     ssim   charbonnier");
    let mut last = f64::INFINITY;
    for shot in [1e-4, 1e-3, 1e-2, 5e-2] {
        let params = NoiseParams { shot, read: 0.0, seed: 3, ..NoiseParams::default() };
        let noisy = add_signal_dependent_noise(&clean, &params, CameraResponse::default())?;
        let p = psnr(&clean, &noisy, 1.0)?;
        println!(
            "{shot:<8} {p:7.3}  {:.4}  {:.5}",
            ssim(&clean, &noisy)?,
            charbonnier(&clean, &noisy, CHARBONNIER_EPS)?
        );
        assert!(p < last);
        last = p;
    }
    Ok(())
}

fn main() -> lbn::Result<()> {
    run_example()
}
