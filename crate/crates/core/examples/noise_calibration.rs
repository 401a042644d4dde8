// Adds signal-dependent noise to a gray ramp and recovers the variance line.
//
// Run with `cargo run --example noise_calibration`.

use lbn::blur::CameraResponse;
use lbn::noise::{add_signal_dependent_noise, estimate_noise_variance, fit_variance_line, NoiseDomain, NoiseParams};
use lbn::Frame;

pub fn run_example() -> lbn::Result<()> {
    let crf = CameraResponse::default();
    let clean = Frame::from_fn(256, 128, 1, |x, _, _| 0.2 + 0.6 * x as f32 / 255.0)?;
    let params = NoiseParams {
        shot: 0.004,
        read: 2e-4,
        seed: 11,
        domain: NoiseDomain::Linear,
    };
    let noisy = add_signal_dependent_noise(&clean, &params, crf)?;

    let bins = estimate_noise_variance(&clean, &noisy, 8, crf)?;
    println!("intensity  measured   model");
    for b in &bins {
        println!("{:9.4}  {:.3e}  {:.3e}", b.intensity, b.variance, params.variance_at(b.intensity));
    }
    let (a, b) = fit_variance_line(&bins)?;
    println!("fitted shot {a:.5} (true {}), read {b:.2e} (true {:.0e})", params.shot, params.read);
    assert!((a - params.shot).abs() / params.shot < 0.1);

    let silent = NoiseParams { shot: 0.0, read: 0.0, ..params };
    assert_eq!(add_signal_dependent_noise(&clean, &silent, crf)?, clean);
    Ok(())
}

fn main() -> lbn::Result<()> {
    run_example()
}
