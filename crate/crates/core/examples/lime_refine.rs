// Illumination estimation on a synthetic dim scene.
//
// Run with `cargo run --example lime_refine`.

use lbn::retinex::{decompose, init_illumination, refine_illumination_alm, LimeParams, WeightStrategy};
use lbn::Frame;

pub fn run_example() -> lbn::Result<()> {
    // left half lit, right half in shadow, with a checker texture on top
    let frame = Frame::from_fn(24, 24, 3, |x, y, c| {
        let light = if x < 12 { 0.8 } else { 0.25 };
        let texture = if (x / 3 + y / 3) % 2 == 0 { 1.0 } else { 0.7 };
        (light * texture * (1.0 - 0.1 * c as f64)) as f32
    })?;
    let t_hat = init_illumination(&frame);

    for strategy in [WeightStrategy::Uniform, WeightStrategy::GradientInverse] {
        let params = LimeParams {
            weight_strategy: strategy,
            ..LimeParams::default()
        };
        let (t, trace) = refine_illumination_alm(&t_hat, &params)?;
        println!(
            "{strategy:?}: {} iterations, converged {}, objective {:.6} -> {:.6}",
            trace.entries.len(),
            trace.converged,
            trace.initial_objective,
            trace.final_objective()
        );
        let monotone = trace.entries.windows(2).all(|w| w[1].objective <= w[0].objective);
        assert!(monotone);

        let decomp = decompose(&frame, &t)?;
        let back = decomp.recompose();
        let err = back
            .data()
            .iter()
            .zip(frame.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        println!("  recomposition error {err:.2e}");
        assert!(err < 1e-5);
    }
    Ok(())
}

fn main() -> lbn::Result<()> {
    run_example()
}
