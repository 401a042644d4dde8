// Darkening a normal-light frame by raising its illumination and reflectance
// to powers, and undoing it.
//
// Run with `cargo run --example lowlight_degrade`.

use lbn::retinex::{
    decompose, degrade, degrade_unclamped, init_illumination, invert_gamma, refine_illumination_alm, GammaParams,
    LimeParams,
};
use lbn::Frame;

fn mean(f: &Frame) -> f64 {
    f.data().iter().map(|&v| v as f64).sum::<f64>() / f.data().len() as f64
}

pub fn run_example() -> lbn::Result<()> {
    let frame = Frame::from_fn(16, 16, 3, |x, y, c| 0.2 + 0.6 * ((x + y + c) % 16) as f32 / 16.0)?;
    let (t, _) = refine_illumination_alm(&init_illumination(&frame), &LimeParams::default())?;
    let decomp = decompose(&frame, &t)?;

    for (gamma1, gamma2) in [(2.0, 1.05), (2.75, 1.1), (3.5, 1.2)] {
        let g = GammaParams { gamma1, gamma2 };
        let dark = degrade(&decomp, &g)?;
        println!("gamma1 {gamma1:.2}, gamma2 {gamma2:.2}: mean {:.3} -> {:.3}", mean(&frame), mean(&dark));
        assert!(mean(&dark) < mean(&frame));

        let restored = invert_gamma(&degrade_unclamped(&decomp, &g)?, &decomp, &g)?;
        let err = restored
            .data()
            .iter()
            .zip(frame.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        println!("  inverse round trip error {err:.2e}");
        assert!(err < 1e-4);
    }
    Ok(())
}

fn main() -> lbn::Result<()> {
    run_example()
}
