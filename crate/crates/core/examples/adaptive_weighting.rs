// Learning per-tier loss weights from fixed tier losses.
//
// Run with `cargo run --example adaptive_weighting`.

use lbn::losses::{adaptive_weighted_loss, optimal_sigma_squared, SigmaState};

pub fn run_example() -> lbn::Result<()> {
    let raw = [0.5, 4.0, 10.0];
    let mut state = SigmaState::default();
    let start = adaptive_weighted_loss(raw, &state)?.total;
    for _ in 0..3000 {
        state.step(raw);
    }
    let end = adaptive_weighted_loss(raw, &state)?;
    println!("total loss {start:.4} -> {:.4}", end.total);

    for (i, (&l, s)) in raw.iter().zip(state.sigmas()).enumerate() {
        let target = optimal_sigma_squared(l);
        println!(
            "tier {}: raw {l:>4}, sigma^2 {:.6}, optimum {target:.6}, weight {:.4}",
            i + 1,
            s * s,
            state.loss_weights()[i]
        );
        assert!((s * s - target).abs() < 1e-3);
    }
    Ok(())
}

fn main() -> lbn::Result<()> {
    run_example()
}
