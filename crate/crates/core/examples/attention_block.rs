// Windowed mutual attention over frame pairs, stacked and fused across tiers.
//
// Run with `cargo run --example attention_block`.

use lbn::attention::checks::run_invariant_suite;
use lbn::attention::{
    attention_block, feature_fusion, window_partition, window_reverse, AttentionParams, BlockStack, FeatureTensor,
    FusionParams, DEFAULT_WINDOW,
};

pub fn run_example() -> lbn::Result<()> {
    // four frames of 10x7 features with 8 channels; the sizes are not window multiples
    let z = FeatureTensor::random(4, 10, 7, 8, 5);

    let windows = window_partition(&z, DEFAULT_WINDOW)?;
    println!(
        "{:?} padded to {:?}: {} windows of {} tokens",
        z.shape(),
        windows.layout.padded,
        windows.windows.len(),
        DEFAULT_WINDOW.volume()
    );
    assert_eq!(window_reverse(&windows)?, z);

    let block = AttentionParams::seeded(8, 2, DEFAULT_WINDOW, true, 1)?;
    let y = attention_block(&z, &block)?;
    assert_eq!(y.shape(), z.shape());

    // two mutual blocks then two self-attention blocks, odd blocks shifted
    let stack = BlockStack::seeded(8, 2, DEFAULT_WINDOW, 2, 2, 9)?;
    let tier1 = stack.forward(&z)?;
    let tier2 = stack.forward(&tier1)?;
    let fused = feature_fusion(&tier1, &tier2, &FusionParams::seeded(8, 3))?;
    println!("stack output {:?}, fused {:?}", tier2.shape(), fused.shape());
    assert!(fused.array().iter().all(|v| v.is_finite()));

    for report in run_invariant_suite(21, 20)? {
        println!("{:<40} {}", report.name, if report.passed { "ok" } else { "FAILED" });
        assert!(report.passed);
    }
    Ok(())
}

fn main() -> lbn::Result<()> {
    run_example()
}
