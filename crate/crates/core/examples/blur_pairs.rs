// Blur/sharp pairs from a short 60 FPS clip of a moving bar.
//
// Run with `cargo run --example blur_pairs`.

use lbn::blur::{interpolate_sequence, make_pairs, make_pairs_from_source, pair_count, BlurConfig, CameraResponse};
use lbn::{Frame, FrameSequence};

fn moving_bar(frames: usize, width: usize, height: usize) -> lbn::Result<FrameSequence> {
    let clip = (0..frames)
        .map(|k| {
            Frame::from_fn(width, height, 3, |x, _, c| {
                let on = (x + width - 2 * k % width) % width < 4;
                if on { 0.9 } else { 0.1 + 0.05 * c as f32 }
            })
        })
        .collect::<lbn::Result<Vec<_>>>()?;
    FrameSequence::new(clip, 60.0)
}

pub fn run_example() -> lbn::Result<()> {
    let clip = moving_bar(11, 32, 8)?;
    let config = BlurConfig {
        window_len: 16,
        interp_factor: 8,
        crf: CameraResponse::default(),
    };

    let pairs = make_pairs_from_source(&clip, &config)?;
    assert_eq!(pairs.len(), pair_count(clip.len(), &config));
    println!("{} source frames -> {} pairs", clip.len(), pairs.len());

    // materializing the high-rate clip gives the same pairs
    let dense = make_pairs(&interpolate_sequence(&clip, config.interp_factor)?, &config)?;
    assert_eq!(dense, pairs);

    for (i, p) in pairs.iter().enumerate() {
        let spread = |f: &Frame| {
            let (lo, hi) = f.min_max();
            hi - lo
        };
        println!(
            "pair {i}: sharp contrast {:.3}, blurry contrast {:.3}",
            spread(&p.sharp),
            spread(&p.blurry)
        );
        assert!(spread(&p.blurry) < spread(&p.sharp));
    }
    Ok(())
}

fn main() -> lbn::Result<()> {
    run_example()
}
