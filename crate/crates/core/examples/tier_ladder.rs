// Degrades a toy scene into tier triplets, writes it out and replays it from
// its manifest.
//
// Run with `cargo run --example tier_ladder`.

use lbn::blur::{BlurConfig, CameraResponse};
use lbn::frame::{load_sequence, save_frame, BitDepth};
use lbn::pipeline::{degrade_scene, read_manifest, replay, write_scene, PipelineConfig, MANIFEST_FILE};
use lbn::retinex::degrade_frame;
use lbn::Frame;

pub fn run_example() -> lbn::Result<()> {
    let dir = tempfile::tempdir()?;
    let source = dir.path().join("clips/street");
    std::fs::create_dir_all(&source)?;
    for k in 0..6 {
        let f = Frame::from_fn(20, 16, 3, |x, y, c| {
            let stripe = ((x + 3 * k) / 4 + y / 4) % 2;
            0.15 + 0.6 * stripe as f32 + 0.05 * c as f32
        })?;
        save_frame(&f, source.join(format!("{k:04}.png")), BitDepth::Sixteen)?;
    }

    let config = PipelineConfig {
        master_seed: 42,
        blur: BlurConfig {
            window_len: 8,
            interp_factor: 4,
            crf: CameraResponse::default(),
        },
        ..PipelineConfig::default()
    };
    let clip = load_sequence(&source, config.frame_rate)?;
    let (triplets, mut manifest) = degrade_scene(&clip, &config, 0)?;
    manifest.source_path = source.clone();
    println!(
        "{} triplets, gamma1 {:.3}, gamma2 {:.3}, noise seed {}",
        triplets.len(),
        manifest.params.gamma.gamma1,
        manifest.params.gamma.gamma2,
        manifest.params.noise.seed
    );

    // the low-light target is exactly the blurry target degraded with the stored illumination
    for t in &triplets {
        let again = degrade_frame(&t.gt_tier2, &t.illumination, &manifest.params.gamma)?;
        assert_eq!(again, t.gt_tier1);
    }

    let scene_dir = dir.path().join("out/street");
    write_scene(&scene_dir, &triplets, &manifest)?;
    let loaded = read_manifest(scene_dir.join(MANIFEST_FILE))?;
    assert_eq!(loaded, manifest);
    assert_eq!(replay(&loaded)?, triplets);
    println!("replay from {} matches", MANIFEST_FILE);
    Ok(())
}

fn main() -> lbn::Result<()> {
    run_example()
}
