use std::fs::File;
use std::io::BufWriter;

use lbn::frame::{center_crop, list_pngs, load_frame, load_sequence, resize_bilinear, save_frame, BitDepth};
use lbn::{Error, Frame};
use proptest::prelude::*;

fn write_raw_png(path: &std::path::Path, w: u32, h: u32, color: png::ColorType, depth: png::BitDepth, data: &[u8]) {
    let mut enc = png::Encoder::new(BufWriter::new(File::create(path).unwrap()), w, h);
    enc.set_color(color);
    enc.set_depth(depth);
    enc.write_header().unwrap().write_image_data(data).unwrap();
}

#[test]
fn sixteen_bit_midpoint_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mid.png");
    // 32768 big-endian
    write_raw_png(&path, 1, 1, png::ColorType::Grayscale, png::BitDepth::Sixteen, &[0x80, 0x00]);
    let f = load_frame(&path).unwrap();
    assert_eq!(f.data()[0], (32768.0f64 / 65535.0) as f32);
    save_frame(&f, &path, BitDepth::Sixteen).unwrap();
    assert_eq!(load_frame(&path).unwrap(), f);
}

#[test]
fn eight_bit_rgb_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rgb.png");
    let bytes: Vec<u8> = (0..4 * 3 * 3).map(|i| (i * 7 % 256) as u8).collect();
    write_raw_png(&path, 4, 3, png::ColorType::Rgb, png::BitDepth::Eight, &bytes);
    let f = load_frame(&path).unwrap();
    assert_eq!((f.width(), f.height(), f.channels()), (4, 3, 3));
    assert_eq!(f.get(1, 0, 0), bytes[3] as f32 / 255.0);
    let out = dir.path().join("again.png");
    save_frame(&f, &out, BitDepth::Eight).unwrap();
    assert_eq!(load_frame(&out).unwrap(), f);
}

#[test]
fn unsupported_layouts_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let rgba = dir.path().join("rgba.png");
    write_raw_png(&rgba, 1, 1, png::ColorType::Rgba, png::BitDepth::Eight, &[1, 2, 3, 4]);
    assert!(matches!(load_frame(&rgba), Err(Error::UnsupportedChannels { .. })));

    let low = dir.path().join("low.png");
    write_raw_png(&low, 8, 1, png::ColorType::Grayscale, png::BitDepth::Four, &[0x12, 0x34, 0x56, 0x78]);
    assert!(matches!(load_frame(&low), Err(Error::UnsupportedBitDepth { depth: 4, .. })));

    assert!(matches!(load_frame(dir.path().join("absent.png")), Err(Error::MissingFile(_))));
}

#[test]
fn sequences_load_in_name_order() {
    let dir = tempfile::tempdir().unwrap();
    for (name, v) in [("0002.png", 0.5), ("0000.png", 0.0), ("0001.png", 1.0)] {
        save_frame(&Frame::filled(2, 2, 1, v).unwrap(), dir.path().join(name), BitDepth::Eight).unwrap();
    }
    std::fs::write(dir.path().join("notes.txt"), "skip me").unwrap();
    assert_eq!(list_pngs(dir.path()).unwrap().len(), 3);
    let seq = load_sequence(dir.path(), 60.0).unwrap();
    let firsts: Vec<f32> = seq.frames().iter().map(|f| f.data()[0]).collect();
    assert_eq!(firsts, vec![0.0, 1.0, 128.0 / 255.0]);
}

#[test]
fn mismatched_sequence_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    save_frame(&Frame::filled(2, 2, 1, 0.1).unwrap(), dir.path().join("0000.png"), BitDepth::Eight).unwrap();
    save_frame(&Frame::filled(3, 2, 1, 0.1).unwrap(), dir.path().join("0001.png"), BitDepth::Eight).unwrap();
    assert!(load_sequence(dir.path(), 60.0).is_err());
}

fn frame_strategy() -> impl Strategy<Value = Frame> {
    (1usize..9, 1usize..9, prop_oneof![Just(1usize), Just(3usize)]).prop_flat_map(|(w, h, c)| {
        prop::collection::vec(0.0f32..=1.0, w * h * c).prop_map(move |d| Frame::new(w, h, c, d).unwrap())
    })
}

proptest! {
    #[test]
    fn resize_stays_within_input_range(f in frame_strategy(), ow in 1usize..12, oh in 1usize..12) {
        let out = resize_bilinear(&f, ow, oh).unwrap();
        let (lo, hi) = f.min_max();
        prop_assert_eq!((out.width(), out.height(), out.channels()), (ow, oh, f.channels()));
        for &v in out.data() {
            prop_assert!(v >= lo - 1e-6 && v <= hi + 1e-6);
        }
    }

    #[test]
    fn resize_to_same_size_is_identity(f in frame_strategy()) {
        let out = resize_bilinear(&f, f.width(), f.height()).unwrap();
        for (a, b) in out.data().iter().zip(f.data()) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn crop_is_idempotent(f in frame_strategy(), cw in 1usize..9, chh in 1usize..9) {
        let (cw, ch) = (cw.min(f.width()), chh.min(f.height()));
        let once = center_crop(&f, cw, ch).unwrap();
        prop_assert_eq!(center_crop(&once, cw, ch).unwrap(), once.clone());
        prop_assert_eq!(center_crop(&f, f.width(), f.height()).unwrap(), f);
    }

    #[test]
    fn save_load_quantizes_to_half_a_step(f in frame_strategy(), sixteen in any::<bool>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.png");
        let depth = if sixteen { BitDepth::Sixteen } else { BitDepth::Eight };
        save_frame(&f, &path, depth).unwrap();
        let back = load_frame(&path).unwrap();
        let tol = 0.5 / depth.max_value() + 1e-6;
        for (a, b) in back.data().iter().zip(f.data()) {
            prop_assert!(((a - b).abs() as f64) <= tol);
        }
        // a second trip is lossless
        save_frame(&back, &path, depth).unwrap();
        prop_assert_eq!(load_frame(&path).unwrap(), back);
    }
}
