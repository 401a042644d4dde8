//! Synthesis of low-light, blurry and noisy video frames with progressive
//! ground-truth tiers, plus the restoration-side math used to train and
//! evaluate a multi-tier restorer: Charbonnier loss, adaptive task weighting,
//! windowed mutual/self attention and PSNR/SSIM.
//!
//! The crate is organized bottom-up:
//!
//! - [`frame`]: float image containers and PNG I/O
//! - [`blur`]: CRF-linear frame averaging and blurry/sharp pair windows
//! - [`retinex`]: max-channel illumination, ALM refinement, gamma degradation
//! - [`noise`]: heteroscedastic (shot + read) noise with a counter-based RNG
//! - [`losses`], [`metrics`]: training losses and quality metrics
//! - [`attention`]: forward pass of the mutual/self window attention block
//! - [`pipeline`]: scene-level orchestration, tier ladders and manifests
//! - [`cli`]: the `lbn` command line front end

pub mod attention;
pub mod blur;
pub mod cli;
mod error;
pub mod frame;
pub mod losses;
pub mod metrics;
pub mod noise;
pub mod pipeline;
pub mod retinex;

pub use error::{Error, Result};
pub use frame::{Frame, FrameSequence};
