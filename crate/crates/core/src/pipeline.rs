//! Scene-level degradation: sharp clip in, three-tier training triplets out.
//!
//! Stages run in a fixed order: resize, crop, frame interpolation, blur
//! synthesis, low-light degradation and noise. Every random choice for a
//! scene is drawn from a stream keyed by `(master_seed, scene_index)`, and
//! noise is keyed by `(scene noise seed, triplet index)`, so results do not
//! depend on scheduling or thread count.
//!
//! Each scene directory written by [`degrade_corpus`] has the layout
//!
//! ```text
//! <output_root>/<scene>/input/0000.png   noisy low-light blurry input
//!                       gt1/0000.png     low-light blurry (denoise target)
//!                       gt2/0000.png     blurry (denoise + enhance target)
//!                       gt3/0000.png     sharp (full restoration target)
//!                       manifest.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blur::{make_pairs_from_source, BlurConfig, CameraResponse};
use crate::frame::{center_crop, load_sequence, resize_bilinear, save_frame, BitDepth, Frame, FrameSequence};
use crate::noise::{add_noise_indexed, NoiseDomain, NoiseParams};
use crate::retinex::{
    degrade_frame, init_illumination, refine_illumination_alm, GammaParams, IlluminationMap, LimeParams,
};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const STAGE_ORDER: [&str; 6] = ["resize", "crop", "interpolate", "blur", "lowlight", "noise"];

pub const MANIFEST_FILE: &str = "manifest.json";

/// Inclusive `[lo, hi]` sampling range; `lo == hi` pins the value.
pub type Range = [f64; 2];

fn check_range(name: &str, r: Range, positive: bool) -> Result<()> {
    let [lo, hi] = r;
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::Config(format!("{name} range [{lo}, {hi}] is not ordered")));
    }
    if (positive && lo <= 0.0) || lo < 0.0 {
        return Err(Error::Config(format!("{name} range [{lo}, {hi}] is out of bounds")));
    }
    Ok(())
}

fn sample(rng: &mut ChaCha8Rng, r: Range) -> f64 {
    let u: f64 = rng.random();
    r[0] + (r[1] - r[0]) * u
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaRanges {
    pub gamma1: Range,
    pub gamma2: Range,
}

impl Default for GammaRanges {
    fn default() -> Self {
        Self {
            gamma1: [2.0, 3.5],
            gamma2: [1.05, 1.2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseRanges {
    pub shot: Range,
    pub read: Range,
    pub domain: NoiseDomain,
}

impl Default for NoiseRanges {
    fn default() -> Self {
        Self {
            shot: [0.01, 0.01],
            read: [1e-4, 1e-4],
            domain: NoiseDomain::Linear,
        }
    }
}

/// Run configuration, read from TOML.
///
/// ```toml
/// input_root = "clips"        # one sub-directory of NNNN.png frames per scene
/// output_root = "out"
/// master_seed = 7
/// threads = 4                 # 0 uses every core
/// frame_rate = 60.0
/// bit_depth = 16              # 8 or 16
/// resize = [1280, 720]        # optional [width, height]
/// crop = [1280, 720]          # optional [width, height], centered
///
/// [blur]
/// window_len = 160
/// interp_factor = 32
/// crf = { kind = "gamma", gamma = 2.2 }   # or { kind = "identity" }
///
/// [lime]
/// alpha = 0.15
/// weight_strategy = "uniform"             # or "gradient-inverse"
/// weight_eps = 1e-3
/// mu0 = 0.05
/// rho = 1.1
/// max_iter = 200
/// tol = 1e-5
///
/// [gamma]
/// gamma1 = [2.0, 3.5]
/// gamma2 = [1.05, 1.2]
///
/// [noise]
/// shot = [0.01, 0.01]
/// read = [1e-4, 1e-4]
/// domain = "linear"                       # or "display"
/// ```
///
/// Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input_root: PathBuf,
    pub output_root: PathBuf,
    pub master_seed: u64,
    pub threads: usize,
    pub frame_rate: f64,
    pub bit_depth: u8,
    pub resize: Option<[usize; 2]>,
    pub crop: Option<[usize; 2]>,
    pub blur: BlurConfig,
    pub lime: LimeParams,
    pub gamma: GammaRanges,
    pub noise: NoiseRanges,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input_root: PathBuf::from("input"),
            output_root: PathBuf::from("output"),
            master_seed: 0,
            threads: 0,
            frame_rate: 60.0,
            bit_depth: 16,
            resize: None,
            crop: None,
            blur: BlurConfig::default(),
            lime: LimeParams::default(),
            gamma: GammaRanges::default(),
            noise: NoiseRanges::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn bit_depth(&self) -> Result<BitDepth> {
        BitDepth::from_bits(self.bit_depth).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        self.bit_depth()?;
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(Error::Config(format!("frame_rate must be positive, got {}", self.frame_rate)));
        }
        for (name, dims) in [("resize", self.resize), ("crop", self.crop)] {
            if let Some([w, h]) = dims {
                if w == 0 || h == 0 {
                    return Err(Error::Config(format!("{name} dimensions must be positive")));
                }
            }
        }
        self.blur.validate().map_err(cfg_err)?;
        self.lime.validate().map_err(cfg_err)?;
        check_range("gamma1", self.gamma.gamma1, true)?;
        check_range("gamma2", self.gamma.gamma2, true)?;
        check_range("shot", self.noise.shot, false)?;
        check_range("read", self.noise.read, false)?;
        Ok(())
    }

    /// Draws the parameters of scene `scene_index`.
    pub fn sample_scene(&self, scene_index: u64) -> SceneParams {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(scene_index);
        let gamma = GammaParams {
            gamma1: sample(&mut rng, self.gamma.gamma1),
            gamma2: sample(&mut rng, self.gamma.gamma2),
        };
        let shot = sample(&mut rng, self.noise.shot);
        let read = sample(&mut rng, self.noise.read);
        let noise = NoiseParams {
            shot,
            read,
            seed: rng.random(),
            domain: self.noise.domain,
        };
        SceneParams {
            resize: self.resize,
            crop: self.crop,
            blur: self.blur,
            lime: self.lime,
            gamma,
            noise,
        }
    }
}

/// Concrete parameters of one scene; enough to regenerate it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneParams {
    pub resize: Option<[usize; 2]>,
    pub crop: Option<[usize; 2]>,
    pub blur: BlurConfig,
    pub lime: LimeParams,
    pub gamma: GammaParams,
    pub noise: NoiseParams,
}

impl SceneParams {
    pub fn crf(&self) -> CameraResponse {
        self.blur.crf
    }
}

/// One training sample: the degraded input and the three tier targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TierTriplet {
    pub input: Frame,
    /// Low-light blurry frame.
    pub gt_tier1: Frame,
    /// Normal-light blurry frame.
    pub gt_tier2: Frame,
    /// Normal-light sharp frame.
    pub gt_tier3: Frame,
    /// Refined illumination of `gt_tier2`.
    pub illumination: IlluminationMap,
    pub solver_converged: bool,
}

/// Resizes and crops every frame as configured.
pub fn preprocess(seq: &FrameSequence, params: &SceneParams) -> Result<FrameSequence> {
    if params.resize.is_none() && params.crop.is_none() {
        return Ok(seq.clone());
    }
    let frames = seq
        .frames()
        .par_iter()
        .map(|f| {
            let mut f = match params.resize {
                Some([w, h]) => resize_bilinear(f, w, h)?,
                None => f.clone(),
            };
            if let Some([w, h]) = params.crop {
                f = center_crop(&f, w, h)?;
            }
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames, seq.frame_rate())
}

/// Low-light degradation and noise for one blur pair.
pub fn degrade_pair(blurry: &Frame, sharp: Frame, params: &SceneParams, index: u64) -> Result<TierTriplet> {
    let (illumination, trace) = refine_illumination_alm(&init_illumination(blurry), &params.lime)?;
    let gt_tier1 = degrade_frame(blurry, &illumination, &params.gamma)?;
    let input = add_noise_indexed(&gt_tier1, &params.noise, params.crf(), index)?;
    Ok(TierTriplet {
        input,
        gt_tier1,
        gt_tier2: blurry.clone(),
        gt_tier3: sharp,
        illumination,
        solver_converged: trace.converged,
    })
}

/// Runs every stage on a sharp source clip.
pub fn run_scene(seq: &FrameSequence, params: &SceneParams) -> Result<Vec<TierTriplet>> {
    params.gamma.validate()?;
    params.noise.validate()?;
    let seq = preprocess(seq, params)?;
    let pairs = make_pairs_from_source(&seq, &params.blur)?;
    pairs
        .into_par_iter()
        .enumerate()
        .map(|(i, p)| degrade_pair(&p.blurry, p.sharp, params, i as u64))
        .collect()
}

/// Relative paths of one triplet's files inside the scene directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletFiles {
    pub index: usize,
    pub input: String,
    pub gt1: String,
    pub gt2: String,
    pub gt3: String,
}

impl TripletFiles {
    fn for_index(index: usize) -> Self {
        let name = format!("{index:04}.png");
        Self {
            index,
            input: format!("input/{name}"),
            gt1: format!("gt1/{name}"),
            gt2: format!("gt2/{name}"),
            gt3: format!("gt3/{name}"),
        }
    }
}

/// Everything needed to regenerate a scene bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub schema_version: u32,
    pub toolkit_version: String,
    pub scene_id: String,
    pub scene_index: u64,
    pub source_path: PathBuf,
    pub source_frames: usize,
    pub frame_rate: f64,
    pub master_seed: u64,
    pub bit_depth: BitDepth,
    pub stage_order: Vec<String>,
    pub params: SceneParams,
    pub outputs: Vec<TripletFiles>,
    /// Triplets whose illumination solve hit `max_iter` before `tol`.
    pub unconverged: Vec<usize>,
}

/// Samples scene parameters, runs the stages and describes the result.
///
/// The manifest's `scene_id` defaults to `scene_NNNN` and `source_path` is
/// left empty; [`degrade_corpus`] fills both from the directory it read.
pub fn degrade_scene(
    seq: &FrameSequence,
    config: &PipelineConfig,
    scene_index: u64,
) -> Result<(Vec<TierTriplet>, SceneManifest)> {
    config.validate()?;
    let params = config.sample_scene(scene_index);
    let triplets = run_scene(seq, &params)?;
    let manifest = SceneManifest {
        schema_version: SCHEMA_VERSION,
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        scene_id: format!("scene_{scene_index:04}"),
        scene_index,
        source_path: PathBuf::new(),
        source_frames: seq.len(),
        frame_rate: seq.frame_rate(),
        master_seed: config.master_seed,
        bit_depth: config.bit_depth()?,
        stage_order: STAGE_ORDER.iter().map(|s| s.to_string()).collect(),
        params,
        outputs: (0..triplets.len()).map(TripletFiles::for_index).collect(),
        unconverged: triplets
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.solver_converged)
            .map(|(i, _)| i)
            .collect(),
    };
    Ok((triplets, manifest))
}

pub fn write_manifest(manifest: &SceneManifest, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn manifest_from_str(text: &str) -> Result<SceneManifest> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::Schema(format!(
                "schema version {v} is not supported (expected {SCHEMA_VERSION})"
            )))
        }
        None => return Err(Error::Schema("missing schema_version".into())),
    }
    serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<SceneManifest> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    manifest_from_str(&fs::read_to_string(path)?)
}

/// Writes a scene's frames and manifest under `scene_dir`.
pub fn write_scene(scene_dir: impl AsRef<Path>, triplets: &[TierTriplet], manifest: &SceneManifest) -> Result<()> {
    let dir = scene_dir.as_ref();
    if triplets.len() != manifest.outputs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} triplets but {} manifest entries",
            triplets.len(),
            manifest.outputs.len()
        )));
    }
    for sub in ["input", "gt1", "gt2", "gt3"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    triplets
        .par_iter()
        .zip(&manifest.outputs)
        .try_for_each(|(t, files)| -> Result<()> {
            save_frame(&t.input, dir.join(&files.input), manifest.bit_depth)?;
            save_frame(&t.gt_tier1, dir.join(&files.gt1), manifest.bit_depth)?;
            save_frame(&t.gt_tier2, dir.join(&files.gt2), manifest.bit_depth)?;
            save_frame(&t.gt_tier3, dir.join(&files.gt3), manifest.bit_depth)
        })?;
    write_manifest(manifest, dir.join(MANIFEST_FILE))
}

/// Regenerates the triplets a manifest describes from its source clip.
pub fn replay(manifest: &SceneManifest) -> Result<Vec<TierTriplet>> {
    let seq = load_sequence(&manifest.source_path, manifest.frame_rate)?;
    if seq.len() != manifest.source_frames {
        return Err(Error::Schema(format!(
            "source has {} frames, manifest recorded {}",
            seq.len(),
            manifest.source_frames
        )));
    }
    let triplets = run_scene(&seq, &manifest.params)?;
    if triplets.len() != manifest.outputs.len() {
        return Err(Error::Schema(format!(
            "replay produced {} triplets, manifest lists {}",
            triplets.len(),
            manifest.outputs.len()
        )));
    }
    Ok(triplets)
}

/// Replays a manifest and writes the scene to `scene_dir`.
pub fn replay_to(manifest: &SceneManifest, scene_dir: impl AsRef<Path>) -> Result<()> {
    let triplets = replay(manifest)?;
    write_scene(scene_dir, &triplets, manifest)
}

/// Scene directories under `root`, sorted by name.
pub fn list_scenes(root: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::MissingFile(root.to_path_buf()));
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

fn absolute(path: &Path) -> Result<PathBuf> {
    Ok(if path.is_absolute() {
        path.to_path_buf()
    } else {
        std::env::current_dir()?.join(path)
    })
}

/// Degrades every scene under `config.input_root` into `config.output_root`.
///
/// Scenes are indexed by their sorted position. Work runs on a pool of
/// `config.threads` workers (0 means one per core).
pub fn degrade_corpus(config: &PipelineConfig) -> Result<Vec<SceneManifest>> {
    config.validate()?;
    let scenes = list_scenes(&config.input_root)?;
    if scenes.is_empty() {
        return Err(Error::Empty("no scene directories under input_root"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| {
        scenes
            .par_iter()
            .enumerate()
            .map(|(i, dir)| {
                let seq = load_sequence(dir, config.frame_rate)?;
                let (triplets, mut manifest) = degrade_scene(&seq, config, i as u64)?;
                manifest.scene_id = dir
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| manifest.scene_id.clone());
                manifest.source_path = absolute(dir)?;
                write_scene(config.output_root.join(&manifest.scene_id), &triplets, &manifest)?;
                Ok(manifest)
            })
            .collect()
    })
}
