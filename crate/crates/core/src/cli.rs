//! Command-line front end. Exit codes: 0 success, 1 runtime failure,
//! 2 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::attention::checks::run_invariant_suite;
use crate::frame::{list_pngs, load_frame, save_frame, BitDepth};
use crate::losses::{adaptive_weighted_loss, charbonnier, optimal_sigma_squared, SigmaState, CHARBONNIER_EPS, TIERS};
use crate::metrics::{psnr, ssim};
use crate::pipeline::{degrade_corpus, PipelineConfig};
use crate::retinex::{init_illumination, refine_illumination_alm, LimeParams, WeightStrategy};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "lbn", version, about = "Low-light blurry noisy video degradation toolkit")]
struct Cli {
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for one per core (overrides the config file).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Degrade every scene under the input root into tier triplets.
    Degrade(DegradeArgs),
    /// Per-frame PSNR, SSIM and Charbonnier between two directories.
    Metrics(MetricsArgs),
    /// Simulate the adaptive tier weighting on fixed raw losses.
    LossSim(LossSimArgs),
    /// Run the attention invariant checks on random tensors.
    AttnCheck(AttnCheckArgs),
    /// Refine the illumination map of one frame and print the solver trace.
    LimeSolve(LimeSolveArgs),
}

#[derive(Debug, Args)]
struct DegradeArgs {
    /// Directory holding one sub-directory per scene.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    dir_a: PathBuf,
    dir_b: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LossSimArgs {
    /// Raw tier losses, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1, default_value = "4,4,4")]
    raw: Vec<f64>,
    #[arg(long, default_value_t = 5000)]
    steps: usize,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    /// Print a row every this many steps.
    #[arg(long, default_value_t = 500)]
    every: usize,
}

#[derive(Debug, Args)]
struct AttnCheckArgs {
    #[arg(long, default_value_t = 100)]
    trials: usize,
}

#[derive(Debug, Args)]
struct LimeSolveArgs {
    image: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_parser = parse_weights)]
    weights: Option<WeightStrategy>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Write the trace CSV here instead of stdout.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Save the refined illumination as a 16-bit grayscale PNG.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_weights(s: &str) -> std::result::Result<WeightStrategy, String> {
    match s {
        "uniform" => Ok(WeightStrategy::Uniform),
        "gradient-inverse" => Ok(WeightStrategy::GradientInverse),
        other => Err(format!("unknown weight strategy '{other}' (uniform, gradient-inverse)")),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<i32> {
    let cfg = load_config(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Degrade(a) => cmd_degrade(cfg, a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::LossSim(a) => cmd_loss_sim(a),
        Command::AttnCheck(a) => cmd_attn_check(cfg.master_seed, a),
        Command::LimeSolve(a) => cmd_lime_solve(cfg.lime, a),
    })
}

fn cmd_degrade(mut cfg: PipelineConfig, a: &DegradeArgs) -> Result<i32> {
    if let Some(input) = &a.input {
        cfg.input_root = input.clone();
    }
    if let Some(output) = &a.output {
        cfg.output_root = output.clone();
    }
    let manifests = degrade_corpus(&cfg)?;
    for m in &manifests {
        println!("{}: {} triplets", m.scene_id, m.outputs.len());
        if !m.unconverged.is_empty() {
            eprintln!(
                "warning: {}: illumination solve did not converge for triplets {:?}",
                m.scene_id, m.unconverged
            );
        }
    }
    Ok(0)
}

fn fmt_metric(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.6}")
    }
}

/// CSV of per-frame metrics for same-named frames in two directories,
/// followed by a `mean` row.
pub fn metrics_csv(dir_a: &Path, dir_b: &Path) -> Result<String> {
    let a = list_pngs(dir_a)?;
    let b = list_pngs(dir_b)?;
    let names = |v: &[PathBuf]| v.iter().map(|p| p.file_name().map(|n| n.to_owned())).collect::<Vec<_>>();
    if names(&a) != names(&b) {
        return Err(Error::DimensionMismatch(format!(
            "{} and {} hold different frame sets",
            dir_a.display(),
            dir_b.display()
        )));
    }
    if a.is_empty() {
        return Err(Error::Empty("no PNG frames to compare"));
    }
    let mut out = String::from("frame,psnr,ssim,charbonnier\n");
    let mut sums = [0.0; 3];
    for (pa, pb) in a.iter().zip(&b) {
        let (fa, fb) = (load_frame(pa)?, load_frame(pb)?);
        let row = [psnr(&fa, &fb, 1.0)?, ssim(&fa, &fb)?, charbonnier(&fa, &fb, CHARBONNIER_EPS)?];
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
        let name = pa.file_name().unwrap_or_default().to_string_lossy();
        let _ = writeln!(out, "{name},{},{},{}", fmt_metric(row[0]), fmt_metric(row[1]), fmt_metric(row[2]));
    }
    let n = a.len() as f64;
    let _ = writeln!(
        out,
        "mean,{},{},{}",
        fmt_metric(sums[0] / n),
        fmt_metric(sums[1] / n),
        fmt_metric(sums[2] / n)
    );
    Ok(out)
}

fn cmd_metrics(a: &MetricsArgs) -> Result<i32> {
    let csv = metrics_csv(&a.dir_a, &a.dir_b)?;
    match &a.out {
        Some(path) => fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(0)
}

fn cmd_loss_sim(a: &LossSimArgs) -> Result<i32> {
    let raw: [f64; TIERS] = a
        .raw
        .as_slice()
        .try_into()
        .map_err(|_| Error::InvalidArgument(format!("--raw needs {TIERS} values, got {}", a.raw.len())))?;
    if !(a.lr > 0.0) {
        return Err(Error::InvalidArgument(format!("--lr must be positive, got {}", a.lr)));
    }
    let mut state = SigmaState::new(a.lr);
    let every = a.every.max(1);
    println!("step,sigma1_sq,sigma2_sq,sigma3_sq,total");
    for step in 0..=a.steps {
        if step % every == 0 || step == a.steps {
            let s = state.sigmas();
            let total = adaptive_weighted_loss(raw, &state)?.total;
            println!("{step},{:.9},{:.9},{:.9},{total:.9}", s[0] * s[0], s[1] * s[1], s[2] * s[2]);
        }
        if step < a.steps {
            state.step(raw);
        }
    }
    let target: Vec<String> = raw.iter().map(|&l| format!("{:.9}", optimal_sigma_squared(l))).collect();
    eprintln!("analytic optimum sigma^2: {}", target.join(","));
    Ok(0)
}

fn cmd_attn_check(seed: u64, a: &AttnCheckArgs) -> Result<i32> {
    let reports = run_invariant_suite(seed, a.trials)?;
    let mut ok = true;
    for r in &reports {
        ok &= r.passed;
        println!(
            "{} {} ({} trials, worst {:e})",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.trials,
            r.worst
        );
    }
    Ok(if ok { 0 } else { 1 })
}

fn cmd_lime_solve(mut params: LimeParams, a: &LimeSolveArgs) -> Result<i32> {
    if let Some(v) = a.alpha {
        params.alpha = v;
    }
    if let Some(v) = a.weights {
        params.weight_strategy = v;
    }
    if let Some(v) = a.max_iter {
        params.max_iter = v;
    }
    if let Some(v) = a.tol {
        params.tol = v;
    }
    let frame = load_frame(&a.image)?;
    let (t, trace) = refine_illumination_alm(&init_illumination(&frame), &params)?;
    let csv = trace.to_csv();
    match &a.trace {
        Some(path) => fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    if let Some(path) = &a.output {
        save_frame(&t.to_frame(), path, BitDepth::Sixteen)?;
    }
    eprintln!(
        "{} after {} iterations, objective {:.9} -> {:.9}",
        if trace.converged { "converged" } else { "not converged" },
        trace.entries.len(),
        trace.initial_objective,
        trace.final_objective()
    );
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_cli(["lbn", "frobnicate"]), 2);
        assert_eq!(run_cli(["lbn", "attn-check", "--bogus"]), 2);
        assert_eq!(run_cli(["lbn"]), 2);
        assert_eq!(run_cli(["lbn", "loss-sim", "--steps", "many"]), 2);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run_cli(["lbn", "--help"]), 0);
    }

    #[test]
    fn runtime_errors_exit_one() {
        assert_eq!(run_cli(["lbn", "loss-sim", "--raw", "1,2"]), 1);
        assert_eq!(run_cli(["lbn", "--config", "/nonexistent/x.toml", "attn-check"]), 1);
    }

    #[test]
    fn quick_commands_succeed() {
        assert_eq!(run_cli(["lbn", "--seed", "2", "--threads", "1", "attn-check", "--trials", "3"]), 0);
        assert_eq!(run_cli(["lbn", "loss-sim", "--steps", "10", "--every", "5"]), 0);
    }
}
