//! Retinex decomposition `I = R ∘ H`, illumination refinement and
//! illumination/reflectance gamma degradation.
//!
//! The illumination estimate starts from the per-pixel channel maximum and is
//! refined by solving
//!
//! ```text
//! min_T  ||T - T0||_F^2 + alpha * ||W ∘ ∇T||_1
//! ```
//!
//! with an augmented Lagrangian scheme: the gradient is split off as an
//! auxiliary variable `G`, the `T` subproblem is a periodic Poisson-type
//! system diagonalized by the 2-D DFT, and the `G` subproblem is an
//! elementwise soft threshold.

use std::fmt::Write as _;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::frame::Frame;
use crate::{Error, Result};

/// Lower bound applied to every illumination value so division is defined.
pub const EPS_FLOOR: f64 = 1e-3;

/// Per-pixel scalar illumination.
#[derive(Debug, Clone, PartialEq)]
pub struct IlluminationMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl IlluminationMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("illumination map must be non-empty".into()));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} map needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("illumination values must be finite".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Raises every value to at least `floor`.
    pub fn floored(&self, floor: f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v.max(floor)).collect(),
        }
    }

    /// Grayscale frame view, for saving.
    pub fn to_frame(&self) -> Frame {
        let data = self.data.iter().map(|&v| v as f32).collect();
        Frame::new(self.width, self.height, 1, data).expect("map dimensions are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightStrategy {
    /// `W = 1`.
    Uniform,
    /// `W = 1 / (|∇T0| + weight_eps)` per direction.
    GradientInverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimeParams {
    pub alpha: f64,
    pub weight_strategy: WeightStrategy,
    pub weight_eps: f64,
    pub mu0: f64,
    pub rho: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LimeParams {
    fn default() -> Self {
        Self {
            alpha: 0.15,
            weight_strategy: WeightStrategy::Uniform,
            weight_eps: 1e-3,
            mu0: 0.05,
            rho: 1.1,
            max_iter: 200,
            tol: 1e-5,
        }
    }
}

impl LimeParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("weight_eps", self.weight_eps)?;
        positive("mu0", self.mu0)?;
        positive("tol", self.tol)?;
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho must exceed 1, got {}", self.rho)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Max-channel illumination estimate, floored at [`EPS_FLOOR`].
///
/// Single-channel frames use their only channel.
pub fn init_illumination(frame: &Frame) -> IlluminationMap {
    let ch = frame.channels();
    let data = frame
        .data()
        .chunks_exact(ch)
        .map(|px| px.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v)) as f64)
        .map(|v| v.max(EPS_FLOOR))
        .collect();
    IlluminationMap {
        width: frame.width(),
        height: frame.height(),
        data,
    }
}

/// Soft threshold `sign(v) * max(|v| - threshold, 0)`.
#[inline]
pub fn shrink(v: f64, threshold: f64) -> f64 {
    let m = v.abs() - threshold;
    if m > 0.0 {
        m.copysign(v)
    } else {
        0.0
    }
}

/// Forward differences with periodic wrap, horizontal then vertical.
pub fn periodic_gradient(t: &[f64], width: usize, height: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gh = vec![0.0; t.len()];
    let mut gv = vec![0.0; t.len()];
    for y in 0..height {
        let yn = (y + 1) % height;
        for x in 0..width {
            let xn = (x + 1) % width;
            let i = y * width + x;
            gh[i] = t[y * width + xn] - t[i];
            gv[i] = t[yn * width + x] - t[i];
        }
    }
    (gh, gv)
}

/// Adjoint of [`periodic_gradient`].
fn periodic_divergence_adj(gh: &[f64], gv: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; gh.len()];
    for y in 0..height {
        let yp = (y + height - 1) % height;
        for x in 0..width {
            let xp = (x + width - 1) % width;
            let i = y * width + x;
            out[i] = gh[y * width + xp] - gh[i] + gv[yp * width + x] - gv[i];
        }
    }
    out
}

/// Per-direction weights for the total-variation term.
pub fn tv_weights(t_hat: &IlluminationMap, params: &LimeParams) -> (Vec<f64>, Vec<f64>) {
    let n = t_hat.data.len();
    match params.weight_strategy {
        WeightStrategy::Uniform => (vec![1.0; n], vec![1.0; n]),
        WeightStrategy::GradientInverse => {
            let (gh, gv) = periodic_gradient(&t_hat.data, t_hat.width, t_hat.height);
            let w = |g: &f64| 1.0 / (g.abs() + params.weight_eps);
            (gh.iter().map(w).collect(), gv.iter().map(w).collect())
        }
    }
}

/// `||T - T0||_F^2 + alpha * sum(W ∘ |∇T|)` with periodic differences.
pub fn lime_objective(
    t: &[f64],
    t_hat: &IlluminationMap,
    weights: &(Vec<f64>, Vec<f64>),
    alpha: f64,
) -> f64 {
    let (gh, gv) = periodic_gradient(t, t_hat.width, t_hat.height);
    let data: f64 = t.iter().zip(&t_hat.data).map(|(a, b)| (a - b).powi(2)).sum();
    let tv: f64 = gh
        .iter()
        .zip(&weights.0)
        .chain(gv.iter().zip(&weights.1))
        .map(|(g, w)| w * g.abs())
        .sum();
    data + alpha * tv
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Objective of the accepted (returned-so-far) map.
    pub objective: f64,
    /// Objective of this iteration's raw `T` update.
    pub iterate_objective: f64,
    pub primal_residual: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmTrace {
    pub entries: Vec<TraceEntry>,
    /// Objective of the starting point `T = T0`.
    pub initial_objective: f64,
    pub converged: bool,
    /// Iteration whose map was returned; 0 means the input itself.
    pub best_iteration: usize,
}

impl AlmTrace {
    pub fn final_objective(&self) -> f64 {
        self.entries.last().map_or(self.initial_objective, |e| e.objective)
    }

    /// CSV with header `iteration,objective,primal_residual,mu`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,objective,primal_residual,mu\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{:e},{:e},{:e}", e.iteration, e.objective, e.primal_residual, e.mu);
        }
        out
    }
}

/// 2-D DFT over a row-major `width x height` grid.
struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn run(&self, buf: &mut [Complex64], forward: bool) {
        let (rows, cols) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };
        for row in buf.chunks_exact_mut(self.width) {
            rows.process(row);
        }
        let mut column = vec![Complex64::default(); self.height];
        for x in 0..self.width {
            for y in 0..self.height {
                column[y] = buf[y * self.width + x];
            }
            cols.process(&mut column);
            for y in 0..self.height {
                buf[y * self.width + x] = column[y];
            }
        }
    }
}

/// Refines an illumination estimate with the ALM total-variation solver.
///
/// A raw `T` update replaces the accepted map only when it does not raise the
/// objective, so the reported objective is non-increasing while the splitting
/// variables keep evolving from the raw iterates. The accepted map is returned
/// floored at [`EPS_FLOOR`]. When the primal residual never drops below `tol`
/// the trace is marked as not converged.
pub fn refine_illumination_alm(
    t_hat: &IlluminationMap,
    params: &LimeParams,
) -> Result<(IlluminationMap, AlmTrace)> {
    params.validate()?;
    let (w, h) = (t_hat.width, t_hat.height);
    let n = w * h;
    let weights = tv_weights(t_hat, params);
    let fft = Fft2::new(w, h);

    // Eigenvalues of ∇ᵀ∇ under periodic boundary.
    let lap_x: Vec<f64> = (0..w)
        .map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / w as f64).cos())
        .collect();
    let lap_y: Vec<f64> = (0..h)
        .map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / h as f64).cos())
        .collect();

    let mut t = t_hat.data.clone();
    let (mut g_h, mut g_v) = (vec![0.0; n], vec![0.0; n]);
    let (mut lam_h, mut lam_v) = (vec![0.0; n], vec![0.0; n]);
    let mut mu = params.mu0;

    let initial_objective = lime_objective(&t, t_hat, &weights, params.alpha);
    let mut best = (initial_objective, t.clone(), 0usize);
    let mut entries = Vec::new();
    let mut converged = false;
    let mut spectrum = vec![Complex64::default(); n];

    for iteration in 1..=params.max_iter {
        // T-update: (2I + mu ∇ᵀ∇) T = 2 T0 + ∇ᵀ(mu G - Λ)
        let bh: Vec<f64> = g_h.iter().zip(&lam_h).map(|(g, l)| mu * g - l).collect();
        let bv: Vec<f64> = g_v.iter().zip(&lam_v).map(|(g, l)| mu * g - l).collect();
        let div = periodic_divergence_adj(&bh, &bv, w, h);
        for (i, s) in spectrum.iter_mut().enumerate() {
            *s = Complex64::new(2.0 * t_hat.data[i] + div[i], 0.0);
        }
        fft.run(&mut spectrum, true);
        for y in 0..h {
            for x in 0..w {
                spectrum[y * w + x] /= 2.0 + mu * (lap_x[x] + lap_y[y]);
            }
        }
        fft.run(&mut spectrum, false);
        let scale = 1.0 / n as f64;
        for (ti, s) in t.iter_mut().zip(&spectrum) {
            *ti = s.re * scale;
        }

        // G-update: shrink(∇T + Λ/mu, alpha W / mu)
        let (dh, dv) = periodic_gradient(&t, w, h);
        for i in 0..n {
            g_h[i] = shrink(dh[i] + lam_h[i] / mu, params.alpha * weights.0[i] / mu);
            g_v[i] = shrink(dv[i] + lam_v[i] / mu, params.alpha * weights.1[i] / mu);
        }

        let mut residual = 0.0f64;
        for i in 0..n {
            let rh = dh[i] - g_h[i];
            let rv = dv[i] - g_v[i];
            lam_h[i] += mu * rh;
            lam_v[i] += mu * rv;
            residual = residual.max(rh.abs()).max(rv.abs());
        }

        let iterate_objective = lime_objective(&t, t_hat, &weights, params.alpha);
        if iterate_objective <= best.0 {
            best = (iterate_objective, t.clone(), iteration);
        }
        entries.push(TraceEntry {
            iteration,
            objective: best.0,
            iterate_objective,
            primal_residual: residual,
            mu,
        });
        mu *= params.rho;
        if residual < params.tol {
            converged = true;
            break;
        }
    }

    let (_, best_t, best_iteration) = best;
    let refined = IlluminationMap {
        width: w,
        height: h,
        data: best_t,
    }
    .floored(EPS_FLOOR);
    Ok((
        refined,
        AlmTrace {
            entries,
            initial_objective,
            converged,
            best_iteration,
        },
    ))
}

/// Reflectance and illumination with `I_c = R_c * H`.
#[derive(Debug, Clone, PartialEq)]
pub struct RetinexDecomposition {
    pub reflectance: Frame,
    pub illumination: IlluminationMap,
}

impl RetinexDecomposition {
    /// `R ∘ H`.
    pub fn recompose(&self) -> Frame {
        let ch = self.reflectance.channels();
        let data = self
            .reflectance
            .data()
            .chunks_exact(ch)
            .zip(&self.illumination.data)
            .flat_map(|(px, &h)| px.iter().map(move |&r| (r as f64 * h) as f32))
            .collect();
        self.reflectance.with_data(data)
    }
}

/// Divides every channel by the illumination.
pub fn decompose(frame: &Frame, t: &IlluminationMap) -> Result<RetinexDecomposition> {
    if frame.width() != t.width || frame.height() != t.height {
        return Err(Error::DimensionMismatch(format!(
            "frame {}x{} vs illumination {}x{}",
            frame.width(),
            frame.height(),
            t.width,
            t.height
        )));
    }
    if let Some(v) = t.data.iter().find(|&&v| v <= 0.0) {
        return Err(Error::InvalidArgument(format!("illumination must be positive, found {v}")));
    }
    let ch = frame.channels();
    let data = frame
        .data()
        .chunks_exact(ch)
        .zip(&t.data)
        .flat_map(|(px, &h)| px.iter().map(move |&v| (v as f64 / h) as f32))
        .collect();
    Ok(RetinexDecomposition {
        reflectance: frame.with_data(data),
        illumination: t.clone(),
    })
}

/// Illumination (`gamma1`) and reflectance (`gamma2`) exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaParams {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl GammaParams {
    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("gamma1", self.gamma1), ("gamma2", self.gamma2)] {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {g}")));
            }
        }
        Ok(())
    }
}

#[inline]
fn lowlight(r: f64, h: f64, g: &GammaParams, clamp: bool) -> f32 {
    let y = r.max(0.0).powf(g.gamma2) * h.max(0.0).powf(g.gamma1);
    if clamp { y.clamp(0.0, 1.0) as f32 } else { y as f32 }
}

fn degrade_impl(decomp: &RetinexDecomposition, g: &GammaParams, clamp: bool) -> Result<Frame> {
    g.validate()?;
    let ch = decomp.reflectance.channels();
    let data = decomp
        .reflectance
        .data()
        .chunks_exact(ch)
        .zip(&decomp.illumination.data)
        .flat_map(|(px, &h)| px.iter().map(move |&r| lowlight(r as f64, h, g, clamp)))
        .collect();
    Ok(decomp.reflectance.with_data(data))
}

/// `R^gamma2 ∘ H^gamma1`, clamped to `[0, 1]`.
pub fn degrade(decomp: &RetinexDecomposition, g: &GammaParams) -> Result<Frame> {
    degrade_impl(decomp, g, true)
}

/// [`degrade`] without the final clamp; the path [`invert_gamma`] undoes.
pub fn degrade_unclamped(decomp: &RetinexDecomposition, g: &GammaParams) -> Result<Frame> {
    degrade_impl(decomp, g, false)
}

/// [`degrade`] of `decompose(frame, t)` with the reflectance kept in double
/// precision. Unit exponents return `frame` unchanged.
pub fn degrade_frame(frame: &Frame, t: &IlluminationMap, g: &GammaParams) -> Result<Frame> {
    g.validate()?;
    if frame.width() != t.width || frame.height() != t.height {
        return Err(Error::DimensionMismatch(format!(
            "frame {}x{} vs illumination {}x{}",
            frame.width(),
            frame.height(),
            t.width,
            t.height
        )));
    }
    if let Some(v) = t.data.iter().find(|&&v| v <= 0.0) {
        return Err(Error::InvalidArgument(format!("illumination must be positive, found {v}")));
    }
    let ch = frame.channels();
    let data = frame
        .data()
        .chunks_exact(ch)
        .zip(&t.data)
        .flat_map(|(px, &h)| px.iter().map(move |&v| lowlight(v as f64 / h, h, g, true)))
        .collect();
    Ok(frame.with_data(data))
}

/// Recovers `R ∘ H` from a degraded frame given the decomposition's
/// illumination and the exponents used to degrade it.
pub fn invert_gamma(frame: &Frame, decomp: &RetinexDecomposition, g: &GammaParams) -> Result<Frame> {
    if g.gamma1 == 0.0 || g.gamma2 == 0.0 {
        return Err(Error::InvalidArgument("gamma exponents must be non-zero".into()));
    }
    g.validate()?;
    frame.check_same_shape(&decomp.reflectance)?;
    let ch = frame.channels();
    let data = frame
        .data()
        .chunks_exact(ch)
        .zip(&decomp.illumination.data)
        .flat_map(|(px, &h)| {
            let h_hat = h.powf(g.gamma1);
            let h_rec = h_hat.powf(g.gamma1.recip());
            px.iter().map(move |&y| {
                let r_hat = y as f64 / h_hat;
                (r_hat.max(0.0).powf(g.gamma2.recip()) * h_rec) as f32
            })
        })
        .collect();
    Ok(frame.with_data(data))
}
