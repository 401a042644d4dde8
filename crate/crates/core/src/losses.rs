//! Charbonnier loss and uncertainty-based weighting of the three tier losses.
//!
//! Each tier loss `L_i` is weighted by a learned observation-noise parameter
//! `σ_i` as `L_i / (2 σ_i²) + ln(1 + σ_i²)`, and the total is the sum over
//! tiers. The `σ_i` are updated by Adam on `s_i = ln σ_i`, which keeps them
//! strictly positive.

use serde::{Deserialize, Serialize};

use crate::frame::Frame;
use crate::{Error, Result};

/// Number of restoration tiers (denoise, +enhance, +deblur).
pub const TIERS: usize = 3;

pub const CHARBONNIER_EPS: f64 = 1e-9;

/// Smallest σ the optimizer is allowed to reach.
pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CharbonnierMode {
    /// `mean_p sqrt((a_p - b_p)^2 + eps)`.
    #[default]
    PerPixel,
    /// `sqrt(||a - b||^2 + eps)` over the whole frame.
    Global,
}

/// Per-pixel mean Charbonnier loss.
pub fn charbonnier(a: &Frame, b: &Frame, eps: f64) -> Result<f64> {
    charbonnier_with_mode(a, b, eps, CharbonnierMode::PerPixel)
}

pub fn charbonnier_with_mode(a: &Frame, b: &Frame, eps: f64, mode: CharbonnierMode) -> Result<f64> {
    a.check_same_shape(b)?;
    let diffs = a.data().iter().zip(b.data()).map(|(&x, &y)| {
        let d = x as f64 - y as f64;
        d * d
    });
    Ok(match mode {
        CharbonnierMode::PerPixel => {
            diffs.map(|d2| (d2 + eps).sqrt()).sum::<f64>() / a.data().len() as f64
        }
        CharbonnierMode::Global => (diffs.sum::<f64>() + eps).sqrt(),
    })
}

/// `raw / (2σ²) + ln σ`, the plain log-likelihood form. Reference only; the
/// optimizer uses [`weighted_term`].
pub fn log_sigma_term(raw: f64, sigma: f64) -> f64 {
    raw / (2.0 * sigma * sigma) + sigma.ln()
}

/// `raw / (2σ²) + ln(1 + σ²)`.
pub fn weighted_term(raw: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    raw / (2.0 * s2) + s2.ln_1p()
}

/// `d/dσ [raw / (2σ²) + ln(1 + σ²)] = -raw/σ³ + 2σ/(1 + σ²)`.
pub fn sigma_gradient(raw: f64, sigma: f64) -> f64 {
    -raw / (sigma * sigma * sigma) + 2.0 * sigma / (1.0 + sigma * sigma)
}

/// The σ² minimizing [`weighted_term`] for a fixed `raw > 0`: the positive
/// root of `2 s² - raw s - raw = 0`.
pub fn optimal_sigma_squared(raw: f64) -> f64 {
    (raw + (raw * raw + 8.0 * raw).sqrt()) / 4.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub raw: [f64; TIERS],
    pub weighted: [f64; TIERS],
    pub total: f64,
}

/// Weights each raw tier loss with its σ and sums them.
pub fn adaptive_weighted_loss(raw: [f64; TIERS], state: &SigmaState) -> Result<LossBreakdown> {
    weighted_loss_for(raw, state.sigmas())
}

pub fn weighted_loss_for(raw: [f64; TIERS], sigmas: [f64; TIERS]) -> Result<LossBreakdown> {
    if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {s}")));
    }
    if let Some(r) = raw.iter().find(|r| !(**r >= 0.0)) {
        return Err(Error::InvalidArgument(format!("raw loss must be non-negative, got {r}")));
    }
    let weighted: [f64; TIERS] = std::array::from_fn(|i| weighted_term(raw[i], sigmas[i]));
    Ok(LossBreakdown {
        raw,
        weighted,
        total: weighted.iter().sum(),
    })
}

/// Observation-noise parameters with their Adam state.
///
/// Moments are kept on `ln σ`. With an exact (noise-free) gradient the
/// second-moment estimate decays once σ settles, and Adam's effective step
/// `lr / (sqrt(v) + adam_eps)` then grows until it exceeds the `2 / f''`
/// stability bound (`f'' <= 4` in log-σ space). `adam_eps` must therefore
/// stay above about `2 * lr`; the default 0.05 pairs with `lr = 1e-2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaState {
    log_sigmas: [f64; TIERS],
    adam_m: [f64; TIERS],
    adam_v: [f64; TIERS],
    step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for SigmaState {
    /// σ = 1 for every tier, β1 = 0.9, β2 = 0.99, lr = 1e-2, adam_eps = 0.05.
    fn default() -> Self {
        Self::new(1e-2)
    }
}

impl SigmaState {
    pub fn new(lr: f64) -> Self {
        Self {
            log_sigmas: [0.0; TIERS],
            adam_m: [0.0; TIERS],
            adam_v: [0.0; TIERS],
            step_count: 0,
            lr,
            beta1: 0.9,
            beta2: 0.99,
            adam_eps: 0.05,
        }
    }

    pub fn with_sigmas(sigmas: [f64; TIERS], lr: f64) -> Result<Self> {
        if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {s}")));
        }
        Ok(Self {
            log_sigmas: sigmas.map(f64::ln),
            ..Self::new(lr)
        })
    }

    pub fn sigmas(&self) -> [f64; TIERS] {
        self.log_sigmas.map(f64::exp)
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Effective per-tier loss weights `1 / (2σ²)`.
    pub fn loss_weights(&self) -> [f64; TIERS] {
        self.sigmas().map(|s| 0.5 / (s * s))
    }

    /// One Adam step on every `ln σ_i` given the current raw tier losses.
    pub fn step(&mut self, raw: [f64; TIERS]) {
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let floor = SIGMA_FLOOR.ln();
        for i in 0..TIERS {
            let sigma = self.log_sigmas[i].exp();
            // chain rule through σ = e^s
            let g = sigma_gradient(raw[i], sigma) * sigma;
            self.adam_m[i] = self.beta1 * self.adam_m[i] + (1.0 - self.beta1) * g;
            self.adam_v[i] = self.beta2 * self.adam_v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.adam_m[i] / bc1;
            let v_hat = self.adam_v[i] / bc2;
            self.log_sigmas[i] = (self.log_sigmas[i] - self.lr * m_hat / (v_hat.sqrt() + self.adam_eps)).max(floor);
        }
    }
}

/// Returns the state after one optimizer step.
pub fn update_sigmas(state: &SigmaState, raw: [f64; TIERS]) -> SigmaState {
    let mut next = state.clone();
    next.step(raw);
    next
}
