//! Deterministic DDIM machinery: noise schedule, conditioned denoising,
//! masked inversion and the implicit-motion diagnostic.

mod predictor;

pub use predictor::{NoiseLevel, NoisePredictor, TinyUnet, ZeroPredictor, DEFAULT_RESIDUAL_SCALE, UNET_WIDTHS};

use std::fmt::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Dims, Error, Result};
use crate::stvc::ImportanceMask;
use crate::tensor::LatentFeature;

pub const DEFAULT_STEPS: usize = 30;
pub const DEFAULT_BASE_STEPS: usize = 1000;
pub const BETA_START: f64 = 1e-4;
pub const BETA_END: f64 = 2e-2;

/// Linear-β base schedule uniformly subsampled to `steps` levels.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    base_steps: usize,
    /// `indices[t]` is the base-schedule step behind sampled step `t`;
    /// `indices[0] = 0`.
    indices: Vec<usize>,
    alpha_bar: Vec<f64>,
}

/// `β_k` of the base schedule, `k = 1..=base_steps`.
pub fn base_beta(k: usize, base_steps: usize) -> f64 {
    if base_steps == 1 {
        return BETA_START;
    }
    BETA_START + (BETA_END - BETA_START) * (k - 1) as f64 / (base_steps - 1) as f64
}

pub fn build_schedule(steps: usize, base_steps: usize) -> Result<DiffusionSchedule> {
    if steps == 0 || steps > base_steps {
        return Err(Error::InvalidSchedule(format!("step count {steps} outside [1, {base_steps}]")));
    }
    let mut cumulative = Vec::with_capacity(base_steps + 1);
    cumulative.push(1.0);
    let mut acc = 1.0;
    for k in 1..=base_steps {
        acc *= 1.0 - base_beta(k, base_steps);
        cumulative.push(acc);
    }
    let indices: Vec<usize> = (0..=steps).map(|t| (t * base_steps + steps / 2) / steps).collect();
    let alpha_bar = indices.iter().map(|&i| cumulative[i]).collect();
    Ok(DiffusionSchedule {
        base_steps,
        indices,
        alpha_bar,
    })
}

impl DiffusionSchedule {
    /// Number of sampled steps `T`.
    pub fn steps(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    pub fn base_steps(&self) -> usize {
        self.base_steps
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub fn base_index(&self, t: usize) -> usize {
        self.indices[t]
    }

    pub fn level(&self, t: usize) -> NoiseLevel {
        NoiseLevel {
            step: t,
            alpha_bar: self.alpha_bar[t],
        }
    }

    fn check_step(&self, t: usize, min: usize) -> Result<()> {
        if t < min || t > self.steps() {
            return Err(Error::StepOutOfRange {
                step: t,
                min,
                max: self.steps(),
            });
        }
        Ok(())
    }

    /// Audit table: one line per sampled step, `step base_index alpha_bar`.
    pub fn dump(&self) -> String {
        let mut s = String::from("# step base_index alpha_bar\n");
        for t in 0..=self.steps() {
            writeln!(s, "{t} {} {:.17e}", self.indices[t], self.alpha_bar[t]).unwrap();
        }
        s
    }
}

/// Deterministic (η = 0) DDIM transition from step `t` to `t - 1`.
pub fn denoise_step<P: NoisePredictor + ?Sized>(
    y_t: &LatentFeature,
    t: usize,
    cond: Option<&LatentFeature>,
    sched: &DiffusionSchedule,
    pred: &P,
) -> Result<LatentFeature> {
    sched.check_step(t, 1)?;
    let eps = pred.predict(y_t, sched.level(t), cond)?;
    let (a_t, a_prev) = (sched.alpha_bar(t), sched.alpha_bar(t - 1));
    let (sa_t, sa_prev) = (libm::sqrt(a_t), libm::sqrt(a_prev));
    let (sn_t, sn_prev) = (libm::sqrt(1.0 - a_t), libm::sqrt(1.0 - a_prev));
    Ok(y_t.zip_map(&eps, |y, e| sa_prev * (y - sn_t * e) / sa_t + sn_prev * e))
}

/// One masked inversion step from `t - 1` to `t`, with the unconditioned
/// noise estimate taken at the current (less noisy) state.
pub fn masked_invert_step<P: NoisePredictor + ?Sized>(
    y_prev: &LatentFeature,
    t: usize,
    omega: &ImportanceMask,
    sched: &DiffusionSchedule,
    pred: &P,
) -> Result<LatentFeature> {
    sched.check_step(t, 1)?;
    omega.feature().ensure_same_dims(y_prev)?;
    let eps = pred.predict(y_prev, sched.level(t - 1), None)?;
    let (a_t, a_prev) = (sched.alpha_bar(t), sched.alpha_bar(t - 1));
    let (sa_t, sa_prev) = (libm::sqrt(a_t), libm::sqrt(a_prev));
    let (sn_t, sn_prev) = (libm::sqrt(1.0 - a_t), libm::sqrt(1.0 - a_prev));
    let me = omega.feature().zip_map(&eps, |m, e| m * e);
    Ok(y_prev.zip_map(&me, |y, e| sa_t * (y - sn_prev * e) / sa_prev + sn_t * e))
}

/// Masked inversion from step 0 up to `target_step`.
pub fn invert<P: NoisePredictor + ?Sized>(
    y_ref: &LatentFeature,
    omega: &ImportanceMask,
    target_step: usize,
    sched: &DiffusionSchedule,
    pred: &P,
) -> Result<LatentFeature> {
    sched.check_step(target_step, 0)?;
    omega.feature().ensure_same_dims(y_ref)?;
    let mut y = y_ref.clone();
    for t in 1..=target_step {
        y = masked_invert_step(&y, t, omega, sched, pred)?;
    }
    Ok(y)
}

/// Conditioned denoising chain from `start_step` down to step 0.
pub fn denoise_from<P: NoisePredictor + ?Sized>(
    y_start: &LatentFeature,
    start_step: usize,
    cond: Option<&LatentFeature>,
    sched: &DiffusionSchedule,
    pred: &P,
) -> Result<LatentFeature> {
    sched.check_step(start_step, 0)?;
    let mut y = y_start.clone();
    for t in (1..=start_step).rev() {
        y = denoise_step(&y, t, cond, sched, pred)?;
    }
    Ok(y)
}

/// Implicit motion `y⁰ - ŷ_ref`.
pub fn implicit_motion(y_ref: &LatentFeature, y0: &LatentFeature) -> Result<LatentFeature> {
    y0.sub(y_ref)
}

/// Standard normal tensor determined by `(seed, index)`.
pub fn seeded_noise(dims: Dims, seed: u64, index: u64) -> LatentFeature {
    let mix = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let mut rng = ChaCha8Rng::seed_from_u64(mix);
    LatentFeature::from_fn(dims, |_, _, _| StandardNormal.sample(&mut rng))
}
