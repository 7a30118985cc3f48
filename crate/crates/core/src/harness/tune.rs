//! Coordinate-descent tuning of a few exposed codec scalars against the
//! sequence objective.

use crate::error::Result;
use crate::gop::{Codec, CodecSettings, GopConfig};
use crate::harness::metrics::DEFAULT_BETA;
use crate::harness::sweep::measure_sequence;
use crate::latent::Frame;

/// Tunable scalars, in this order: λ-gain exponent, intra prior scale,
/// inter prior floor, inter prior texture scale, occlusion sharpness,
/// inversion depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunableParams {
    pub values: [f64; TunableParams::LEN],
}

impl TunableParams {
    pub const LEN: usize = 6;
    pub const NAMES: [&'static str; Self::LEN] =
        ["gamma", "intra_scale", "inter_floor", "inter_scale", "occlusion_sharpness", "inversion_steps"];

    /// Defaults read from a freshly seeded codec.
    pub fn from_codec(codec: &Codec) -> Self {
        let w = codec.weights();
        Self {
            values: [
                w.gamma,
                w.prior.intra_scale,
                w.prior.inter_floor,
                w.prior.inter_scale,
                codec.occlusion().sharpness,
                codec.settings().inv_steps as f64,
            ],
        }
    }

    /// Box `[lo, hi]` of each coordinate; the inversion depth box depends
    /// on the total step count.
    pub fn bounds(steps: usize) -> [(f64, f64); Self::LEN] {
        [
            (0.0, 1.0),
            (0.1, 4.0),
            (0.11, 2.0),
            (0.0, 2.0),
            (0.0, 20.0),
            (1.0, steps as f64),
        ]
    }

    /// Initial coordinate step sizes.
    pub fn initial_steps(steps: usize) -> [f64; Self::LEN] {
        [0.05, 0.25, 0.15, 0.1, 1.0, (steps as f64 / 6.0).max(1.0)]
    }

    pub fn clamped(mut self, steps: usize) -> Self {
        for (v, (lo, hi)) in self.values.iter_mut().zip(Self::bounds(steps)) {
            *v = v.clamp(lo, hi);
        }
        self.values[5] = libm::round(self.values[5]);
        self
    }

    pub fn apply(&self, codec: &mut Codec) -> Result<()> {
        let p = self.clamped(codec.settings().steps);
        let w = codec.weights_mut();
        w.gamma = p.values[0];
        w.prior.intra_scale = p.values[1];
        w.prior.inter_floor = p.values[2];
        w.prior.inter_scale = p.values[3];
        codec.occlusion_mut().sharpness = p.values[4];
        codec.set_inv_steps(p.values[5] as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub params: TunableParams,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub evaluations: usize,
    /// Loss after each accepted move, starting with the initial loss.
    pub accepted: Vec<f64>,
}

/// Aggregate objective of coding `frames` with `params` applied.
pub fn evaluate(params: &TunableParams, frames: &[Frame], gop: &GopConfig, settings: &CodecSettings) -> Result<f64> {
    let mut codec = Codec::new(settings.clone())?;
    params.apply(&mut codec)?;
    let enc = codec.encode_sequence(frames, gop)?;
    let points = measure_sequence(frames, &enc, gop.mode, settings.lambda, DEFAULT_BETA)?;
    Ok(points.last().expect("aggregate point").loss)
}

/// Cyclic coordinate descent: each coordinate tries `±step`, moves only on
/// a strict loss decrease, and halves its step when neither side improves.
/// Stops after `budget` objective evaluations (the initial one included).
pub fn tune(
    params: TunableParams,
    frames: &[Frame],
    gop: &GopConfig,
    settings: &CodecSettings,
    budget: usize,
) -> Result<TuneResult> {
    let steps_total = settings.steps;
    let bounds = TunableParams::bounds(steps_total);
    let mut step = TunableParams::initial_steps(steps_total);
    let mut best = params.clamped(steps_total);
    let mut best_loss = evaluate(&best, frames, gop, settings)?;
    let initial_loss = best_loss;
    let mut accepted = vec![best_loss];
    let mut evaluations = 1;
    'outer: while evaluations < budget {
        let before = evaluations;
        for k in 0..TunableParams::LEN {
            let mut improved = false;
            for dir in [1.0, -1.0] {
                if evaluations >= budget {
                    break 'outer;
                }
                let mut cand = best;
                cand.values[k] = (cand.values[k] + dir * step[k]).clamp(bounds[k].0, bounds[k].1);
                cand = cand.clamped(steps_total);
                if cand == best {
                    continue;
                }
                let loss = evaluate(&cand, frames, gop, settings)?;
                evaluations += 1;
                if loss < best_loss {
                    best = cand;
                    best_loss = loss;
                    accepted.push(loss);
                    improved = true;
                    break;
                }
            }
            if !improved {
                step[k] *= 0.5;
                if k == 5 {
                    step[k] = step[k].max(1.0);
                }
            }
        }
        if evaluations == before {
            break;
        }
    }
    Ok(TuneResult {
        params: best,
        initial_loss,
        final_loss: best_loss,
        evaluations,
        accepted,
    })
}
