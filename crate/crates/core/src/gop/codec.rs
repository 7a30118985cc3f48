//! Per-frame orchestration: latent transform, reference selection, codec,
//! range coding, and the diffusion reconstruction. Encoder and decoder
//! share [`Codec::reconstruct`], so the encoder's local reconstruction is
//! the decoder's output by construction.

use std::str::FromStr;

use crate::diffusion::{self, build_schedule, DiffusionSchedule, TinyUnet, DEFAULT_BASE_STEPS, DEFAULT_STEPS};
use crate::entropy::{context_params, estimate_rate, range_decode, range_encode, Bitpayload};
use crate::error::{Error, Result};
use crate::gop::occlusion::{fuse_references, occlusion_estimate, OcclusionMode, OcclusionNet};
use crate::gop::schedule::{sequence_schedule, FrameType, GopConfig, ScheduleEntry};
use crate::gop::FeatureBuffer;
use crate::latent::{Frame, LatentTransform, DEFAULT_LATENT_CHANNELS};
use crate::stvc::{self, ImportanceMask, RateParam, StvcWeights};
use crate::tensor::LatentFeature;

/// Where the denoising chain of a predicted frame starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartPolicy {
    /// At the inversion depth, matching the noise level of the inverted
    /// reference.
    Consistent,
    /// At the full step count, whatever the inversion depth.
    Literal,
}

impl FromStr for StartPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "consistent" => Ok(Self::Consistent),
            "literal" => Ok(Self::Literal),
            _ => Err(Error::InvalidConfig(format!("unknown start-step policy {s:?}"))),
        }
    }
}

impl std::fmt::Display for StartPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Consistent => "consistent",
            Self::Literal => "literal",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecSettings {
    pub channels: usize,
    pub seed: u64,
    pub lambda: f64,
    pub steps: usize,
    pub inv_steps: usize,
    pub start_policy: StartPolicy,
    pub occlusion: OcclusionMode,
}

impl Default for CodecSettings {
    fn default() -> Self {
        Self {
            channels: DEFAULT_LATENT_CHANNELS,
            seed: 0,
            lambda: 64.0,
            steps: DEFAULT_STEPS,
            inv_steps: DEFAULT_STEPS / 2,
            start_policy: StartPolicy::Consistent,
            occlusion: OcclusionMode::Learned,
        }
    }
}

/// Everything the decoder can reproduce for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameReconstruction {
    pub display_index: usize,
    pub frame_type: FrameType,
    /// Output pixels.
    pub frame: Frame,
    /// Codec reconstruction ŷ, the value kept in the feature buffer.
    pub latent: LatentFeature,
    /// Final state of the denoising chain.
    pub denoised: LatentFeature,
    /// Decoder-side importance mask.
    pub mask: ImportanceMask,
    /// Reference latent the frame was coded against.
    pub reference: Option<LatentFeature>,
}

#[derive(Debug, Clone)]
pub struct EncodedFrame {
    pub payload: Bitpayload,
    pub estimated_bits: f64,
    /// Symbols clamped into the alphabet.
    pub saturated: usize,
    pub recon: FrameReconstruction,
}

#[derive(Debug, Clone)]
pub struct EncodedRecord {
    pub display_index: usize,
    pub frame_type: FrameType,
    pub payload: Bitpayload,
    pub estimated_bits: f64,
    pub saturated: usize,
}

#[derive(Debug, Clone)]
pub struct EncodedSequence {
    /// Records in coding order.
    pub records: Vec<EncodedRecord>,
    /// Encoder-side reconstructions in display order.
    pub recon: Vec<FrameReconstruction>,
}

impl EncodedSequence {
    pub fn total_bytes(&self) -> usize {
        self.records.iter().map(|r| r.payload.bytes.len()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Codec {
    settings: CodecSettings,
    rate: RateParam,
    transform: LatentTransform,
    weights: StvcWeights,
    schedule: DiffusionSchedule,
    predictor: TinyUnet,
    occlusion: OcclusionNet,
}

impl Codec {
    pub fn new(settings: CodecSettings) -> Result<Self> {
        let rate = RateParam::new(settings.lambda)?;
        if settings.inv_steps > settings.steps {
            return Err(Error::InvalidConfig(format!(
                "inversion steps {} exceed denoising steps {}",
                settings.inv_steps, settings.steps
            )));
        }
        let transform = LatentTransform::new(settings.channels, settings.seed)?;
        let weights = StvcWeights::new(settings.channels, settings.seed)?;
        let schedule = build_schedule(settings.steps, DEFAULT_BASE_STEPS)?;
        let predictor = TinyUnet::new(settings.channels, settings.seed)?;
        let occlusion = OcclusionNet::new(settings.channels, settings.seed).with_mode(settings.occlusion);
        Ok(Self {
            settings,
            rate,
            transform,
            weights,
            schedule,
            predictor,
            occlusion,
        })
    }

    pub fn settings(&self) -> &CodecSettings {
        &self.settings
    }

    pub fn rate(&self) -> RateParam {
        self.rate
    }

    pub fn transform(&self) -> &LatentTransform {
        &self.transform
    }

    pub fn weights(&self) -> &StvcWeights {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut StvcWeights {
        &mut self.weights
    }

    pub fn schedule(&self) -> &DiffusionSchedule {
        &self.schedule
    }

    pub fn predictor(&self) -> &TinyUnet {
        &self.predictor
    }

    pub fn occlusion(&self) -> &OcclusionNet {
        &self.occlusion
    }

    pub fn occlusion_mut(&mut self) -> &mut OcclusionNet {
        &mut self.occlusion
    }

    pub fn set_inv_steps(&mut self, inv_steps: usize) -> Result<()> {
        if inv_steps > self.settings.steps {
            return Err(Error::InvalidConfig(format!(
                "inversion steps {inv_steps} exceed denoising steps {}",
                self.settings.steps
            )));
        }
        self.settings.inv_steps = inv_steps;
        Ok(())
    }

    /// Reference latent of `entry`: none for I, the past frame for P, the
    /// occlusion-weighted fusion of both neighbours for B.
    pub fn reference(&self, buffer: &FeatureBuffer, entry: &ScheduleEntry) -> Result<Option<LatentFeature>> {
        let d = entry.display_index;
        match entry.frame_type {
            FrameType::I => Ok(None),
            FrameType::P => {
                let past = entry.past_ref.ok_or_else(|| Error::InvalidGop(format!("P frame {d} has no reference")))?;
                Ok(Some(buffer.fetch(past, d)?.clone()))
            }
            FrameType::B => {
                let (past, future) = entry
                    .past_ref
                    .zip(entry.future_ref)
                    .ok_or_else(|| Error::InvalidGop(format!("B frame {d} lacks a reference")))?;
                let prev = buffer.fetch(past, d)?;
                let next = buffer.fetch(future, d)?;
                let o = occlusion_estimate(prev, next, &self.occlusion)?;
                Ok(Some(fuse_references(prev, next, &o)?))
            }
        }
    }

    fn latent_hw(&self, height: usize, width: usize) -> (usize, usize) {
        let (_, h, w) = self.transform.latent_dims(height, width);
        (h, w)
    }

    fn reconstruct(
        &self,
        symbols: &stvc::QuantizedSymbols,
        reference: Option<LatentFeature>,
        entry: &ScheduleEntry,
        hw: (usize, usize),
    ) -> Result<FrameReconstruction> {
        let (y_hat, mask) = stvc::decode_feature(symbols, reference.as_ref(), hw, self.rate, &self.weights)?;
        let (t_full, t_inv) = (self.settings.steps, self.settings.inv_steps);
        let denoised = match &reference {
            None => {
                let noise = diffusion::seeded_noise(y_hat.dims(), self.settings.seed, entry.display_index as u64);
                diffusion::denoise_from(&noise, t_full, Some(&y_hat), &self.schedule, &self.predictor)?
            }
            Some(r) => {
                let start = diffusion::invert(r, &mask, t_inv, &self.schedule, &self.predictor)?;
                let from = match self.settings.start_policy {
                    StartPolicy::Consistent => t_inv,
                    StartPolicy::Literal => t_full,
                };
                diffusion::denoise_from(&start, from, Some(&y_hat), &self.schedule, &self.predictor)?
            }
        };
        let frame = self.transform.from_latent(&denoised)?;
        Ok(FrameReconstruction {
            display_index: entry.display_index,
            frame_type: entry.frame_type,
            frame,
            latent: y_hat,
            denoised,
            mask,
            reference,
        })
    }

    /// Codes one frame and inserts its reconstruction into `buffer`.
    pub fn compress_frame(&self, x: &Frame, buffer: &mut FeatureBuffer, entry: &ScheduleEntry) -> Result<EncodedFrame> {
        let y = self.transform.to_latent(x)?;
        let reference = self.reference(buffer, entry)?;
        let hw = (y.height(), y.width());
        let (symbols, _) = stvc::encode_feature(&y, reference.as_ref(), self.rate, &self.weights)?;
        let dist = context_params(reference.as_ref(), hw, self.rate, &self.weights)?;
        let payload = range_encode(symbols.data(), &dist)?;
        let estimated_bits = estimate_rate(symbols.data(), &dist)?;
        let recon = self.reconstruct(&symbols, reference, entry, hw)?;
        buffer.insert(entry.display_index, recon.latent.clone());
        Ok(EncodedFrame {
            payload,
            estimated_bits,
            saturated: symbols.saturated(),
            recon,
        })
    }

    /// Decodes one frame of `height × width` pixels and inserts its
    /// reconstruction into `buffer`.
    pub fn decompress_frame(
        &self,
        payload: &Bitpayload,
        buffer: &mut FeatureBuffer,
        entry: &ScheduleEntry,
        height: usize,
        width: usize,
    ) -> Result<FrameReconstruction> {
        let hw = self.latent_hw(height, width);
        let reference = self.reference(buffer, entry)?;
        let dist = context_params(reference.as_ref(), hw, self.rate, &self.weights)?;
        let dims = stvc::bottleneck_dims((self.settings.channels, hw.0, hw.1));
        let data = range_decode(payload, &dist, dims.0 * dims.1 * dims.2)?;
        let symbols = stvc::QuantizedSymbols::from_vec(dims, data)?;
        let recon = self.reconstruct(&symbols, reference, entry, hw)?;
        buffer.insert(entry.display_index, recon.latent.clone());
        Ok(recon)
    }

    pub fn encode_sequence(&self, frames: &[Frame], gop: &GopConfig) -> Result<EncodedSequence> {
        let first = frames.first().ok_or_else(|| Error::InvalidFrame("empty frame sequence".into()))?;
        for f in frames {
            f.ensure_same_dims(first)?;
        }
        let mut records = Vec::with_capacity(frames.len());
        let mut recon: Vec<Option<FrameReconstruction>> = vec![None; frames.len()];
        for sched in sequence_schedule(gop, frames.len())? {
            let mut buffer = FeatureBuffer::new();
            for entry in sched.entries() {
                let enc = self.compress_frame(&frames[entry.display_index], &mut buffer, entry)?;
                records.push(EncodedRecord {
                    display_index: entry.display_index,
                    frame_type: entry.frame_type,
                    payload: enc.payload,
                    estimated_bits: enc.estimated_bits,
                    saturated: enc.saturated,
                });
                recon[entry.display_index] = Some(enc.recon);
            }
        }
        Ok(EncodedSequence {
            records,
            recon: recon.into_iter().map(|r| r.expect("every frame scheduled")).collect(),
        })
    }

    /// Decodes payloads given in coding order; returns reconstructions in
    /// display order. A frame-type mismatch with the schedule is a format
    /// error.
    pub fn decode_sequence(
        &self,
        payloads: &[(FrameType, Bitpayload)],
        gop: &GopConfig,
        height: usize,
        width: usize,
    ) -> Result<Vec<FrameReconstruction>> {
        let mut out: Vec<Option<FrameReconstruction>> = vec![None; payloads.len()];
        let mut k = 0;
        for sched in sequence_schedule(gop, payloads.len())? {
            let mut buffer = FeatureBuffer::new();
            for entry in sched.entries() {
                let (t, payload) = &payloads[k];
                if *t != entry.frame_type {
                    return Err(Error::Format(format!(
                        "record {k} is a {t} frame but the schedule expects {}",
                        entry.frame_type
                    )));
                }
                let r = self
                    .decompress_frame(payload, &mut buffer, entry, height, width)
                    .map_err(|e| match e {
                        Error::TruncatedPayload { .. } => Error::TruncatedStream { frame_index: k },
                        other => other,
                    })?;
                out[entry.display_index] = Some(r);
                k += 1;
            }
        }
        Ok(out.into_iter().map(|r| r.expect("every frame scheduled")).collect())
    }
}
