//! Noise predictors.
//!
//! [`TinyUnet`] is a small seeded three-level U-shaped network over the
//! channel concatenation of the state and the condition (zeros when
//! unconditioned). Its output is scaled down to a small residual. When a
//! condition is present it is added to the analytic noise estimate that
//! treats the condition as the clean sample, `(y - √ᾱ·c) / √(1 - ᾱ)`.
//!
//! Snapshot layout (little-endian): magic `I2NP`, version u8, seed u64,
//! channels u32, three hidden widths u32, residual scale f64. Weights are
//! regenerated from the seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::{avg_pool2, conv3x3, upsample2, LatentFeature};

pub const UNET_WIDTHS: [usize; 3] = [8, 16, 16];
pub const DEFAULT_RESIDUAL_SCALE: f64 = 0.02;

const SNAPSHOT_MAGIC: &[u8; 4] = b"I2NP";
const SNAPSHOT_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLevel {
    pub step: usize,
    pub alpha_bar: f64,
}

pub trait NoisePredictor {
    /// Noise estimate for `state` at `level`, same dims as `state`.
    fn predict(&self, state: &LatentFeature, level: NoiseLevel, cond: Option<&LatentFeature>) -> Result<LatentFeature>;
}

/// Predicts zero noise everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPredictor;

impl NoisePredictor for ZeroPredictor {
    fn predict(&self, state: &LatentFeature, _level: NoiseLevel, cond: Option<&LatentFeature>) -> Result<LatentFeature> {
        if let Some(c) = cond {
            c.ensure_same_dims(state)?;
        }
        Ok(LatentFeature::zeros(state.channels(), state.height(), state.width()))
    }
}

#[derive(Debug, Clone)]
struct Conv {
    out: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Conv {
    fn seeded(cin: usize, out: usize, rng: &mut ChaCha8Rng) -> Self {
        let n = Normal::new(0.0, 1.0 / libm::sqrt((cin * 9) as f64)).unwrap();
        Self {
            out,
            weights: (0..out * cin * 9).map(|_| n.sample(rng)).collect(),
            bias: vec![0.0; out],
        }
    }

    fn apply(&self, x: &LatentFeature) -> LatentFeature {
        conv3x3(x, self.out, &self.weights, &self.bias)
    }
}

#[derive(Debug, Clone)]
pub struct TinyUnet {
    seed: u64,
    channels: usize,
    residual_scale: f64,
    enc0: Conv,
    enc1: Conv,
    enc2: Conv,
    dec1: Conv,
    dec0: Conv,
    head: Conv,
    time: Vec<f64>,
}

fn tanh_in_place(x: &mut LatentFeature) {
    x.data_mut().iter_mut().for_each(|v| *v = libm::tanh(*v));
}

impl TinyUnet {
    pub fn new(channels: usize, seed: u64) -> Result<Self> {
        Self::with_residual_scale(channels, seed, DEFAULT_RESIDUAL_SCALE)
    }

    pub fn with_residual_scale(channels: usize, seed: u64, residual_scale: f64) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidConfig("predictor channel count must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x554e_4554);
        let [w0, w1, w2] = UNET_WIDTHS;
        let enc0 = Conv::seeded(2 * channels, w0, &mut rng);
        let enc1 = Conv::seeded(w0, w1, &mut rng);
        let enc2 = Conv::seeded(w1, w2, &mut rng);
        let dec1 = Conv::seeded(w2 + w1, w1, &mut rng);
        let dec0 = Conv::seeded(w1 + w0, w0, &mut rng);
        let head = Conv::seeded(w0, channels, &mut rng);
        let n = Normal::new(0.0, 1.0).unwrap();
        let time = (0..w0).map(|_| n.sample(&mut rng)).collect();
        Ok(Self {
            seed,
            channels,
            residual_scale,
            enc0,
            enc1,
            enc2,
            dec1,
            dec0,
            head,
            time,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn residual_scale(&self) -> f64 {
        self.residual_scale
    }

    /// The network's own (residual) output, before any analytic term.
    pub fn residual(&self, state: &LatentFeature, level: NoiseLevel, cond: Option<&LatentFeature>) -> Result<LatentFeature> {
        if state.channels() != self.channels {
            return Err(Error::ChannelMismatch {
                expected: self.channels,
                actual: state.channels(),
            });
        }
        let zeros;
        let c = match cond {
            Some(c) => {
                c.ensure_same_dims(state)?;
                c
            }
            None => {
                zeros = LatentFeature::zeros(state.channels(), state.height(), state.width());
                &zeros
            }
        };
        let (h, w) = (state.height(), state.width());
        let input = state.concat(c)?;
        let noise = libm::sqrt((1.0 - level.alpha_bar).max(0.0));
        let mut h0 = self.enc0.apply(&input);
        for (ch, &tw) in self.time.iter().enumerate() {
            h0.plane_mut(ch).iter_mut().for_each(|v| *v += tw * noise);
        }
        tanh_in_place(&mut h0);
        let mut h1 = self.enc1.apply(&avg_pool2(&h0));
        tanh_in_place(&mut h1);
        let mut h2 = self.enc2.apply(&avg_pool2(&h1));
        tanh_in_place(&mut h2);
        let up1 = upsample2(&h2, h1.height(), h1.width());
        let mut d1 = self.dec1.apply(&up1.concat(&h1)?);
        tanh_in_place(&mut d1);
        let up0 = upsample2(&d1, h, w);
        let mut d0 = self.dec0.apply(&up0.concat(&h0)?);
        tanh_in_place(&mut d0);
        Ok(self.head.apply(&d0).scale(self.residual_scale))
    }

    pub fn to_snapshot(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(41);
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.push(SNAPSHOT_VERSION);
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.channels as u32).to_le_bytes());
        for w in UNET_WIDTHS {
            out.extend_from_slice(&(w as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.residual_scale.to_le_bytes());
        out
    }

    pub fn from_snapshot(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != 37 || &bytes[..4] != SNAPSHOT_MAGIC {
            return Err(Error::Format("not a predictor snapshot".into()));
        }
        if bytes[4] != SNAPSHOT_VERSION {
            return Err(Error::Format(format!("unsupported snapshot version {}", bytes[4])));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let seed = u64::from_le_bytes(bytes[5..13].try_into().unwrap());
        let channels = u32_at(13);
        let widths = [u32_at(17), u32_at(21), u32_at(25)];
        if widths != UNET_WIDTHS {
            return Err(Error::Format(format!("unsupported predictor widths {widths:?}")));
        }
        let scale = f64::from_le_bytes(bytes[29..37].try_into().unwrap());
        Self::with_residual_scale(channels, seed, scale)
    }
}

impl NoisePredictor for TinyUnet {
    fn predict(&self, state: &LatentFeature, level: NoiseLevel, cond: Option<&LatentFeature>) -> Result<LatentFeature> {
        let r = self.residual(state, level, cond)?;
        match cond {
            Some(c) if level.alpha_bar < 1.0 => {
                let sa = libm::sqrt(level.alpha_bar);
                let sn = libm::sqrt(1.0 - level.alpha_bar);
                let analytic = state.zip_map(c, |y, c| (y - sa * c) / sn);
                analytic.add(&r)
            }
            _ => Ok(r),
        }
    }
}
