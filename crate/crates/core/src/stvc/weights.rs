//! Seeded parameters of the four-stage variable-rate codec and their
//! snapshot file.
//!
//! Snapshot layout (little-endian): magic `I2SW`, version u8, seed u64,
//! latent channels u32, parameter count u64, then that many f64 values in
//! the order produced by [`StvcWeights::flatten`]. Rotation pair indices
//! are not stored; they are regenerated from the seed and channel count.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::entropy::PriorParams;
use crate::error::{Error, Result};
use crate::tensor::{softplus, softplus_inverse, LatentFeature};

pub const STAGES: usize = 4;
pub const MASK_HIDDEN: usize = 2;
pub const GAIN_HIDDEN: usize = 4;
/// Total gain of the four stages at λ = 512 and ω = 0.5.
pub const NOMINAL_PEAK_GAIN: f64 = 8.0;
pub const DEFAULT_GAMMA: f64 = 1.0 / 6.0;
/// L1 bound on each attention kernel.
pub const ATTENTION_L1: f64 = 0.3;

const SNAPSHOT_MAGIC: &[u8; 4] = b"I2SW";
const SNAPSHOT_VERSION: u8 = 1;

/// Sequence of Givens rotations over channel pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    pairs: Vec<(usize, usize)>,
    angles: Vec<f64>,
}

impl Rotation {
    fn seeded(channels: usize, rng: &mut ChaCha8Rng) -> Self {
        if channels < 2 {
            return Self {
                pairs: Vec::new(),
                angles: Vec::new(),
            };
        }
        let normal = Normal::new(0.0, 0.1).unwrap();
        let mut pairs = Vec::with_capacity(2 * channels);
        let mut angles = Vec::with_capacity(2 * channels);
        for _ in 0..2 * channels {
            let ij = sample(rng, channels, 2);
            pairs.push((ij.index(0), ij.index(1)));
            angles.push(normal.sample(rng));
        }
        Self { pairs, angles }
    }

    fn rotate(f: &mut LatentFeature, i: usize, j: usize, angle: f64) {
        let (c, s) = (libm::cos(angle), libm::sin(angle));
        let n = f.plane_len();
        let data = f.data_mut();
        for k in 0..n {
            let a = data[i * n + k];
            let b = data[j * n + k];
            data[i * n + k] = c * a - s * b;
            data[j * n + k] = s * a + c * b;
        }
    }

    pub fn apply(&self, f: &LatentFeature) -> LatentFeature {
        let mut out = f.clone();
        for (&(i, j), &a) in self.pairs.iter().zip(&self.angles) {
            Self::rotate(&mut out, i, j, a);
        }
        out
    }

    pub fn apply_inverse(&self, f: &LatentFeature) -> LatentFeature {
        let mut out = f.clone();
        for (&(i, j), &a) in self.pairs.iter().zip(&self.angles).rev() {
            Self::rotate(&mut out, i, j, -a);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Depthwise mask head of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskUnit {
    pub target: [[f64; 9]; MASK_HIDDEN],
    pub reference: [[f64; 9]; MASK_HIDDEN],
    pub out: [f64; MASK_HIDDEN],
    pub bias: f64,
}

/// Scalar λ-gain network `softplus(d + Σ v_j relu(a_j ω + b_j ℓ + c_j))`.
/// `b_j ≥ 0` and `v_j ≥ 0` make it non-decreasing in the log-rate `ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMlp {
    pub a: [f64; GAIN_HIDDEN],
    pub b: [f64; GAIN_HIDDEN],
    pub c: [f64; GAIN_HIDDEN],
    pub v: [f64; GAIN_HIDDEN],
    pub d: f64,
}

impl GainMlp {
    fn hidden(&self, omega: f64, level: f64) -> f64 {
        (0..GAIN_HIDDEN)
            .map(|j| self.v[j] * (self.a[j] * omega + self.b[j] * level + self.c[j]).max(0.0))
            .sum()
    }

    /// `softplus` part of the gain; the `(λ/512)^γ` factor is applied by the
    /// caller.
    pub fn eval(&self, omega: f64, level: f64) -> f64 {
        softplus(self.d + self.hidden(omega, level))
    }

    fn seeded(rng: &mut ChaCha8Rng, target: f64) -> Self {
        let n = Normal::new(0.0, 0.5).unwrap();
        let mut g = Self {
            a: [0.0; GAIN_HIDDEN],
            b: [0.0; GAIN_HIDDEN],
            c: [0.0; GAIN_HIDDEN],
            v: [0.0; GAIN_HIDDEN],
            d: 0.0,
        };
        for j in 0..GAIN_HIDDEN {
            g.a[j] = n.sample(rng);
            g.b[j] = n.sample(rng).abs();
            g.c[j] = n.sample(rng);
            g.v[j] = 0.5 * n.sample(rng).abs();
        }
        g.d = softplus_inverse(target) - g.hidden(0.5, 1.0);
        g
    }
}

/// Parameters of one analysis stage: channel rotation, mask head,
/// attention kernels and gain network.
#[derive(Debug, Clone, PartialEq)]
pub struct StguParams {
    pub downsample: bool,
    pub channels: usize,
    pub rotation: Rotation,
    pub mask: Vec<MaskUnit>,
    pub attention: Vec<[f64; 9]>,
    pub gain: GainMlp,
}

impl StguParams {
    fn seeded(channels: usize, downsample: bool, rng: &mut ChaCha8Rng) -> Self {
        let rotation = Rotation::seeded(channels, rng);
        let k = Normal::new(0.0, 0.2).unwrap();
        let v = Normal::new(0.0, 1.0).unwrap();
        let mask = (0..channels)
            .map(|_| {
                let mut u = MaskUnit {
                    target: [[0.0; 9]; MASK_HIDDEN],
                    reference: [[0.0; 9]; MASK_HIDDEN],
                    out: [0.0; MASK_HIDDEN],
                    bias: 0.0,
                };
                for j in 0..MASK_HIDDEN {
                    u.target[j].iter_mut().for_each(|w| *w = k.sample(rng));
                    u.reference[j].iter_mut().for_each(|w| *w = k.sample(rng));
                    u.out[j] = v.sample(rng);
                }
                u
            })
            .collect();
        let attention = (0..channels)
            .map(|_| {
                let mut w = [0.0; 9];
                w.iter_mut().for_each(|x| *x = v.sample(rng));
                let l1: f64 = w.iter().map(|x| x.abs()).sum();
                let budget = ATTENTION_L1 * rng.random_range(0.5..1.0);
                w.iter_mut().for_each(|x| *x *= budget / l1);
                w
            })
            .collect();
        let gain = GainMlp::seeded(rng, libm::pow(NOMINAL_PEAK_GAIN, 1.0 / STAGES as f64));
        Self {
            downsample,
            channels,
            rotation,
            mask,
            attention,
            gain,
        }
    }

    fn flatten(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.rotation.angles);
        for u in &self.mask {
            for j in 0..MASK_HIDDEN {
                out.extend_from_slice(&u.target[j]);
                out.extend_from_slice(&u.reference[j]);
            }
            out.extend_from_slice(&u.out);
            out.push(u.bias);
        }
        for k in &self.attention {
            out.extend_from_slice(k);
        }
        let g = &self.gain;
        for arr in [&g.a, &g.b, &g.c, &g.v] {
            out.extend_from_slice(arr);
        }
        out.push(g.d);
    }

    fn unflatten(&mut self, src: &mut impl Iterator<Item = f64>) -> Option<()> {
        for a in &mut self.rotation.angles {
            *a = src.next()?;
        }
        for u in &mut self.mask {
            for j in 0..MASK_HIDDEN {
                for w in u.target[j].iter_mut().chain(u.reference[j].iter_mut()) {
                    *w = src.next()?;
                }
            }
            for w in &mut u.out {
                *w = src.next()?;
            }
            u.bias = src.next()?;
        }
        for k in &mut self.attention {
            for w in k.iter_mut() {
                *w = src.next()?;
            }
        }
        let g = &mut self.gain;
        for arr in [&mut g.a, &mut g.b, &mut g.c, &mut g.v] {
            for w in arr.iter_mut() {
                *w = src.next()?;
            }
        }
        g.d = src.next()?;
        Some(())
    }
}

/// Immutable weights of the codec, generated from a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct StvcWeights {
    seed: u64,
    channels: usize,
    stages: Vec<StguParams>,
    /// Exponent of the `(λ/512)^γ` gain factor.
    pub gamma: f64,
    pub prior: PriorParams,
}

impl StvcWeights {
    pub fn new(channels: usize, seed: u64) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidConfig("latent channel count must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5354_5643);
        let widths = [channels, 4 * channels, 4 * channels, 16 * channels];
        let stages = widths
            .iter()
            .enumerate()
            .map(|(k, &c)| StguParams::seeded(c, k % 2 == 1, &mut rng))
            .collect();
        let prior = PriorParams::seeded(16 * channels, &mut rng);
        Ok(Self {
            seed,
            channels,
            stages,
            gamma: DEFAULT_GAMMA,
            prior,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Latent channel count the weights were built for.
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn stages(&self) -> &[StguParams] {
        &self.stages
    }

    pub fn stage(&self, k: usize) -> &StguParams {
        &self.stages[k]
    }

    /// Flat parameter vector in snapshot order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for s in &self.stages {
            s.flatten(&mut out);
        }
        out.push(self.gamma);
        self.prior.flatten(&mut out);
        out
    }

    pub fn to_snapshot(&self) -> Vec<u8> {
        let params = self.flatten();
        let mut out = Vec::with_capacity(25 + 8 * params.len());
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.push(SNAPSHOT_VERSION);
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.channels as u32).to_le_bytes());
        out.extend_from_slice(&(params.len() as u64).to_le_bytes());
        for p in params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_snapshot(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 25 || &bytes[..4] != SNAPSHOT_MAGIC {
            return Err(Error::Format("not a codec weight snapshot".into()));
        }
        if bytes[4] != SNAPSHOT_VERSION {
            return Err(Error::Format(format!("unsupported snapshot version {}", bytes[4])));
        }
        let seed = u64::from_le_bytes(bytes[5..13].try_into().unwrap());
        let channels = u32::from_le_bytes(bytes[13..17].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(bytes[17..25].try_into().unwrap()) as usize;
        let payload = &bytes[25..];
        if payload.len() != 8 * count {
            return Err(Error::Format("snapshot payload length does not match its header".into()));
        }
        let mut w = Self::new(channels, seed)?;
        if w.flatten().len() != count {
            return Err(Error::Format("snapshot parameter count does not match its dimensions".into()));
        }
        let mut it = payload.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()));
        for s in &mut w.stages {
            s.unflatten(&mut it).expect("length checked");
        }
        w.gamma = it.next().expect("length checked");
        w.prior.unflatten(&mut it).expect("length checked");
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_stages_with_expected_widths() {
        let w = StvcWeights::new(3, 7).unwrap();
        let widths: Vec<usize> = w.stages().iter().map(|s| s.channels).collect();
        assert_eq!(widths, vec![3, 12, 12, 48]);
        assert_eq!(w.stages().iter().filter(|s| s.downsample).count(), 2);
    }

    #[test]
    fn rotation_inverse_is_exact() {
        let w = StvcWeights::new(4, 1).unwrap();
        let r = &w.stage(0).rotation;
        let f = LatentFeature::from_fn((4, 3, 5), |c, y, x| (c as f64 - 1.5) * (y as f64 + 0.3 * x as f64));
        let back = r.apply_inverse(&r.apply(&f));
        assert!(back.sub(&f).unwrap().max_abs() < 1e-12);
        assert!((r.apply(&f).norm_l2() - f.norm_l2()).abs() < 1e-9);
    }

    #[test]
    fn attention_kernels_respect_l1_bound() {
        let w = StvcWeights::new(6, 2).unwrap();
        for s in w.stages() {
            for k in &s.attention {
                assert!(k.iter().map(|x| x.abs()).sum::<f64>() <= ATTENTION_L1 + 1e-12);
            }
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let mut w = StvcWeights::new(2, 99).unwrap();
        w.gamma = 0.3;
        w.prior.inter_floor = 0.7;
        let back = StvcWeights::from_snapshot(&w.to_snapshot()).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn corrupt_snapshot_is_rejected() {
        let w = StvcWeights::new(2, 99).unwrap();
        let mut b = w.to_snapshot();
        b.truncate(b.len() - 3);
        assert!(StvcWeights::from_snapshot(&b).is_err());
        b[0] = b'X';
        assert!(StvcWeights::from_snapshot(&b).is_err());
    }
}
