//! Occlusion weights and convex fusion of bi-directional references.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::{depthwise3x3, sigmoid, LatentFeature};

pub const DEFAULT_SHARPNESS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcclusionMode {
    /// `σ(k · conv(concat(prev, next)))` with opposite per-channel kernels
    /// on the two halves, so equal inputs give exactly 0.5.
    Learned,
    /// `σ(k · (|∇next| - |∇prev|))`.
    Gradient,
    /// Constant 0.5; plain averaging.
    Average,
}

impl OcclusionMode {
    pub const ALL: [OcclusionMode; 3] = [Self::Learned, Self::Gradient, Self::Average];

    pub fn code(self) -> u8 {
        match self {
            Self::Learned => 0,
            Self::Gradient => 1,
            Self::Average => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.code() == code)
            .ok_or_else(|| Error::Format(format!("unknown occlusion mode code {code}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Learned => "learned",
            Self::Gradient => "gradient",
            Self::Average => "average",
        }
    }
}

impl std::fmt::Display for OcclusionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OcclusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "learned" => Ok(Self::Learned),
            "gradient" => Ok(Self::Gradient),
            "average" => Ok(Self::Average),
            _ => Err(Error::InvalidConfig(format!("unknown occlusion mode {s:?}"))),
        }
    }
}

/// Per-element blend weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionMap(LatentFeature);

impl OcclusionMap {
    pub fn new(data: LatentFeature) -> Result<Self> {
        if data.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig("occlusion values must lie in [0, 1]".into()));
        }
        Ok(Self(data))
    }

    pub fn filled(dims: crate::Dims, value: f64) -> Self {
        assert!((0.0..=1.0).contains(&value));
        Self(LatentFeature::filled(dims, value))
    }

    pub fn feature(&self) -> &LatentFeature {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionNet {
    pub mode: OcclusionMode,
    pub sharpness: f64,
    kernels: Vec<[f64; 9]>,
}

impl OcclusionNet {
    pub fn new(channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4f43_434c);
        let n = Normal::new(0.0, 1.0 / 3.0).unwrap();
        let kernels = (0..channels)
            .map(|_| {
                let mut k = [0.0; 9];
                k.iter_mut().for_each(|v| *v = n.sample(&mut rng));
                k
            })
            .collect();
        Self {
            mode: OcclusionMode::Learned,
            sharpness: DEFAULT_SHARPNESS,
            kernels,
        }
    }

    pub fn with_mode(mut self, mode: OcclusionMode) -> Self {
        self.mode = mode;
        self
    }
}

fn gradient_magnitude(f: &LatentFeature) -> LatentFeature {
    let (_, h, w) = f.dims();
    LatentFeature::from_fn(f.dims(), |c, y, x| {
        let at = |yy: usize, xx: usize| f.get(c, yy.min(h - 1), xx.min(w - 1));
        let gx = at(y, x + 1) - at(y, x.saturating_sub(1));
        let gy = at(y + 1, x) - at(y.saturating_sub(1), x);
        libm::sqrt(gx * gx + gy * gy)
    })
}

pub fn occlusion_estimate(prev: &LatentFeature, next: &LatentFeature, net: &OcclusionNet) -> Result<OcclusionMap> {
    prev.ensure_same_dims(next)?;
    let k = net.sharpness;
    let logits = match net.mode {
        OcclusionMode::Average => return Ok(OcclusionMap::filled(prev.dims(), 0.5)),
        OcclusionMode::Learned => {
            if net.kernels.len() != prev.channels() {
                return Err(Error::ChannelMismatch {
                    expected: net.kernels.len(),
                    actual: prev.channels(),
                });
            }
            depthwise3x3(&prev.sub(next)?, &net.kernels)
        }
        OcclusionMode::Gradient => gradient_magnitude(next).sub(&gradient_magnitude(prev))?,
    };
    Ok(OcclusionMap(logits.map(|v| sigmoid(k * v))))
}

/// `O ⊙ prev + (1 - O) ⊙ next`, clamped to the elementwise hull of the two
/// inputs so rounding can never leave it.
pub fn fuse_references(prev: &LatentFeature, next: &LatentFeature, o: &OcclusionMap) -> Result<LatentFeature> {
    prev.ensure_same_dims(next)?;
    o.0.ensure_same_dims(prev)?;
    let mut out = prev.clone();
    for ((v, &n), &w) in out.data_mut().iter_mut().zip(next.data()).zip(o.0.data()) {
        let p = *v;
        *v = (w * p + (1.0 - w) * n).clamp(p.min(n), p.max(n));
    }
    Ok(out)
}
