//! Conditional Gaussian prior over the bottleneck symbols.
//!
//! Intra: zero mean, one scale per channel derived from the nominal spread
//! of the latent band the channel descends from and the nominal codec gain.
//! Inter: the mean is the quantised analysis of the reference, i.e. the
//! symbols the reference itself would produce; the scale is a floor plus a
//! multiple of the local texture of that mean.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::entropy::SymbolDistribution;
use crate::error::Result;
use crate::latent::basis_layout;
use crate::stvc::{self, RateParam, StvcWeights, ALPHABET_BOUND};
use crate::tensor::{depthwise3x3, LatentFeature};

pub const DEFAULT_INTRA_SCALE: f64 = 1.0;
pub const DEFAULT_INTER_FLOOR: f64 = 0.5;
pub const DEFAULT_INTER_SCALE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct PriorParams {
    pub intra_scale: f64,
    pub inter_floor: f64,
    pub inter_scale: f64,
    /// Zero-sum 3×3 texture kernel per bottleneck channel.
    pub texture: Vec<[f64; 9]>,
}

impl PriorParams {
    pub(crate) fn seeded(channels: usize, rng: &mut ChaCha8Rng) -> Self {
        let n = Normal::new(0.0, 1.0).unwrap();
        let texture = (0..channels)
            .map(|_| {
                let mut k = [0.0; 9];
                k.iter_mut().for_each(|v| *v = n.sample(rng));
                let mean = k.iter().sum::<f64>() / 9.0;
                k.iter_mut().for_each(|v| *v -= mean);
                let l1: f64 = k.iter().map(|v| v.abs()).sum();
                let scale = rng.random_range(0.5..1.0) / l1;
                k.iter_mut().for_each(|v| *v *= scale);
                k
            })
            .collect();
        Self {
            intra_scale: DEFAULT_INTRA_SCALE,
            inter_floor: DEFAULT_INTER_FLOOR,
            inter_scale: DEFAULT_INTER_SCALE,
            texture,
        }
    }

    pub(crate) fn flatten(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&[self.intra_scale, self.inter_floor, self.inter_scale]);
        for k in &self.texture {
            out.extend_from_slice(k);
        }
    }

    pub(crate) fn unflatten(&mut self, src: &mut impl Iterator<Item = f64>) -> Option<()> {
        self.intra_scale = src.next()?;
        self.inter_floor = src.next()?;
        self.inter_scale = src.next()?;
        for k in &mut self.texture {
            for v in k.iter_mut() {
                *v = src.next()?;
            }
        }
        Some(())
    }
}

/// Symbol distribution for a frame whose latent has spatial size
/// `latent_hw`, conditioned on `reference` when present.
pub fn context_params(
    reference: Option<&LatentFeature>,
    latent_hw: (usize, usize),
    rate: RateParam,
    w: &StvcWeights,
) -> Result<SymbolDistribution> {
    let dims = stvc::bottleneck_dims((w.channels(), latent_hw.0, latent_hw.1));
    let p = &w.prior;
    let (means, scales) = match reference {
        None => {
            let bands = basis_layout(w.channels());
            let g = stvc::nominal_gain(w, rate);
            let plane = dims.1 * dims.2;
            let mut scales = Vec::with_capacity(dims.0 * plane);
            for ch in 0..dims.0 {
                let band = bands.get(ch / 16).copied().unwrap_or(bands[bands.len() - 1]);
                let s = p.intra_scale * g * band.nominal_std();
                scales.extend(std::iter::repeat_n(s, plane));
            }
            (vec![0.0; scales.len()], scales)
        }
        Some(r) => {
            r.ensure_dims((w.channels(), latent_hw.0, latent_hw.1))?;
            let (f, _) = stvc::analysis(r, None, rate, w)?;
            let mu = stvc::quantize(&f).to_feature();
            let texture = depthwise3x3(&mu, &p.texture);
            let scales = texture.data().iter().map(|t| p.inter_floor + p.inter_scale * t.abs()).collect();
            (mu.into_vec(), scales)
        }
    };
    Ok(SymbolDistribution::new(ALPHABET_BOUND, means, scales))
}
