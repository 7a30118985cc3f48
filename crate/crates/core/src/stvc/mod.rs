//! Conditional variable-rate codec: four analysis stages, each a
//! channel-mixing transform followed by a guidance unit (mask, attention,
//! λ-dependent gain), a rounding quantiser, and the mirrored synthesis.
//!
//! The same weights and code path serve intra coding (no reference; the
//! mask sees only the target) and inter coding (the mask also sees the
//! reference propagated through the stage transforms). The synthesis
//! inverts each guidance unit by fixed-point iteration, so the decoder
//! never needs the encoder-side mask.

mod weights;

pub use weights::{
    GainMlp, MaskUnit, Rotation, StguParams, StvcWeights, ATTENTION_L1, DEFAULT_GAMMA, GAIN_HIDDEN, MASK_HIDDEN,
    NOMINAL_PEAK_GAIN, STAGES,
};

use crate::error::{Dims, Error, Result};
use crate::tensor::{accumulate_conv3x3, depth_to_space, depthwise3x3, sigmoid, space_to_depth, LatentFeature};

/// Symbols are clamped to `[-ALPHABET_BOUND, ALPHABET_BOUND]`.
pub const ALPHABET_BOUND: i32 = 127;
pub const LAMBDA_MIN: f64 = 8.0;
pub const LAMBDA_MAX: f64 = 512.0;
/// Fixed-point iterations per guidance unit in the synthesis.
pub const INVERSION_ITERATIONS: usize = 12;
/// Spatial reduction between latent and bottleneck.
pub const BOTTLENECK_FACTOR: usize = 4;

/// Rate-distortion trade-off λ, restricted to `[8, 512]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RateParam(f64);

impl RateParam {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(LAMBDA_MIN..=LAMBDA_MAX).contains(&lambda) {
            return Err(Error::InvalidRate(lambda));
        }
        Ok(Self(lambda))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 + ln(λ/512)/ln 64`, mapping `[8, 512]` onto `[0, 1]`.
    pub fn level(self) -> f64 {
        1.0 + libm::log(self.0 / LAMBDA_MAX) / libm::log(LAMBDA_MAX / LAMBDA_MIN)
    }
}

/// Per-element weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceMask(LatentFeature);

impl ImportanceMask {
    pub fn new(data: LatentFeature) -> Result<Self> {
        if data.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig("importance mask values must lie in [0, 1]".into()));
        }
        Ok(Self(data))
    }

    pub fn filled(dims: Dims, value: f64) -> Self {
        assert!((0.0..=1.0).contains(&value));
        Self(LatentFeature::filled(dims, value))
    }

    pub fn feature(&self) -> &LatentFeature {
        &self.0
    }

    pub fn dims(&self) -> Dims {
        self.0.dims()
    }

    pub fn into_feature(self) -> LatentFeature {
        self.0
    }
}

/// Integer bottleneck tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedSymbols {
    dims: Dims,
    data: Vec<i32>,
    saturated: usize,
}

impl QuantizedSymbols {
    pub fn from_vec(dims: Dims, data: Vec<i32>) -> Result<Self> {
        if data.len() != dims.0 * dims.1 * dims.2 {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: (data.len(), 1, 1),
            });
        }
        if let Some(&v) = data.iter().find(|v| v.abs() > ALPHABET_BOUND) {
            return Err(Error::SymbolOutOfAlphabet {
                value: v,
                min: -ALPHABET_BOUND,
                max: ALPHABET_BOUND,
            });
        }
        Ok(Self { dims, data, saturated: 0 })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Number of values clamped into the alphabet by [`quantize`].
    pub fn saturated(&self) -> usize {
        self.saturated
    }

    pub fn to_feature(&self) -> LatentFeature {
        let (c, h, w) = self.dims;
        LatentFeature::from_vec(c, h, w, self.data.iter().map(|&v| v as f64).collect()).expect("finite by construction")
    }
}

/// Rounds half away from zero and clamps to the alphabet, counting clamps.
pub fn quantize(x: &LatentFeature) -> QuantizedSymbols {
    let bound = ALPHABET_BOUND as f64;
    let mut saturated = 0;
    let data = x
        .data()
        .iter()
        .map(|&v| {
            let r = libm::round(v);
            if r.abs() > bound {
                saturated += 1;
            }
            r.clamp(-bound, bound) as i32
        })
        .collect();
    QuantizedSymbols {
        dims: x.dims(),
        data,
        saturated,
    }
}

/// Bottleneck dims for a latent of dims `(c, h, w)`.
pub fn bottleneck_dims(latent: Dims) -> Dims {
    let (c, h, w) = latent;
    (16 * c, h.div_ceil(BOTTLENECK_FACTOR), w.div_ceil(BOTTLENECK_FACTOR))
}

/// `(λ/512)^γ` times the learned part.
pub fn stage_gain(p: &StguParams, omega: f64, rate: RateParam, gamma: f64) -> f64 {
    p.gain.eval(omega, rate.level()) * libm::pow(rate.value() / LAMBDA_MAX, gamma)
}

/// Product of the four stage gains at ω = 0.5.
pub fn nominal_gain(w: &StvcWeights, rate: RateParam) -> f64 {
    w.stages().iter().map(|p| stage_gain(p, 0.5, rate, w.gamma)).product()
}

fn check_stage_input(p: &StguParams, f: &LatentFeature, reference: Option<&LatentFeature>) -> Result<()> {
    if f.channels() != p.channels {
        return Err(Error::ChannelMismatch {
            expected: p.channels,
            actual: f.channels(),
        });
    }
    if let Some(r) = reference {
        r.ensure_same_dims(f)?;
    }
    Ok(())
}

/// Mask head: per channel, two ReLU units over 3×3 views of target and
/// reference, combined linearly and squashed by a sigmoid.
pub fn stage_mask(p: &StguParams, f: &LatentFeature, reference: &LatentFeature) -> ImportanceMask {
    let (c, h, w) = f.dims();
    let n = h * w;
    let mut out = LatentFeature::zeros(c, h, w);
    let mut hidden = vec![0.0; n];
    for ch in 0..c {
        let u = &p.mask[ch];
        let acc = out.plane_mut(ch);
        acc.iter_mut().for_each(|v| *v = u.bias);
        for j in 0..MASK_HIDDEN {
            hidden.iter_mut().for_each(|v| *v = 0.0);
            accumulate_conv3x3(f.plane(ch), h, w, &u.target[j], &mut hidden);
            accumulate_conv3x3(reference.plane(ch), h, w, &u.reference[j], &mut hidden);
            for (a, &hv) in acc.iter_mut().zip(&hidden) {
                *a += u.out[j] * hv.max(0.0);
            }
        }
        acc.iter_mut().for_each(|v| *v = sigmoid(*v));
    }
    ImportanceMask(out)
}

/// Guidance unit with an externally supplied mask:
/// `gain(ω, λ) · (f + ω ⊙ K(f))`.
pub fn stgu_apply(
    p: &StguParams,
    f: &LatentFeature,
    omega: &ImportanceMask,
    rate: RateParam,
    gamma: f64,
) -> Result<LatentFeature> {
    omega.0.ensure_same_dims(f)?;
    let attended = depthwise3x3(f, &p.attention);
    let mut out = f.clone();
    for ((o, &a), &m) in out.data_mut().iter_mut().zip(attended.data()).zip(omega.0.data()) {
        *o = stage_gain(p, m, rate, gamma) * (*o + m * a);
    }
    Ok(out)
}

/// Guidance unit: mask from `(f, reference)`, or from `f` alone when
/// `reference` is `None`, then [`stgu_apply`].
pub fn stgu_forward(
    p: &StguParams,
    f: &LatentFeature,
    reference: Option<&LatentFeature>,
    rate: RateParam,
    gamma: f64,
) -> Result<(LatentFeature, ImportanceMask)> {
    check_stage_input(p, f, reference)?;
    let omega = stage_mask(p, f, reference.unwrap_or(f));
    let out = stgu_apply(p, f, &omega, rate, gamma)?;
    Ok((out, omega))
}

/// Recovers `f` from `gain(ω(f)) · (f + ω(f) ⊙ K(f))` by fixed-point
/// iteration.
pub fn stgu_invert(
    p: &StguParams,
    x: &LatentFeature,
    reference: Option<&LatentFeature>,
    rate: RateParam,
    gamma: f64,
) -> Result<LatentFeature> {
    check_stage_input(p, x, reference)?;
    let mut f = LatentFeature::from_fn(x.dims(), |c, y, xx| {
        x.get(c, y, xx) / stage_gain(p, sigmoid(p.mask[c].bias), rate, gamma)
    });
    for _ in 0..INVERSION_ITERATIONS {
        let omega = stage_mask(p, &f, reference.unwrap_or(&f));
        let attended = depthwise3x3(&f, &p.attention);
        for (((o, &xv), &a), &m) in f.data_mut().iter_mut().zip(x.data()).zip(attended.data()).zip(omega.0.data()) {
            *o = xv / stage_gain(p, m, rate, gamma) - m * a;
        }
    }
    Ok(f)
}

fn stage_transform(p: &StguParams, f: &LatentFeature) -> LatentFeature {
    if p.downsample {
        p.rotation.apply(&space_to_depth(f))
    } else {
        p.rotation.apply(f)
    }
}

fn stage_transform_inverse(p: &StguParams, f: &LatentFeature) -> LatentFeature {
    let r = p.rotation.apply_inverse(f);
    if p.downsample {
        depth_to_space(&r)
    } else {
        r
    }
}

fn padded(y: &LatentFeature) -> LatentFeature {
    let (h, w) = (y.height().next_multiple_of(BOTTLENECK_FACTOR), y.width().next_multiple_of(BOTTLENECK_FACTOR));
    y.pad_to(h, w)
}

fn check_latent(y: &LatentFeature, reference: Option<&LatentFeature>, w: &StvcWeights) -> Result<()> {
    if y.channels() != w.channels() {
        return Err(Error::ChannelMismatch {
            expected: w.channels(),
            actual: y.channels(),
        });
    }
    if let Some(r) = reference {
        r.ensure_same_dims(y)?;
    }
    Ok(())
}

/// Reference propagated through the stage transforms only, one tensor per
/// stage.
fn reference_chain(reference: &LatentFeature, w: &StvcWeights) -> Vec<LatentFeature> {
    let mut r = padded(reference);
    w.stages()
        .iter()
        .map(|p| {
            r = stage_transform(p, &r);
            r.clone()
        })
        .collect()
}

/// Analysis stack before rounding. Returns the bottleneck feature and the
/// first-stage mask cropped to latent dims.
pub fn analysis(
    y: &LatentFeature,
    reference: Option<&LatentFeature>,
    rate: RateParam,
    w: &StvcWeights,
) -> Result<(LatentFeature, ImportanceMask)> {
    check_latent(y, reference, w)?;
    let refs = reference.map(|r| reference_chain(r, w));
    let mut f = padded(y);
    let mut first_mask = None;
    for (k, p) in w.stages().iter().enumerate() {
        f = stage_transform(p, &f);
        let (out, omega) = stgu_forward(p, &f, refs.as_ref().map(|r| &r[k]), rate, w.gamma)?;
        if k == 0 {
            first_mask = Some(omega);
        }
        f = out;
    }
    let mask = first_mask.expect("four stages").0.crop_to(y.height(), y.width());
    Ok((f, ImportanceMask(mask)))
}

/// Synthesis stack: inverts each stage from the bottleneck back to a latent
/// of spatial size `(height, width)`.
pub fn synthesis(
    x: &LatentFeature,
    reference: Option<&LatentFeature>,
    latent_hw: (usize, usize),
    rate: RateParam,
    w: &StvcWeights,
) -> Result<LatentFeature> {
    let expected = bottleneck_dims((w.channels(), latent_hw.0, latent_hw.1));
    x.ensure_dims(expected)?;
    if let Some(r) = reference {
        r.ensure_dims((w.channels(), latent_hw.0, latent_hw.1))?;
    }
    let refs = reference.map(|r| reference_chain(r, w));
    let mut f = x.clone();
    for (k, p) in w.stages().iter().enumerate().rev() {
        f = stgu_invert(p, &f, refs.as_ref().map(|r| &r[k]), rate, w.gamma)?;
        f = stage_transform_inverse(p, &f);
    }
    Ok(f.crop_to(latent_hw.0, latent_hw.1))
}

/// Decoder-side mask: the first-stage mask head applied to the
/// reconstruction and the reference (or the reconstruction alone).
pub fn decoder_mask(y_hat: &LatentFeature, reference: Option<&LatentFeature>, w: &StvcWeights) -> Result<ImportanceMask> {
    check_latent(y_hat, reference, w)?;
    let p = w.stage(0);
    let f = stage_transform(p, y_hat);
    let r = reference.map(|r| stage_transform(p, r));
    Ok(stage_mask(p, &f, r.as_ref().unwrap_or(&f)))
}

/// Quantised analysis of `y` conditioned on `reference`, together with the
/// encoder-side first-stage mask.
pub fn encode_feature(
    y: &LatentFeature,
    reference: Option<&LatentFeature>,
    rate: RateParam,
    w: &StvcWeights,
) -> Result<(QuantizedSymbols, ImportanceMask)> {
    let (f, omega) = analysis(y, reference, rate, w)?;
    Ok((quantize(&f), omega))
}

/// Reconstruction from symbols plus the decoder-side mask.
pub fn decode_feature(
    symbols: &QuantizedSymbols,
    reference: Option<&LatentFeature>,
    latent_hw: (usize, usize),
    rate: RateParam,
    w: &StvcWeights,
) -> Result<(LatentFeature, ImportanceMask)> {
    if let Some(&v) = symbols.data.iter().find(|v| v.abs() > ALPHABET_BOUND) {
        return Err(Error::SymbolOutOfAlphabet {
            value: v,
            min: -ALPHABET_BOUND,
            max: ALPHABET_BOUND,
        });
    }
    let y_hat = synthesis(&symbols.to_feature(), reference, latent_hw, rate, w)?;
    let mask = decoder_mask(&y_hat, reference, w)?;
    Ok((y_hat, mask))
}
