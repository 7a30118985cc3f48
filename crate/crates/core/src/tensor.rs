//! Dense `channels × height × width` tensors and the handful of convolution
//! primitives the codec and the noise predictor are built from.

use crate::error::{Dims, Error, Result};

/// A real-valued `c × h × w` tensor in channel-major layout.
///
/// One type houses every latent-domain quantity: the transformed frame, the
/// decoded feature, the reference feature and the intermediate diffusion
/// states.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFeature {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl LatentFeature {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn filled(dims: Dims, value: f64) -> Self {
        let (c, h, w) = dims;
        Self {
            channels: c,
            height: h,
            width: w,
            data: vec![value; c * h * w],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::InvalidFrame(format!(
                "tensor payload has {} values, expected {}",
                data.len(),
                channels * height * width
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidFrame(format!("non-finite tensor value {v}")));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let (c, h, w) = dims;
        let mut data = Vec::with_capacity(c * h * w);
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    data.push(f(ch, y, x));
                }
            }
        }
        Self {
            channels: c,
            height: h,
            width: w,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> Dims {
        (self.channels, self.height, self.width)
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[channel * n..(channel + 1) * n]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn ensure_dims(&self, expected: Dims) -> Result<()> {
        if self.dims() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: self.dims(),
            });
        }
        Ok(())
    }

    pub fn ensure_same_dims(&self, other: &LatentFeature) -> Result<()> {
        other.ensure_dims(self.dims())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    /// Elementwise combination; callers guarantee matching dims.
    pub fn zip_map(&self, other: &LatentFeature, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.dims(), other.dims());
        Self {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            ..*self
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|v| v * k)
    }

    pub fn add(&self, other: &LatentFeature) -> Result<Self> {
        self.ensure_same_dims(other)?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &LatentFeature) -> Result<Self> {
        self.ensure_same_dims(other)?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.sum_squares().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Zero-pads the spatial extent up to `(height, width)`.
    pub fn pad_to(&self, height: usize, width: usize) -> Self {
        if height == self.height && width == self.width {
            return self.clone();
        }
        let mut out = LatentFeature::zeros(self.channels, height, width);
        for c in 0..self.channels {
            for y in 0..self.height {
                for x in 0..self.width {
                    out.set(c, y, x, self.get(c, y, x));
                }
            }
        }
        out
    }

    /// Keeps the top-left `(height, width)` window.
    pub fn crop_to(&self, height: usize, width: usize) -> Self {
        if height == self.height && width == self.width {
            return self.clone();
        }
        LatentFeature::from_fn((self.channels, height, width), |c, y, x| self.get(c, y, x))
    }

    /// Stacks `self` and `other` along the channel axis.
    pub fn concat(&self, other: &LatentFeature) -> Result<Self> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(Error::DimensionMismatch {
                expected: (other.channels, self.height, self.width),
                actual: other.dims(),
            });
        }
        let mut data = Vec::with_capacity(self.len() + other.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Self {
            channels: self.channels + other.channels,
            height: self.height,
            width: self.width,
            data,
        })
    }
}

impl Default for LatentFeature {
    fn default() -> Self {
        LatentFeature::zeros(0, 0, 0)
    }
}

/// 3×3 zero-padded correlation of a single plane, accumulated into `out`.
/// Runs one shifted multiply-add pass per tap over the valid window.
pub(crate) fn accumulate_conv3x3(input: &[f64], h: usize, w: usize, kernel: &[f64], out: &mut [f64]) {
    debug_assert_eq!(kernel.len(), 9);
    for ky in 0..3 {
        let (y0, y1) = (usize::from(ky == 0), if ky == 2 { h.saturating_sub(1) } else { h });
        for kx in 0..3 {
            let k = kernel[ky * 3 + kx];
            if k == 0.0 {
                continue;
            }
            let (x0, x1) = (usize::from(kx == 0), if kx == 2 { w.saturating_sub(1) } else { w });
            if x0 >= x1 {
                continue;
            }
            for y in y0..y1 {
                let sy = y + ky - 1;
                let dst = &mut out[y * w + x0..y * w + x1];
                let src = &input[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += k * s;
                }
            }
        }
    }
}

/// Per-channel 3×3 convolution, one kernel per channel, no bias.
pub(crate) fn depthwise3x3(input: &LatentFeature, kernels: &[[f64; 9]]) -> LatentFeature {
    debug_assert_eq!(kernels.len(), input.channels());
    let (c, h, w) = input.dims();
    let mut out = LatentFeature::zeros(c, h, w);
    for ch in 0..c {
        let src = input.plane(ch);
        accumulate_conv3x3(src, h, w, &kernels[ch], out.plane_mut(ch));
    }
    out
}

/// Dense 3×3 convolution. `weights` is laid out `[out][in][9]`.
pub(crate) fn conv3x3(input: &LatentFeature, out_channels: usize, weights: &[f64], bias: &[f64]) -> LatentFeature {
    let (cin, h, w) = input.dims();
    debug_assert_eq!(weights.len(), out_channels * cin * 9);
    debug_assert_eq!(bias.len(), out_channels);
    let mut out = LatentFeature::zeros(out_channels, h, w);
    for o in 0..out_channels {
        let plane = out.plane_mut(o);
        plane.iter_mut().for_each(|v| *v = bias[o]);
        for i in 0..cin {
            let k = &weights[(o * cin + i) * 9..(o * cin + i + 1) * 9];
            accumulate_conv3x3(input.plane(i), h, w, k, plane);
        }
    }
    out
}

/// 2×2 average pooling; odd edges average whatever samples exist.
pub(crate) fn avg_pool2(input: &LatentFeature) -> LatentFeature {
    let (c, h, w) = input.dims();
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    LatentFeature::from_fn((c, oh, ow), |ch, y, x| {
        let mut sum = 0.0;
        let mut n = 0.0;
        for dy in 0..2 {
            for dx in 0..2 {
                let (sy, sx) = (2 * y + dy, 2 * x + dx);
                if sy < h && sx < w {
                    sum += input.get(ch, sy, sx);
                    n += 1.0;
                }
            }
        }
        sum / n
    })
}

/// Nearest-neighbour 2× upsampling cropped to `(height, width)`.
pub(crate) fn upsample2(input: &LatentFeature, height: usize, width: usize) -> LatentFeature {
    LatentFeature::from_fn((input.channels(), height, width), |c, y, x| input.get(c, y / 2, x / 2))
}

/// Rearranges each 2×2 spatial block into four channels:
/// output channel `4c + 2dy + dx` holds input `(c, 2y+dy, 2x+dx)`.
pub(crate) fn space_to_depth(input: &LatentFeature) -> LatentFeature {
    let (c, h, w) = input.dims();
    debug_assert!(h % 2 == 0 && w % 2 == 0);
    LatentFeature::from_fn((4 * c, h / 2, w / 2), |oc, y, x| {
        let (ch, dy, dx) = (oc / 4, (oc % 4) / 2, oc % 2);
        input.get(ch, 2 * y + dy, 2 * x + dx)
    })
}

pub(crate) fn depth_to_space(input: &LatentFeature) -> LatentFeature {
    let (c4, h, w) = input.dims();
    debug_assert!(c4 % 4 == 0);
    LatentFeature::from_fn((c4 / 4, 2 * h, 2 * w), |c, y, x| {
        input.get(4 * c + 2 * (y % 2) + (x % 2), y / 2, x / 2)
    })
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        libm::log1p(libm::exp(x))
    }
}

pub(crate) fn softplus_inverse(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        libm::log(libm::expm1(y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_to_depth_round_trips() {
        let t = LatentFeature::from_fn((3, 4, 6), |c, y, x| (c * 100 + y * 10 + x) as f64);
        let s = space_to_depth(&t);
        assert_eq!(s.dims(), (12, 2, 3));
        assert_eq!(depth_to_space(&s), t);
    }

    #[test]
    fn depthwise_identity_kernel() {
        let t = LatentFeature::from_fn((2, 3, 3), |c, y, x| (c + y * 3 + x) as f64);
        let mut k = [0.0; 9];
        k[4] = 1.0;
        assert_eq!(depthwise3x3(&t, &[k, k]), t);
    }

    #[test]
    fn conv_respects_zero_padding() {
        let t = LatentFeature::filled((1, 3, 3), 1.0);
        let out = conv3x3(&t, 1, &[1.0; 9], &[0.0]);
        assert_eq!(out.get(0, 0, 0), 4.0);
        assert_eq!(out.get(0, 1, 1), 9.0);
        assert_eq!(out.get(0, 0, 1), 6.0);
    }

    #[test]
    fn pooling_handles_odd_sizes() {
        let t = LatentFeature::filled((1, 3, 5), 2.0);
        let p = avg_pool2(&t);
        assert_eq!(p.dims(), (1, 2, 3));
        assert!(p.data().iter().all(|&v| v == 2.0));
        assert_eq!(upsample2(&p, 3, 5).dims(), (1, 3, 5));
    }

    #[test]
    fn softplus_inverse_is_inverse() {
        for y in [0.1, 1.0, 1.68, 5.0] {
            assert!((softplus(softplus_inverse(y)) - y).abs() < 1e-12);
        }
    }
}
