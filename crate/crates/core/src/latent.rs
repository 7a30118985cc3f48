//! Pixel ↔ latent transform.
//!
//! Every 4×4×3 pixel patch is projected onto a fixed orthonormal basis: the
//! separable 4×4 DCT-II crossed with an orthonormal opponent-colour basis,
//! ordered from low to high frequency, with seed-chosen sign flips. The
//! latent grid is therefore exactly a quarter of the frame in each spatial
//! dimension, and with the full 48 channels the transform is orthogonal, so
//! `from_latent` is its exact inverse (up to the output clamp).

use std::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::LatentFeature;

pub const PATCH: usize = 4;
pub const PATCH_LEN: usize = PATCH * PATCH * 3;
pub const DEFAULT_LATENT_CHANNELS: usize = PATCH_LEN;

/// An RGB frame stored as three planes of values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_frame_dims(height, width)?;
        if data.len() != 3 * height * width {
            return Err(Error::InvalidFrame(format!(
                "expected {} samples, got {}",
                3 * height * width,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(Error::InvalidFrame(format!("sample {v} outside [0, 1]")));
        }
        Ok(Self { height, width, data })
    }

    /// Builds a frame from `f(channel, y, x)`, clamping into `[0, 1]`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        check_frame_dims(height, width)?;
        let mut data = Vec::with_capacity(3 * height * width);
        for c in 0..3 {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x).clamp(0.0, 1.0));
                }
            }
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::from_fn(height, width, |_, _, _| value)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.pixel_count();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn ensure_same_dims(&self, other: &Frame) -> Result<()> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(Error::DimensionMismatch {
                expected: (3, self.height, self.width),
                actual: (3, other.height, other.width),
            });
        }
        Ok(())
    }

    /// Quantizes to 8-bit planar RGB.
    pub fn to_rgb8_planar(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| libm::round(v * 255.0).clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn from_rgb8_planar(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        check_frame_dims(height, width)?;
        if bytes.len() != 3 * height * width {
            return Err(Error::InvalidFrame(format!(
                "expected {} bytes of planar RGB, got {}",
                3 * height * width,
                bytes.len()
            )));
        }
        let data = bytes.iter().map(|&b| b as f64 / 255.0).collect();
        Ok(Self { height, width, data })
    }
}

fn check_frame_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 || height % PATCH != 0 || width % PATCH != 0 {
        return Err(Error::NotDivisible { height, width });
    }
    Ok(())
}

/// Frequency/colour coordinates of one latent channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisBand {
    pub vertical: usize,
    pub horizontal: usize,
    /// 0 = luma, 1 and 2 = colour-opponent axes.
    pub colour: usize,
}

impl BasisBand {
    pub fn is_dc(&self) -> bool {
        self.vertical == 0 && self.horizontal == 0
    }

    /// Nominal standard deviation of this coefficient on natural content,
    /// used to shape the intra prior.
    pub fn nominal_std(&self) -> f64 {
        let colour = if self.colour == 0 { 1.0 } else { 0.4 };
        if self.is_dc() {
            if self.colour == 0 {
                3.0
            } else {
                0.5
            }
        } else {
            colour * 0.5 / (self.vertical + self.horizontal) as f64
        }
    }
}

/// Channel order used by the transform: lowest total frequency first, then
/// vertical frequency, then colour axis.
pub fn basis_layout(channels: usize) -> Vec<BasisBand> {
    let mut bands: Vec<BasisBand> = (0..PATCH)
        .flat_map(|v| {
            (0..PATCH).flat_map(move |h| {
                (0..3).map(move |c| BasisBand {
                    vertical: v,
                    horizontal: h,
                    colour: c,
                })
            })
        })
        .collect();
    bands.sort_by_key(|b| (b.vertical + b.horizontal, b.vertical, b.colour));
    bands.truncate(channels);
    bands
}

fn dct_weight(freq: usize, n: usize) -> f64 {
    let scale = if freq == 0 { (1.0 / PATCH as f64).sqrt() } else { (2.0 / PATCH as f64).sqrt() };
    scale * libm::cos(std::f64::consts::PI * (2 * n + 1) as f64 * freq as f64 / (2 * PATCH) as f64)
}

const COLOUR_BASIS: [[f64; 3]; 3] = [
    [0.577_350_269_189_625_8, 0.577_350_269_189_625_8, 0.577_350_269_189_625_8],
    [FRAC_1_SQRT_2, 0.0, -FRAC_1_SQRT_2],
    [0.408_248_290_463_863, -0.816_496_580_927_726, 0.408_248_290_463_863],
];

/// The fixed orthonormal patch transform between frames and latents.
#[derive(Debug, Clone)]
pub struct LatentTransform {
    seed: u64,
    bands: Vec<BasisBand>,
    /// One row of `PATCH_LEN` weights per latent channel; patch element
    /// index is `colour * 16 + dy * 4 + dx`.
    basis: Vec<[f64; PATCH_LEN]>,
}

impl LatentTransform {
    pub fn new(channels: usize, seed: u64) -> Result<Self> {
        if channels == 0 || channels > PATCH_LEN {
            return Err(Error::InvalidConfig(format!(
                "latent channel count {channels} outside [1, {PATCH_LEN}]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4c41_5445_4e54);
        let bands = basis_layout(channels);
        let basis = bands
            .iter()
            .map(|band| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let mut row = [0.0; PATCH_LEN];
                for (c, &cw) in COLOUR_BASIS[band.colour].iter().enumerate() {
                    for dy in 0..PATCH {
                        for dx in 0..PATCH {
                            row[c * 16 + dy * PATCH + dx] =
                                sign * cw * dct_weight(band.vertical, dy) * dct_weight(band.horizontal, dx);
                        }
                    }
                }
                row
            })
            .collect();
        Ok(Self { seed, bands, basis })
    }

    pub fn channels(&self) -> usize {
        self.basis.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bands(&self) -> &[BasisBand] {
        &self.bands
    }

    pub fn latent_dims(&self, frame_height: usize, frame_width: usize) -> (usize, usize, usize) {
        (self.channels(), frame_height / PATCH, frame_width / PATCH)
    }

    pub fn to_latent(&self, frame: &Frame) -> Result<LatentFeature> {
        check_frame_dims(frame.height, frame.width)?;
        let (c, h, w) = self.latent_dims(frame.height, frame.width);
        let mut out = LatentFeature::zeros(c, h, w);
        let mut patch = [0.0; PATCH_LEN];
        for by in 0..h {
            for bx in 0..w {
                for col in 0..3 {
                    for dy in 0..PATCH {
                        for dx in 0..PATCH {
                            patch[col * 16 + dy * PATCH + dx] = frame.get(col, by * PATCH + dy, bx * PATCH + dx);
                        }
                    }
                }
                for (ch, row) in self.basis.iter().enumerate() {
                    let v: f64 = row.iter().zip(&patch).map(|(a, b)| a * b).sum();
                    out.set(ch, by, bx, v);
                }
            }
        }
        Ok(out)
    }

    /// Maps a latent back to pixels; samples are clamped into `[0, 1]`.
    pub fn from_latent(&self, latent: &LatentFeature) -> Result<Frame> {
        if latent.channels() != self.channels() {
            return Err(Error::ChannelMismatch {
                expected: self.channels(),
                actual: latent.channels(),
            });
        }
        let (h, w) = (latent.height() * PATCH, latent.width() * PATCH);
        let mut data = vec![0.0; 3 * h * w];
        let mut patch = [0.0; PATCH_LEN];
        for by in 0..latent.height() {
            for bx in 0..latent.width() {
                patch.iter_mut().for_each(|p| *p = 0.0);
                for (ch, row) in self.basis.iter().enumerate() {
                    let coeff = latent.get(ch, by, bx);
                    for (p, r) in patch.iter_mut().zip(row) {
                        *p += coeff * r;
                    }
                }
                for col in 0..3 {
                    for dy in 0..PATCH {
                        for dx in 0..PATCH {
                            let v = patch[col * 16 + dy * PATCH + dx];
                            data[(col * h + by * PATCH + dy) * w + bx * PATCH + dx] = v.clamp(0.0, 1.0);
                        }
                    }
                }
            }
        }
        Ok(Frame { height: h, width: w, data })
    }
}
