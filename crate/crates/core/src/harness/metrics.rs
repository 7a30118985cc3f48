//! Distortion metrics and the rate-distortion-perception objective.

use crate::error::Result;
use crate::latent::Frame;

/// Default weight of the perceptual term.
pub const DEFAULT_BETA: f64 = 0.05;
/// PSNR reported for (near-)lossless reconstructions.
pub const PSNR_CAP: f64 = 99.0;
/// Number of dyadic scales in the perceptual proxy.
pub const PROXY_SCALES: usize = 3;

pub fn mse(x: &Frame, y: &Frame) -> Result<f64> {
    x.ensure_same_dims(y)?;
    let n = x.data().len() as f64;
    Ok(x.data().iter().zip(y.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n)
}

/// `10·log10(1/mse)` for a peak of 1, capped at [`PSNR_CAP`].
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 1e-10 {
        PSNR_CAP
    } else {
        (10.0 * libm::log10(1.0 / mse)).min(PSNR_CAP)
    }
}

pub fn psnr(x: &Frame, y: &Frame) -> Result<f64> {
    Ok(psnr_from_mse(mse(x, y)?))
}

/// Planar image of `planes × height × width`.
struct Planes {
    planes: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Planes {
    fn from_frame(f: &Frame) -> Self {
        Self {
            planes: 3,
            height: f.height(),
            width: f.width(),
            data: f.data().to_vec(),
        }
    }

    fn at(&self, p: usize, y: usize, x: usize) -> f64 {
        self.data[(p * self.height + y) * self.width + x]
    }

    fn halve(&self) -> Self {
        let (h, w) = (self.height.div_ceil(2), self.width.div_ceil(2));
        let mut data = Vec::with_capacity(self.planes * h * w);
        for p in 0..self.planes {
            for y in 0..h {
                for x in 0..w {
                    let mut sum = 0.0;
                    let mut n = 0.0;
                    for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        let (sy, sx) = (2 * y + dy, 2 * x + dx);
                        if sy < self.height && sx < self.width {
                            sum += self.at(p, sy, sx);
                            n += 1.0;
                        }
                    }
                    data.push(sum / n);
                }
            }
        }
        Self {
            planes: self.planes,
            height: h,
            width: w,
            data,
        }
    }

    /// Forward-difference gradient magnitude with replicated borders.
    fn gradient_magnitude(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for p in 0..self.planes {
            for y in 0..self.height {
                for x in 0..self.width {
                    let v = self.at(p, y, x);
                    let gx = self.at(p, y, (x + 1).min(self.width - 1)) - v;
                    let gy = self.at(p, (y + 1).min(self.height - 1), x) - v;
                    out.push(libm::sqrt(gx * gx + gy * gy));
                }
            }
        }
        out
    }
}

/// Perceptual proxy: MSE between gradient-magnitude maps, averaged over
/// three dyadic scales. A stand-in for a learned perceptual metric.
pub fn perceptual_proxy(x: &Frame, y: &Frame) -> Result<f64> {
    x.ensure_same_dims(y)?;
    let mut a = Planes::from_frame(x);
    let mut b = Planes::from_frame(y);
    let mut total = 0.0;
    for s in 0..PROXY_SCALES {
        if s > 0 {
            a = a.halve();
            b = b.halve();
        }
        let (ga, gb) = (a.gradient_magnitude(), b.gradient_magnitude());
        total += ga.iter().zip(&gb).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() / ga.len() as f64;
    }
    Ok(total / PROXY_SCALES as f64)
}

/// `R + λ·(D + β·P)` from its terms.
pub fn loss_from_terms(bpp: f64, distortion: f64, perception: f64, lambda: f64, beta: f64) -> f64 {
    bpp + lambda * (distortion + beta * perception)
}

/// Objective of one frame coded with `bits` bits.
pub fn compute_loss(x: &Frame, x_hat: &Frame, bits: f64, lambda: f64, beta: f64) -> Result<f64> {
    let bpp = bits / x.pixel_count() as f64;
    Ok(loss_from_terms(bpp, mse(x, x_hat)?, perceptual_proxy(x, x_hat)?, lambda, beta))
}
