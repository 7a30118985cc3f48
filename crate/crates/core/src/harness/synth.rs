//! Deterministic synthetic sequences with ground-truth change masks.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::latent::{Frame, PATCH};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    /// Static textured background with a square moving 2 px per frame
    /// horizontally, bouncing at the borders.
    MovingSquare,
    /// Radial ring pattern zooming in about the centre.
    Zoom,
    /// The textured background, repeated.
    Static,
    /// Independent uniform noise frames.
    Noise,
}

impl SequenceKind {
    pub const ALL: [SequenceKind; 4] = [Self::MovingSquare, Self::Zoom, Self::Static, Self::Noise];

    pub fn name(self) -> &'static str {
        match self {
            Self::MovingSquare => "moving_square",
            Self::Zoom => "zoom",
            Self::Static => "static",
            Self::Noise => "noise",
        }
    }
}

impl FromStr for SequenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown sequence kind {s:?}")))
    }
}

pub const SQUARE_STEP: usize = 2;
const SQUARE_COLOUR: [f64; 3] = [0.92, 0.18, 0.1];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub frames: Vec<Frame>,
    /// Row-major `height × width` mask per frame marking pixels whose
    /// content differs from the previous frame; the first mask is empty.
    pub changed: Vec<Vec<bool>>,
}

fn background(c: usize, y: usize, x: usize, h: usize) -> f64 {
    let tint = [0.0, 0.05, -0.05][c];
    0.4 + tint
        + 0.12 * libm::sin(2.0 * PI * x as f64 / 16.0) * libm::cos(2.0 * PI * y as f64 / 11.0)
        + 0.15 * y as f64 / h as f64
}

/// Side length of the moving square for a `height × width` frame.
pub fn square_side(height: usize, width: usize) -> usize {
    (height.min(width) / 4).max(2)
}

/// Left edge of the square in frame `i`.
pub fn square_x(i: usize, width: usize, side: usize) -> usize {
    let span = width.saturating_sub(side);
    if span == 0 {
        return 0;
    }
    let t = (SQUARE_STEP * i) % (2 * span);
    if t <= span {
        t
    } else {
        2 * span - t
    }
}

fn square_mask(i: usize, h: usize, w: usize) -> impl Fn(usize, usize) -> bool {
    let s = square_side(h, w);
    let x0 = square_x(i, w, s);
    let y0 = (h - s) / 2;
    move |y, x| (y0..y0 + s).contains(&y) && (x0..x0 + s).contains(&x)
}

pub fn synth_sequence(kind: SequenceKind, n: usize, height: usize, width: usize, seed: u64) -> Result<SyntheticSequence> {
    if n == 0 {
        return Err(Error::InvalidConfig("a sequence needs at least one frame".into()));
    }
    if height == 0 || width == 0 || height % PATCH != 0 || width % PATCH != 0 {
        return Err(Error::NotDivisible { height, width });
    }
    let (h, w) = (height, width);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let f = match kind {
            SequenceKind::Static => Frame::from_fn(h, w, |c, y, x| background(c, y, x, h))?,
            SequenceKind::MovingSquare => {
                let inside = square_mask(i, h, w);
                Frame::from_fn(h, w, |c, y, x| if inside(y, x) { SQUARE_COLOUR[c] } else { background(c, y, x, h) })?
            }
            SequenceKind::Zoom => {
                let scale = 1.0 + 0.05 * i as f64;
                let (cy, cx) = (h as f64 / 2.0, w as f64 / 2.0);
                Frame::from_fn(h, w, |c, y, x| {
                    let (dy, dx) = ((y as f64 + 0.5 - cy) / scale, (x as f64 + 0.5 - cx) / scale);
                    let r = libm::sqrt(dy * dy + dx * dx);
                    0.5 + 0.35 * libm::sin(r * 0.9 + c as f64 * 0.7)
                })?
            }
            SequenceKind::Noise => {
                let data = (0..3 * h * w).map(|_| rng.random_range(0.0..=1.0)).collect();
                Frame::new(h, w, data)?
            }
        };
        frames.push(f);
    }
    let mut changed = vec![vec![false; h * w]];
    for i in 1..n {
        let mask = match kind {
            SequenceKind::MovingSquare => {
                let (old, new) = (square_mask(i - 1, h, w), square_mask(i, h, w));
                (0..h * w).map(|k| old(k / w, k % w) || new(k / w, k % w)).collect()
            }
            _ => {
                let (a, b) = (&frames[i - 1], &frames[i]);
                (0..h * w)
                    .map(|k| (0..3).any(|c| a.get(c, k / w, k % w) != b.get(c, k / w, k % w)))
                    .collect()
            }
        };
        changed.push(mask);
    }
    Ok(SyntheticSequence { frames, changed })
}

/// Downsamples a pixel mask to latent positions: a latent position is
/// marked when any pixel of its patch is.
pub fn latent_mask(mask: &[bool], height: usize, width: usize) -> Vec<bool> {
    let (h, w) = (height / PATCH, width / PATCH);
    (0..h * w)
        .map(|k| {
            let (by, bx) = (k / w, k % w);
            (0..PATCH).any(|dy| (0..PATCH).any(|dx| mask[(by * PATCH + dy) * width + bx * PATCH + dx]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_frames_are_identical() {
        let s = synth_sequence(SequenceKind::Static, 32, 16, 16, 0).unwrap();
        assert!(s.frames.windows(2).all(|w| w[0] == w[1]));
        assert!(s.changed.iter().all(|m| m.iter().all(|&v| !v)));
    }

    #[test]
    fn square_bounces() {
        let xs: Vec<usize> = (0..8).map(|i| square_x(i, 16, 8)).collect();
        assert_eq!(xs, vec![0, 2, 4, 6, 8, 6, 4, 2]);
    }

    #[test]
    fn changed_mask_is_union_of_square_positions() {
        let (h, w) = (32, 32);
        let s = synth_sequence(SequenceKind::MovingSquare, 3, h, w, 0).unwrap();
        let side = square_side(h, w);
        let count = s.changed[1].iter().filter(|&&v| v).count();
        assert_eq!(count, side * (side + SQUARE_STEP));
        for k in 0..h * w {
            let differs = (0..3).any(|c| s.frames[0].get(c, k / w, k % w) != s.frames[1].get(c, k / w, k % w));
            if differs {
                assert!(s.changed[1][k]);
            }
        }
    }

    #[test]
    fn noise_is_seeded() {
        let a = synth_sequence(SequenceKind::Noise, 2, 8, 8, 9).unwrap();
        assert_eq!(a, synth_sequence(SequenceKind::Noise, 2, 8, 8, 9).unwrap());
        assert_ne!(a, synth_sequence(SequenceKind::Noise, 2, 8, 8, 10).unwrap());
    }

    #[test]
    fn latent_mask_marks_touched_patches() {
        let mut m = vec![false; 8 * 8];
        m[5 * 8 + 6] = true;
        assert_eq!(latent_mask(&m, 8, 8), vec![false, false, false, true]);
    }
}
