//! Integer frequency models shared by the rate estimator and the range coder.

use crate::error::{Error, Result};

/// Frequencies are expressed out of `2^PROB_BITS`.
pub const PROB_BITS: u32 = 16;
pub const PROB_TOTAL: u32 = 1 << PROB_BITS;
/// Smallest admissible Gaussian scale.
pub const SIGMA_MIN: f64 = 0.11;

/// A per-position probability model over a contiguous integer alphabet.
///
/// Every symbol has frequency at least 1 and the frequencies of each
/// position sum to exactly [`PROB_TOTAL`].
pub trait SymbolModel {
    /// Number of positions the model describes.
    fn positions(&self) -> usize;

    /// Inclusive symbol range.
    fn support(&self) -> (i32, i32);

    /// `(cumulative, frequency)` of `symbol` at `pos`.
    fn interval(&self, pos: usize, symbol: i32) -> (u32, u32);

    /// Symbol whose interval at `pos` contains `target`, with its interval.
    fn locate(&self, pos: usize, target: u32) -> (i32, u32, u32);

    fn check_symbol(&self, symbol: i32) -> Result<()> {
        let (min, max) = self.support();
        if symbol < min || symbol > max {
            return Err(Error::SymbolOutOfAlphabet { value: symbol, min, max });
        }
        Ok(())
    }
}

/// Equal frequencies over `[min, min + count)`; leftover mass goes to the
/// last symbol.
#[derive(Debug, Clone)]
pub struct UniformModel {
    min: i32,
    count: u32,
    positions: usize,
}

impl UniformModel {
    pub fn new(min: i32, count: u32, positions: usize) -> Self {
        assert!((1..=PROB_TOTAL).contains(&count));
        Self { min, count, positions }
    }

    fn freq(&self) -> u32 {
        PROB_TOTAL / self.count
    }
}

impl SymbolModel for UniformModel {
    fn positions(&self) -> usize {
        self.positions
    }

    fn support(&self) -> (i32, i32) {
        (self.min, self.min + self.count as i32 - 1)
    }

    fn interval(&self, _pos: usize, symbol: i32) -> (u32, u32) {
        let idx = (symbol - self.min) as u32;
        let f = self.freq();
        let cum = idx * f;
        if idx == self.count - 1 {
            (cum, PROB_TOTAL - cum)
        } else {
            (cum, f)
        }
    }

    fn locate(&self, pos: usize, target: u32) -> (i32, u32, u32) {
        let idx = (target / self.freq()).min(self.count - 1);
        let s = self.min + idx as i32;
        let (c, f) = self.interval(pos, s);
        (s, c, f)
    }
}

/// Discretised Gaussian over `[-bound, bound]`, one `(mean, scale)` pair per
/// position.
///
/// Bin `s` receives the Gaussian mass of `[s - 0.5, s + 0.5)`; the two edge
/// bins absorb the tails. Each bin gets one unit of frequency (the 2^-16
/// floor) plus `floor(p · spare)` where `spare = 2^16 - alphabet`; the
/// remaining units go to the bin nearest the mean.
#[derive(Debug, Clone)]
pub struct SymbolDistribution {
    bound: i32,
    means: Vec<f64>,
    scales: Vec<f64>,
}

/// Quantised histogram of one position. Bins outside `[start, start + len)`
/// carry frequency exactly 1.
struct Bins {
    start: i32,
    extra: Vec<u32>,
    mode: i32,
    remainder: u32,
}

impl SymbolDistribution {
    pub fn new(bound: i32, means: Vec<f64>, scales: Vec<f64>) -> Self {
        assert_eq!(means.len(), scales.len());
        assert!(bound >= 1 && (2 * bound + 1) as u32 <= PROB_TOTAL / 2);
        let scales = scales.into_iter().map(|s| s.max(SIGMA_MIN)).collect();
        Self { bound, means, scales }
    }

    pub fn bound(&self) -> i32 {
        self.bound
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    fn alphabet(&self) -> u32 {
        (2 * self.bound + 1) as u32
    }

    fn bins(&self, pos: usize) -> Bins {
        let (mean, scale) = (self.means[pos], self.scales[pos]);
        let b = self.bound as f64;
        // Bins further than about 4.2σ + 0.5 from the mean have mass below
        // one frequency unit, so a 5σ + 2 window loses nothing.
        let reach = 5.0 * scale + 2.0;
        let mut lo = libm::floor(mean - reach).clamp(-b, b) as i32;
        let mut hi = libm::ceil(mean + reach).clamp(-b, b) as i32;
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        let spare = (PROB_TOTAL - self.alphabet()) as f64;
        let k = 1.0 / (scale * std::f64::consts::SQRT_2);
        // Upper tail CDF via erfc; each bin boundary is evaluated once.
        let upper = |x: f64| 0.5 * libm::erfc((x - mean) * k);
        let mut above = if lo == -self.bound { 1.0 } else { upper(lo as f64 - 0.5) };
        let extra: Vec<u32> = (lo..=hi)
            .map(|s| {
                let next = if s == self.bound { 0.0 } else { upper(s as f64 + 0.5) };
                let mass = (above - next).max(0.0);
                above = next;
                libm::floor(mass * spare) as u32
            })
            .collect();
        let used: u64 = extra.iter().map(|&e| e as u64).sum::<u64>() + self.alphabet() as u64;
        let mode = (libm::round(mean).clamp(-b, b) as i32).clamp(lo, hi);
        let mut bins = Bins {
            start: lo,
            extra,
            mode,
            remainder: 0,
        };
        if used <= PROB_TOTAL as u64 {
            bins.remainder = PROB_TOTAL - used as u32;
        } else {
            // Rounding pushed the total over; take the excess from the mode.
            let excess = (used - PROB_TOTAL as u64) as u32;
            let i = (mode - lo) as usize;
            bins.extra[i] -= excess.min(bins.extra[i]);
        }
        bins
    }

    /// Probability mass function of one position as seen by the coder.
    pub fn pmf(&self, pos: usize) -> Vec<f64> {
        (-self.bound..=self.bound)
            .map(|s| self.interval(pos, s).1 as f64 / PROB_TOTAL as f64)
            .collect()
    }
}

impl Bins {
    fn freq(&self, s: i32) -> u32 {
        let i = s - self.start;
        let extra = if i >= 0 && (i as usize) < self.extra.len() { self.extra[i as usize] } else { 0 };
        1 + extra + if s == self.mode { self.remainder } else { 0 }
    }
}

impl SymbolModel for SymbolDistribution {
    fn positions(&self) -> usize {
        self.means.len()
    }

    fn support(&self) -> (i32, i32) {
        (-self.bound, self.bound)
    }

    fn interval(&self, pos: usize, symbol: i32) -> (u32, u32) {
        let bins = self.bins(pos);
        let below = (symbol + self.bound) as u32;
        let window_end = bins.start + bins.extra.len() as i32;
        let upto = symbol.min(window_end) - bins.start;
        let extra: u32 = if upto > 0 { bins.extra[..upto as usize].iter().sum() } else { 0 };
        let rem = if bins.mode < symbol { bins.remainder } else { 0 };
        (below + extra + rem, bins.freq(symbol))
    }

    fn locate(&self, _pos: usize, target: u32) -> (i32, u32, u32) {
        let bins = self.bins(_pos);
        // Everything left of the window has frequency 1.
        let left = (bins.start + self.bound) as u32;
        if target < left {
            return (-self.bound + target as i32, target, 1);
        }
        let mut cum = left;
        for s in bins.start..=self.bound {
            let f = bins.freq(s);
            if target < cum + f {
                return (s, cum, f);
            }
            cum += f;
        }
        (self.bound, cum - 1, 1)
    }
}

/// An entropy-coded payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitpayload {
    pub bytes: Vec<u8>,
    pub bit_len: u64,
}

impl Bitpayload {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        let bit_len = bytes.len() as u64 * 8;
        Self { bytes, bit_len }
    }
}

/// Ideal code length `Σ -log2 p(symbol)` under `model`.
pub fn estimate_rate<M: SymbolModel>(symbols: &[i32], model: &M) -> Result<f64> {
    let mut bits = 0.0;
    for (pos, &s) in symbols.iter().enumerate() {
        model.check_symbol(s)?;
        let (_, f) = model.interval(pos, s);
        bits -= libm::log2(f as f64 / PROB_TOTAL as f64);
    }
    Ok(bits)
}

pub fn range_encode<M: SymbolModel>(symbols: &[i32], model: &M) -> Result<Bitpayload> {
    if symbols.len() > model.positions() {
        return Err(Error::InvalidConfig(format!(
            "{} symbols but the model covers {} positions",
            symbols.len(),
            model.positions()
        )));
    }
    let mut enc = super::range_coder::RangeEncoder::new();
    for (pos, &s) in symbols.iter().enumerate() {
        model.check_symbol(s)?;
        let (cum, freq) = model.interval(pos, s);
        enc.encode(cum, freq, PROB_BITS);
    }
    Ok(Bitpayload::from_bytes(enc.finish()))
}

/// Decodes `count` symbols. A payload coded under a different model decodes
/// to the wrong symbols rather than failing.
pub fn range_decode<M: SymbolModel>(payload: &Bitpayload, model: &M, count: usize) -> Result<Vec<i32>> {
    if count > model.positions() {
        return Err(Error::InvalidConfig(format!(
            "{count} symbols requested but the model covers {} positions",
            model.positions()
        )));
    }
    let mut dec = super::range_coder::RangeDecoder::new(&payload.bytes)?;
    let mut out = Vec::with_capacity(count);
    for pos in 0..count {
        let target = dec.target(PROB_BITS);
        let (s, cum, freq) = model.locate(pos, target);
        dec.consume(cum, freq)?;
        out.push(s);
    }
    Ok(out)
}
