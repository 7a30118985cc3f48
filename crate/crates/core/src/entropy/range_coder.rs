//! 32-bit carry-less range coder (Subbotin style).
//!
//! Bytes leave the coder most-significant first. Renormalisation happens
//! whenever the top byte of the interval is settled, or when the range has
//! shrunk below 2^16, in which case the interval is cut at the next 2^16
//! boundary so no carry can ever propagate into bytes already emitted.
//! [`RangeEncoder::finish`] flushes the four bytes of `low`.

use crate::error::{Error, Result};

const TOP: u32 = 1 << 24;
const BOT: u32 = 1 << 16;

/// Number of flush bytes written by [`RangeEncoder::finish`].
pub const FLUSH_BYTES: usize = 4;

#[derive(Debug)]
pub struct RangeEncoder {
    low: u32,
    range: u32,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            out: Vec::new(),
        }
    }

    /// Narrows the interval to `[cum, cum + freq)` out of `2^total_bits`.
    pub fn encode(&mut self, cum: u32, freq: u32, total_bits: u32) {
        debug_assert!(freq > 0 && cum + freq <= 1 << total_bits);
        self.range >>= total_bits;
        self.low = self.low.wrapping_add(cum.wrapping_mul(self.range));
        self.range = self.range.wrapping_mul(freq);
        self.normalize();
    }

    fn normalize(&mut self) {
        loop {
            if (self.low ^ self.low.wrapping_add(self.range)) >= TOP {
                if self.range >= BOT {
                    break;
                }
                self.range = self.low.wrapping_neg() & (BOT - 1);
            }
            self.out.push((self.low >> 24) as u8);
            self.low <<= 8;
            self.range <<= 8;
        }
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..FLUSH_BYTES {
            self.out.push((self.low >> 24) as u8);
            self.low <<= 8;
        }
        self.out
    }
}

#[derive(Debug)]
pub struct RangeDecoder<'a> {
    low: u32,
    range: u32,
    code: u32,
    input: &'a [u8],
    pos: usize,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(input: &'a [u8]) -> Result<Self> {
        let mut d = Self {
            low: 0,
            range: u32::MAX,
            code: 0,
            input,
            pos: 0,
        };
        for _ in 0..FLUSH_BYTES {
            d.code = (d.code << 8) | d.next_byte()? as u32;
        }
        Ok(d)
    }

    fn next_byte(&mut self) -> Result<u8> {
        let b = *self
            .input
            .get(self.pos)
            .ok_or(Error::TruncatedPayload { consumed: self.pos })?;
        self.pos += 1;
        Ok(b)
    }

    /// Returns the cumulative-frequency target of the next symbol. Must be
    /// followed by [`RangeDecoder::consume`] with that symbol's interval.
    pub fn target(&mut self, total_bits: u32) -> u32 {
        self.range >>= total_bits;
        let t = self.code.wrapping_sub(self.low) / self.range.max(1);
        // Only reachable on corrupt or mismatched input.
        t.min((1 << total_bits) - 1)
    }

    pub fn consume(&mut self, cum: u32, freq: u32) -> Result<()> {
        self.low = self.low.wrapping_add(cum.wrapping_mul(self.range));
        self.range = self.range.wrapping_mul(freq);
        loop {
            if (self.low ^ self.low.wrapping_add(self.range)) >= TOP {
                if self.range >= BOT {
                    break;
                }
                self.range = self.low.wrapping_neg() & (BOT - 1);
            }
            self.code = (self.code << 8) | self.next_byte()? as u32;
            self.low <<= 8;
            self.range <<= 8;
        }
        Ok(())
    }

    pub fn bytes_consumed(&self) -> usize {
        self.pos
    }
}
