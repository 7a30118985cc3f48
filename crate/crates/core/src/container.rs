//! Bitstream container: a fixed header followed by one record per coded
//! frame in coding order. All multi-byte integers are little-endian.
//!
//! | offset | size | field                                        |
//! |--------|------|----------------------------------------------|
//! | 0      | 4    | magic `I2VC`                                 |
//! | 4      | 1    | version                                      |
//! | 5      | 1    | mode byte (see below)                        |
//! | 6      | 2    | GoP size                                     |
//! | 8      | 2    | λ × 16                                       |
//! | 10     | 2    | frame width                                  |
//! | 12     | 2    | frame height                                 |
//! | 14     | 1    | latent channel count                         |
//! | 15     | 8    | weight seed                                  |
//! | 23     | 1    | P anchors per GoP (low-delay B)              |
//! | 24     | 1    | I anchors per GoP (random access)            |
//! | 25     | 1    | denoising steps T                            |
//! | 26     | 1    | inversion steps T′                           |
//!
//! Mode byte: bits 0-3 GoP mode code, bits 4-5 occlusion mode code, bit 6
//! reserved (zero), bit 7 set for the literal start-step policy.
//!
//! Each record is `frame_type u8`, `payload_len u32`, then the payload.
//! The frame count is the record count.

use crate::entropy::Bitpayload;
use crate::error::{Error, Result};
use crate::gop::{CodecSettings, EncodedSequence, FrameType, GopConfig, GopMode, OcclusionMode, StartPolicy};

pub const MAGIC: &[u8; 4] = b"I2VC";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 27;
pub const RECORD_HEADER_LEN: usize = 5;
/// Fixed-point scale of the stored rate parameter.
pub const LAMBDA_SCALE: f64 = 16.0;

const LITERAL_BIT: u8 = 0x80;
const RESERVED_BIT: u8 = 0x40;

/// Rounds `lambda` to the container's 1/16 grid.
pub fn quantize_lambda(lambda: f64) -> Result<u16> {
    let q = libm::round(lambda * LAMBDA_SCALE);
    if !lambda.is_finite() || !(8.0 * LAMBDA_SCALE..=512.0 * LAMBDA_SCALE).contains(&q) {
        return Err(Error::InvalidRate(lambda));
    }
    Ok(q as u16)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContainerHeader {
    pub mode: GopMode,
    pub start_policy: StartPolicy,
    pub occlusion: OcclusionMode,
    pub gop_size: u16,
    pub lambda_q: u16,
    pub width: u16,
    pub height: u16,
    pub channels: u8,
    pub seed: u64,
    pub p_count: u8,
    pub i_count: u8,
    pub steps: u8,
    pub inv_steps: u8,
}

fn narrow<T: TryFrom<usize>>(v: usize, what: &str) -> Result<T> {
    T::try_from(v).map_err(|_| Error::InvalidConfig(format!("{what} {v} does not fit the container header")))
}

impl ContainerHeader {
    /// Header for frames of `height × width` coded with `settings` and
    /// `gop`. The stored λ is quantised; the codec must be built from
    /// [`ContainerHeader::codec_settings`] to match the decoder.
    pub fn new(settings: &CodecSettings, gop: &GopConfig, height: usize, width: usize) -> Result<Self> {
        gop.validate()?;
        Ok(Self {
            mode: gop.mode,
            start_policy: settings.start_policy,
            occlusion: settings.occlusion,
            gop_size: narrow(gop.gop_size, "GoP size")?,
            lambda_q: quantize_lambda(settings.lambda)?,
            width: narrow(width, "frame width")?,
            height: narrow(height, "frame height")?,
            channels: narrow(settings.channels, "channel count")?,
            seed: settings.seed,
            p_count: narrow(gop.p_count, "P count")?,
            i_count: narrow(gop.i_count, "I count")?,
            steps: narrow(settings.steps, "step count")?,
            inv_steps: narrow(settings.inv_steps, "inversion step count")?,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda_q as f64 / LAMBDA_SCALE
    }

    pub fn codec_settings(&self) -> CodecSettings {
        CodecSettings {
            channels: self.channels as usize,
            seed: self.seed,
            lambda: self.lambda(),
            steps: self.steps as usize,
            inv_steps: self.inv_steps as usize,
            start_policy: self.start_policy,
            occlusion: self.occlusion,
        }
    }

    pub fn gop_config(&self) -> GopConfig {
        GopConfig {
            mode: self.mode,
            gop_size: self.gop_size as usize,
            p_count: self.p_count as usize,
            i_count: self.i_count as usize,
        }
    }

    fn mode_byte(&self) -> u8 {
        let literal = match self.start_policy {
            StartPolicy::Consistent => 0,
            StartPolicy::Literal => LITERAL_BIT,
        };
        self.mode.code() | (self.occlusion.code() << 4) | literal
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..4].copy_from_slice(MAGIC);
        out[4] = VERSION;
        out[5] = self.mode_byte();
        out[6..8].copy_from_slice(&self.gop_size.to_le_bytes());
        out[8..10].copy_from_slice(&self.lambda_q.to_le_bytes());
        out[10..12].copy_from_slice(&self.width.to_le_bytes());
        out[12..14].copy_from_slice(&self.height.to_le_bytes());
        out[14] = self.channels;
        out[15..23].copy_from_slice(&self.seed.to_le_bytes());
        out[23] = self.p_count;
        out[24] = self.i_count;
        out[25] = self.steps;
        out[26] = self.inv_steps;
        out
    }

    /// Parses and validates a header from the start of `bytes`.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::Format("bad magic, not an I2VC container".into()));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "container header needs {HEADER_LEN} bytes, file has {}",
                bytes.len()
            )));
        }
        if bytes[4] != VERSION {
            return Err(Error::Format(format!(
                "unsupported container version {} (expected {VERSION})",
                bytes[4]
            )));
        }
        let m = bytes[5];
        if m & RESERVED_BIT != 0 {
            return Err(Error::Format(format!("reserved bit set in mode byte {m:#04x}")));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let h = Self {
            mode: GopMode::from_code(m & 0x0f)?,
            start_policy: if m & LITERAL_BIT != 0 {
                StartPolicy::Literal
            } else {
                StartPolicy::Consistent
            },
            occlusion: OcclusionMode::from_code((m >> 4) & 0x03)?,
            gop_size: u16_at(6),
            lambda_q: u16_at(8),
            width: u16_at(10),
            height: u16_at(12),
            channels: bytes[14],
            seed: u64::from_le_bytes(bytes[15..23].try_into().expect("8 bytes")),
            p_count: bytes[23],
            i_count: bytes[24],
            steps: bytes[25],
            inv_steps: bytes[26],
        };
        h.validate()?;
        Ok(h)
    }

    fn validate(&self) -> Result<()> {
        let bad = |e: Error| Error::Format(format!("invalid header: {e}"));
        self.gop_config().validate().map_err(bad)?;
        if !(128..=8192).contains(&self.lambda_q) {
            return Err(bad(Error::InvalidRate(self.lambda())));
        }
        if self.width == 0 || self.height == 0 || self.width % 4 != 0 || self.height % 4 != 0 {
            return Err(bad(Error::NotDivisible {
                height: self.height as usize,
                width: self.width as usize,
            }));
        }
        if self.channels == 0 || self.steps == 0 || self.inv_steps > self.steps {
            return Err(Error::Format(format!(
                "invalid header: channels {}, steps {}, inversion steps {}",
                self.channels, self.steps, self.inv_steps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameRecord {
    pub frame_type: FrameType,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Container {
    pub header: ContainerHeader,
    /// Records in coding order.
    pub records: Vec<FrameRecord>,
}

impl Container {
    pub fn from_sequence(header: ContainerHeader, seq: &EncodedSequence) -> Self {
        let records = seq
            .records
            .iter()
            .map(|r| FrameRecord {
                frame_type: r.frame_type,
                payload: r.payload.bytes.clone(),
            })
            .collect();
        Self { header, records }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let body: usize = self.records.iter().map(|r| RECORD_HEADER_LEN + r.payload.len()).sum();
        let mut out = Vec::with_capacity(HEADER_LEN + body);
        out.extend_from_slice(&self.header.to_bytes());
        for r in &self.records {
            let len: u32 = r
                .payload
                .len()
                .try_into()
                .map_err(|_| Error::InvalidConfig("frame payload exceeds 4 GiB".into()))?;
            out.push(r.frame_type.code());
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(&r.payload);
        }
        Ok(out)
    }

    /// Parses the header, then scans every record boundary before any
    /// payload is handed out. A record cut short reports its index.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let header = ContainerHeader::parse(bytes)?;
        let mut records = Vec::new();
        let mut pos = HEADER_LEN;
        while pos < bytes.len() {
            let k = records.len();
            if bytes.len() - pos < RECORD_HEADER_LEN {
                return Err(Error::TruncatedStream { frame_index: k });
            }
            let frame_type = FrameType::from_code(bytes[pos])?;
            let len = u32::from_le_bytes(bytes[pos + 1..pos + 5].try_into().expect("4 bytes")) as usize;
            pos += RECORD_HEADER_LEN;
            if bytes.len() - pos < len {
                return Err(Error::TruncatedStream { frame_index: k });
            }
            records.push(FrameRecord {
                frame_type,
                payload: bytes[pos..pos + len].to_vec(),
            });
            pos += len;
        }
        Ok(Self { header, records })
    }

    /// Records as decoder input.
    pub fn payloads(&self) -> Vec<(FrameType, Bitpayload)> {
        self.records
            .iter()
            .map(|r| (r.frame_type, Bitpayload::from_bytes(r.payload.clone())))
            .collect()
    }
}
