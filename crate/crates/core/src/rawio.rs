//! Raw file formats for frames and latent tensors.
//!
//! Frame file (`.rgbp`), all integers little-endian:
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `RGBP`                  |
//! | 4      | 2    | width                         |
//! | 6      | 2    | height                        |
//! | 8      | w·h  | R plane, 8-bit, row-major     |
//! | ...    | w·h  | G plane                       |
//! | ...    | w·h  | B plane                       |
//!
//! Tensor file (`.i2lt`):
//!
//! | offset | size | field                              |
//! |--------|------|------------------------------------|
//! | 0      | 4    | magic `I2LT`                       |
//! | 4      | 1    | dtype code (1 = f64, 2 = f32)      |
//! | 5      | 1    | rank (always 3)                    |
//! | 6      | 12   | dims `c, h, w` as u32              |
//! | 18     | ...  | payload, channel-major             |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::latent::Frame;
use crate::tensor::LatentFeature;

pub const FRAME_MAGIC: &[u8; 4] = b"RGBP";
pub const TENSOR_MAGIC: &[u8; 4] = b"I2LT";
pub const FRAME_EXTENSION: &str = "rgbp";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F64 = 1,
    F32 = 2,
}

pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>> {
    let (w, h) = (frame.width(), frame.height());
    if w > u16::MAX as usize || h > u16::MAX as usize {
        return Err(Error::InvalidFrame(format!("{w}x{h} exceeds the 16-bit frame header")));
    }
    let mut out = Vec::with_capacity(8 + 3 * w * h);
    out.extend_from_slice(FRAME_MAGIC);
    out.extend_from_slice(&(w as u16).to_le_bytes());
    out.extend_from_slice(&(h as u16).to_le_bytes());
    out.extend_from_slice(&frame.to_rgb8_planar());
    Ok(out)
}

pub fn decode_frame(bytes: &[u8]) -> Result<Frame> {
    if bytes.len() < 8 || &bytes[..4] != FRAME_MAGIC {
        return Err(Error::Format("not an RGBP frame file".into()));
    }
    let w = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
    let h = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    Frame::from_rgb8_planar(h, w, &bytes[8..])
}

pub fn write_frame(path: &Path, frame: &Frame) -> Result<()> {
    fs::write(path, encode_frame(frame)?)?;
    Ok(())
}

pub fn read_frame(path: &Path) -> Result<Frame> {
    decode_frame(&fs::read(path)?)
}

/// Lists the frame files of a directory in lexicographic order.
pub fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == FRAME_EXTENSION))
        .collect();
    files.sort();
    Ok(files)
}

pub fn read_frame_dir(dir: &Path) -> Result<Vec<Frame>> {
    list_frame_files(dir)?.iter().map(|p| read_frame(p)).collect()
}

/// Writes `frames` as `frame_00000.rgbp`, `frame_00001.rgbp`, ... into `dir`.
pub fn write_frame_dir(dir: &Path, frames: &[Frame]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, f) in frames.iter().enumerate() {
        write_frame(&dir.join(format!("frame_{i:05}.{FRAME_EXTENSION}")), f)?;
    }
    Ok(())
}

pub fn encode_tensor(t: &LatentFeature, dtype: DType) -> Vec<u8> {
    let width = match dtype {
        DType::F64 => 8,
        DType::F32 => 4,
    };
    let mut out = Vec::with_capacity(18 + t.len() * width);
    out.extend_from_slice(TENSOR_MAGIC);
    out.push(dtype as u8);
    out.push(3);
    for d in [t.channels(), t.height(), t.width()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        match dtype {
            DType::F64 => out.extend_from_slice(&v.to_le_bytes()),
            DType::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
        }
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<LatentFeature> {
    if bytes.len() < 18 || &bytes[..4] != TENSOR_MAGIC {
        return Err(Error::Format("not an I2LT tensor file".into()));
    }
    let width = match bytes[4] {
        1 => 8,
        2 => 4,
        other => return Err(Error::Format(format!("unknown dtype code {other}"))),
    };
    if bytes[5] != 3 {
        return Err(Error::Format(format!("unsupported tensor rank {}", bytes[5])));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[6 + 4 * i..10 + 4 * i].try_into().unwrap()) as usize;
    let (c, h, w) = (dim(0), dim(1), dim(2));
    let payload = &bytes[18..];
    if payload.len() != c * h * w * width {
        return Err(Error::Format(format!(
            "tensor payload is {} bytes, header implies {}",
            payload.len(),
            c * h * w * width
        )));
    }
    let data = payload
        .chunks_exact(width)
        .map(|b| match width {
            8 => f64::from_le_bytes(b.try_into().unwrap()),
            _ => f32::from_le_bytes(b.try_into().unwrap()) as f64,
        })
        .collect();
    LatentFeature::from_vec(c, h, w, data)
}

pub fn write_tensor(path: &Path, t: &LatentFeature, dtype: DType) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_tensor(t, dtype))?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<LatentFeature> {
    decode_tensor(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_header_layout() {
        let f = Frame::filled(4, 8, 1.0).unwrap();
        let b = encode_frame(&f).unwrap();
        assert_eq!(&b[..4], b"RGBP");
        assert_eq!(&b[4..8], &[8, 0, 4, 0]);
        assert_eq!(b.len(), 8 + 3 * 32);
        assert_eq!(decode_frame(&b).unwrap(), f);
    }

    #[test]
    fn tensor_file_round_trip() {
        let t = LatentFeature::from_fn((2, 3, 4), |c, y, x| c as f64 - 0.5 * y as f64 + 0.25 * x as f64);
        let b = encode_tensor(&t, DType::F64);
        assert_eq!(&b[..6], &[b'I', b'2', b'L', b'T', 1, 3]);
        assert_eq!(&b[6..10], &2u32.to_le_bytes());
        assert_eq!(decode_tensor(&b).unwrap(), t);
        let b32 = encode_tensor(&t, DType::F32);
        assert_eq!(decode_tensor(&b32).unwrap(), t);
    }

    #[test]
    fn short_tensor_payload_is_rejected() {
        let t = LatentFeature::zeros(1, 2, 2);
        let mut b = encode_tensor(&t, DType::F64);
        b.pop();
        assert!(matches!(decode_tensor(&b), Err(Error::Format(_))));
    }
}
