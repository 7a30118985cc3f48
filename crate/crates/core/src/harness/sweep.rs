//! Rate-distortion sweeps and their CSV output.

use std::io::Write;

use crate::error::{Error, Result};
use crate::gop::{Codec, CodecSettings, EncodedSequence, GopConfig, GopMode};
use crate::harness::metrics::{loss_from_terms, mse, perceptual_proxy, psnr_from_mse, DEFAULT_BETA};
use crate::latent::Frame;

pub const CSV_HEADER: [&str; 8] = ["mode", "lambda", "frame", "bpp", "mse", "psnr", "proxy", "loss"];

#[derive(Debug, Clone, PartialEq)]
pub struct RdPoint {
    pub mode: GopMode,
    pub lambda: f64,
    /// Display index, or `None` for a sequence aggregate.
    pub frame: Option<usize>,
    pub bpp: f64,
    pub mse: f64,
    pub psnr: f64,
    /// Gradient-magnitude perceptual proxy.
    pub proxy: f64,
    pub loss: f64,
}

/// Per-frame points in display order followed by the aggregate, measured
/// from actual payload sizes. The aggregate loss is the frame mean.
pub fn measure_sequence(
    frames: &[Frame],
    encoded: &EncodedSequence,
    mode: GopMode,
    lambda: f64,
    beta: f64,
) -> Result<Vec<RdPoint>> {
    let pixels = frames.first().map_or(1, |f| f.pixel_count()) as f64;
    let mut bits = vec![0.0; frames.len()];
    for r in &encoded.records {
        bits[r.display_index] = 8.0 * r.payload.bytes.len() as f64;
    }
    let mut points = Vec::with_capacity(frames.len() + 1);
    for (i, (x, rec)) in frames.iter().zip(&encoded.recon).enumerate() {
        let bpp = bits[i] / pixels;
        let d = mse(x, &rec.frame)?;
        let p = perceptual_proxy(x, &rec.frame)?;
        points.push(RdPoint {
            mode,
            lambda,
            frame: Some(i),
            bpp,
            mse: d,
            psnr: psnr_from_mse(d),
            proxy: p,
            loss: loss_from_terms(bpp, d, p, lambda, beta),
        });
    }
    let n = points.len() as f64;
    let mean = |f: fn(&RdPoint) -> f64| points.iter().map(f).sum::<f64>() / n;
    let agg_mse = mean(|p| p.mse);
    points.push(RdPoint {
        mode,
        lambda,
        frame: None,
        bpp: mean(|p| p.bpp),
        mse: agg_mse,
        psnr: psnr_from_mse(agg_mse),
        proxy: mean(|p| p.proxy),
        loss: mean(|p| p.loss),
    });
    Ok(points)
}

/// Codes `frames` at every λ in `lambdas` and returns the per-frame and
/// aggregate points of each.
pub fn rd_sweep_detailed(
    frames: &[Frame],
    gop: &GopConfig,
    lambdas: &[f64],
    base: &CodecSettings,
) -> Result<Vec<RdPoint>> {
    if frames.is_empty() {
        return Err(Error::InvalidFrame("empty frame sequence".into()));
    }
    let mut out = Vec::new();
    for &lambda in lambdas {
        let codec = Codec::new(CodecSettings {
            lambda,
            ..base.clone()
        })?;
        let enc = codec.encode_sequence(frames, gop)?;
        out.extend(measure_sequence(frames, &enc, gop.mode, lambda, DEFAULT_BETA)?);
    }
    Ok(out)
}

/// One aggregate point per λ.
pub fn rd_sweep(frames: &[Frame], gop: &GopConfig, lambdas: &[f64], base: &CodecSettings) -> Result<Vec<RdPoint>> {
    Ok(rd_sweep_detailed(frames, gop, lambdas, base)?
        .into_iter()
        .filter(|p| p.frame.is_none())
        .collect())
}

pub fn write_csv<W: Write>(points: &[RdPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for p in points {
        let frame = p.frame.map_or("-".to_string(), |f| f.to_string());
        w.write_record([
            p.mode.name().to_string(),
            format!("{}", p.lambda),
            frame,
            format!("{:.6}", p.bpp),
            format!("{:.8}", p.mse),
            format!("{:.4}", p.psnr),
            format!("{:.8}", p.proxy),
            format!("{:.6}", p.loss),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
