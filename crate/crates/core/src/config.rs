//! Run configuration: a flat `key = value` file (TOML syntax, no tables).
//!
//! ```text
//! mode = "RA"            # AI, LDP, LDB or RA
//! gop_size = 32
//! lambda = 64.0          # [8, 512], stored at 1/16 resolution
//! steps = 30             # denoising steps T
//! inv_steps = 15         # inversion steps T′ ≤ T
//! p_count = 6            # LDB only
//! i_count = 2            # RA only
//! seed = 0
//! start_step = "consistent"   # or "literal"
//! channels = 48
//! occlusion = "learned"       # learned, gradient or average
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;

use crate::container::{quantize_lambda, LAMBDA_SCALE};
use crate::diffusion::DEFAULT_STEPS;
use crate::error::{Error, Result};
use crate::gop::{
    CodecSettings, GopConfig, GopMode, OcclusionMode, StartPolicy, DEFAULT_GOP_SIZE, DEFAULT_I_COUNT, DEFAULT_P_COUNT,
};
use crate::latent::DEFAULT_LATENT_CHANNELS;

pub const DEFAULT_LAMBDA: f64 = 64.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: GopMode,
    pub gop_size: usize,
    pub lambda: f64,
    pub steps: usize,
    pub inv_steps: usize,
    pub p_count: usize,
    pub i_count: usize,
    pub seed: u64,
    pub start_policy: StartPolicy,
    pub channels: usize,
    pub occlusion: OcclusionMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: GopMode::RandomAccess,
            gop_size: DEFAULT_GOP_SIZE,
            lambda: DEFAULT_LAMBDA,
            steps: DEFAULT_STEPS,
            inv_steps: DEFAULT_STEPS / 2,
            p_count: DEFAULT_P_COUNT,
            i_count: DEFAULT_I_COUNT,
            seed: 0,
            start_policy: StartPolicy::Consistent,
            channels: DEFAULT_LATENT_CHANNELS,
            occlusion: OcclusionMode::Learned,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<String>,
    gop_size: Option<usize>,
    lambda: Option<f64>,
    steps: Option<usize>,
    inv_steps: Option<usize>,
    p_count: Option<usize>,
    i_count: Option<usize>,
    seed: Option<u64>,
    start_step: Option<String>,
    channels: Option<usize>,
    occlusion: Option<String>,
}

impl RunConfig {
    /// Parses `text` over the defaults and validates the result.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_str_over(text, Self::default())
    }

    /// Parses `text`, taking absent keys from `base`.
    pub fn from_toml_str_over(text: &str, base: Self) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(one_line(&e.to_string())))?;
        let cfg = Self {
            mode: raw.mode.as_deref().map(str::parse).transpose()?.unwrap_or(base.mode),
            gop_size: raw.gop_size.unwrap_or(base.gop_size),
            lambda: raw.lambda.unwrap_or(base.lambda),
            steps: raw.steps.unwrap_or(base.steps),
            inv_steps: raw.inv_steps.unwrap_or(base.inv_steps),
            p_count: raw.p_count.unwrap_or(base.p_count),
            i_count: raw.i_count.unwrap_or(base.i_count),
            seed: raw.seed.unwrap_or(base.seed),
            start_policy: raw.start_step.as_deref().map(str::parse).transpose()?.unwrap_or(base.start_policy),
            channels: raw.channels.unwrap_or(base.channels),
            occlusion: raw.occlusion.as_deref().map(str::parse).transpose()?.unwrap_or(base.occlusion),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn load_over(path: &Path, base: Self) -> Result<Self> {
        Self::from_toml_str_over(&std::fs::read_to_string(path)?, base)
    }

    pub fn validate(&self) -> Result<()> {
        if !(8.0..=512.0).contains(&self.lambda) {
            return Err(Error::InvalidConfig(format!("lambda {} outside [8, 512]", self.lambda)));
        }
        if self.steps == 0 || self.steps > u8::MAX as usize {
            return Err(Error::InvalidConfig(format!("steps {} outside [1, 255]", self.steps)));
        }
        if self.inv_steps > self.steps {
            return Err(Error::InvalidConfig(format!(
                "inv_steps {} exceeds steps {}",
                self.inv_steps, self.steps
            )));
        }
        if self.channels == 0 || self.channels > DEFAULT_LATENT_CHANNELS {
            return Err(Error::InvalidConfig(format!(
                "channels {} outside [1, {DEFAULT_LATENT_CHANNELS}]",
                self.channels
            )));
        }
        self.gop_config()
            .validate()
            .map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn gop_config(&self) -> GopConfig {
        GopConfig {
            mode: self.mode,
            gop_size: self.gop_size,
            p_count: self.p_count,
            i_count: self.i_count,
        }
    }

    /// Codec settings with λ snapped to the container grid, so an encoder
    /// built from them matches a decoder built from the container header.
    pub fn codec_settings(&self) -> Result<CodecSettings> {
        Ok(CodecSettings {
            channels: self.channels,
            seed: self.seed,
            lambda: quantize_lambda(self.lambda)? as f64 / LAMBDA_SCALE,
            steps: self.steps,
            inv_steps: self.inv_steps,
            start_policy: self.start_policy,
            occlusion: self.occlusion,
        })
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!((c.steps, c.inv_steps), (30, 15));
    }

    #[test]
    fn keys_override_defaults() {
        let c = RunConfig::from_toml_str("mode = \"ldb\"\np_count = 3\nlambda = 128\nstart_step = \"literal\"").unwrap();
        assert_eq!(c.mode, GopMode::LowDelayB);
        assert_eq!(c.p_count, 3);
        assert_eq!(c.lambda, 128.0);
        assert_eq!(c.start_policy, StartPolicy::Literal);
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "lambda = 4.0",
            "lambda = 600.0",
            "steps = 10\ninv_steps = 11",
            "mode = \"XYZ\"",
            "colour = 1",
            "mode = \"RA\"\ni_count = 40",
            "[section]\nmode = \"AI\"",
        ] {
            assert!(matches!(RunConfig::from_toml_str(text), Err(Error::InvalidConfig(_))), "{text}");
        }
    }

    #[test]
    fn lambda_snaps_to_grid() {
        let c = RunConfig {
            lambda: 100.01,
            ..RunConfig::default()
        };
        assert_eq!(c.codec_settings().unwrap().lambda, 100.0);
    }
}
