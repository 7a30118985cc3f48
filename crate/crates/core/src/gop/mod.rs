//! Group-of-pictures scheduling, reference handling and the per-frame
//! coding loop.

mod codec;
mod occlusion;
mod schedule;

use std::collections::BTreeMap;

pub use codec::{
    Codec, CodecSettings, EncodedFrame, EncodedRecord, EncodedSequence, FrameReconstruction, StartPolicy,
};
pub use occlusion::{fuse_references, occlusion_estimate, OcclusionMap, OcclusionMode, OcclusionNet, DEFAULT_SHARPNESS};
pub use schedule::{
    schedule, sequence_schedule, FrameType, GopConfig, GopMode, GopSchedule, ScheduleEntry, DEFAULT_GOP_SIZE,
    DEFAULT_I_COUNT, DEFAULT_P_COUNT,
};

use crate::error::{Error, Result};
use crate::tensor::LatentFeature;

/// Decoded latents keyed by display index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureBuffer {
    entries: BTreeMap<usize, LatentFeature>,
}

impl FeatureBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, display_index: usize, latent: LatentFeature) {
        self.entries.insert(display_index, latent);
    }

    pub fn get(&self, display_index: usize) -> Option<&LatentFeature> {
        self.entries.get(&display_index)
    }

    /// Reference `needed` on behalf of frame `display_index`.
    pub fn fetch(&self, needed: usize, display_index: usize) -> Result<&LatentFeature> {
        self.entries
            .get(&needed)
            .ok_or(Error::MissingReference { display_index, needed })
    }

    pub fn contains(&self, display_index: usize) -> bool {
        self.entries.contains_key(&display_index)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}
