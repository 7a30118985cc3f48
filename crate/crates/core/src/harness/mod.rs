//! Objective and metrics, synthetic sequences, rate-distortion sweeps and
//! a small coordinate-descent tuner.

mod metrics;
mod sweep;
mod synth;
mod tune;

pub use metrics::{
    compute_loss, loss_from_terms, mse, perceptual_proxy, psnr, psnr_from_mse, DEFAULT_BETA, PROXY_SCALES, PSNR_CAP,
};
pub use sweep::{measure_sequence, rd_sweep, rd_sweep_detailed, write_csv, RdPoint, CSV_HEADER};
pub use synth::{latent_mask, square_side, square_x, synth_sequence, SequenceKind, SyntheticSequence, SQUARE_STEP};
pub use tune::{evaluate, tune, TunableParams, TuneResult};
