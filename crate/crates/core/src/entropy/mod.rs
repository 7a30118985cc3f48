//! Probability models, rate estimation and byte-exact range coding of
//! quantised symbols.
//!
//! Payload layout: the coder emits its renormalisation bytes most
//! significant first and ends with four flush bytes, so an empty symbol
//! stream encodes to exactly four bytes.

mod model;
mod prior;
pub mod range_coder;

pub use model::{
    estimate_rate, range_decode, range_encode, Bitpayload, SymbolDistribution, SymbolModel, UniformModel, PROB_BITS,
    PROB_TOTAL, SIGMA_MIN,
};
pub use prior::{context_params, PriorParams};
