//! Streaming estimation of the intensity correlation function
//! `Gamma(rho_a, rho_b) = <I_a I_b> - <I_a><I_b>` from paired frames.
//!
//! Accumulators keep raw moments (frame count, per-pixel sums and the
//! outer-product sum) and are mergeable, so per-worker partial results can
//! be combined in any merge tree. Analog input uses compensated summation;
//! binary input goes through a bit-packed path that transposes blocks of 64
//! frames into per-pixel words and counts coincidences with `AND` +
//! popcount.

mod accumulator;
mod bitpack;
mod tensor;

pub use accumulator::{CorrelationAccumulator, MomentSums};
pub use tensor::{CorrelationTensor, Normalization};
