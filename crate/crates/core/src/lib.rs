//! Group-relative reward machinery for generative judges.
//!
//! - [`ranking_io`] parses and formats judge outputs (analysis, ranking, scores).
//! - [`rewards`] turns a judgment and ground truth into a gated reward.
//! - [`advantage`] standardizes group rewards and diagnoses vanished groups.
//! - [`policy_opt`] holds the clipped-plus-SFT objective and a toy
//!   training loop that contrasts group-ranking and saturating pointwise
//!   reward providers.
//! - [`datagen`], [`analysis`] and [`io_formats`] cover data construction,
//!   evaluation and the JSONL/CSV wire formats.

pub mod advantage;
pub mod analysis;
pub mod datagen;
pub mod error;
pub mod io_formats;
pub mod policy_opt;
pub mod ranking_io;
pub mod rewards;
pub mod types;

pub use error::{Error, Result};
