//! Adaptive binary physical-layer network coding for network-MIMO uplinks.
//!
//! Each access point maps the superposition it receives from several mobile
//! terminals to a binary network-coded vector `x_j = G_j w` and forwards only
//! that vector; the central unit inverts the stacked global matrix over GF(2).
//! Mapping matrices are chosen so that symbol tuples which clash at a singular
//! fade state land in the same cluster while distinct clusters stay far apart.
//!
//! Module map:
//! - [`gf2`]: binary matrices, rank, inversion, enumeration.
//! - [`modem`]: Gray-labelled square QAM and joint message/symbol sets.
//! - [`sfs`]: singular fade states, clash partitions, cluster distances.
//! - [`bmas`]: off-line candidate tables and on-line per-channel selection.
//! - [`phy`]: fading, noise, soft demapping, convolutional code, quantizer.
//! - [`baselines`]: ideal and quantized CoMP receivers, backhaul accounting.
//! - [`sim`]: Monte-Carlo outage harness and result files.
//! - [`verify`]: brute-force consistency checks for candidate tables.

pub mod error;
pub mod baselines;
pub mod bmas;
pub mod gf2;
pub mod modem;
pub mod phy;
pub mod sfs;
pub mod sim;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
