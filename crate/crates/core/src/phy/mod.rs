//! Channel and receiver primitives.

pub mod channel;
pub mod conv;
pub mod llr;
pub mod quant;

pub use channel::{draw_channel, noise_variance, receive, ChannelRealization};
pub use llr::{ncv_llr, LlrMethod, LlrVector, NcvDemapper, LLR_MAX};
pub use quant::LlrQuantizer;
