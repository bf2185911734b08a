//! Adaptive binary mapping selection.
//!
//! The off-line stage ranks mapping matrices for every singular fade state
//! of a terminal pair. The on-line stage picks one matrix per access point
//! for the actual channel such that the stacked matrix is invertible.

pub mod atlas;
pub mod offline;
pub mod online;
pub mod pairing;

pub use atlas::{AtlasHeader, FORMAT_VERSION};
pub use offline::{offline_search, Candidate, CandidateTable, PruneSettings, SfsEntry, DEFAULT_LIST_CAP};
pub use online::{
    allocate_rows, assemble, embed_pair, fallback_assignment, nearest_sfs, online_select, ApChoice, Assignment,
};
pub use pairing::{pair_mts, strongest_pair, PairingPlan};
