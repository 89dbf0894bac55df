//! Collective similarity analysis for design catalogs.
//!
//! Respondents repeatedly group similar designs from random panels. The
//! resulting selections are folded into co-occurrence and co-selection
//! counts, normalized into pairwise similarity, thresholded into a network,
//! and partitioned with Girvan–Newman community detection.

pub mod community;
pub mod graph;
pub mod matrices;
pub mod metrics;
pub mod pipeline;
pub mod simulator;
pub mod survey;
pub mod sweep;
