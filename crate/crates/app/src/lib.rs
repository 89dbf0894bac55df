//! Survey HTTP service and batch CLI over the `coselect-core` pipeline.

pub mod analysis;
pub mod cli;
pub mod server;
pub mod store;
