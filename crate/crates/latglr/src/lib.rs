//! File formats, JSON dumps, instance generation and oracle checks around
//! [`latglr_core`]. The `latglr` binary is a thin command-line layer over
//! this crate.

pub mod bench;
pub mod check;
pub mod dump;
pub mod instance;
pub mod pipeline;

pub use latglr_core as core;
