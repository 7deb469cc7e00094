//! Soft-output multiuser detection for uplink MIMO receivers with one-bit ADCs.
//!
//! The crate covers the whole link: Gray-mapped modulation and the lifted
//! real-valued channel ([`baseband`]), the spatial-domain code seen through
//! the one-bit quantizer ([`spatial_code`]), the SO / SCSO / ordered-SCSO
//! weighted-Hamming detectors plus ML and ZF references ([`detectors`]),
//! polar coding with SC decoding ([`fec`]) and a deterministic Monte-Carlo
//! FER harness ([`sim`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseband;
pub mod detectors;
mod error;
pub mod fec;
pub mod selftest;
pub mod sim;
pub mod spatial_code;

pub use error::{Error, Result};
