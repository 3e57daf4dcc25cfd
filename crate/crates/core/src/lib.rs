//! Deterministic discrete-time simulator of privacy-aware computational
//! offloading at the network edge.
//!
//! Users move over a rectangular service area, associate with their nearest
//! base station (BS), and request that their application be offloaded to a
//! MEC host (MH). When a user asks for location privacy, the network provider
//! reports an obfuscated location to the MEC provider, which then selects the
//! MH closest to the BS it *presumes* the user is attached to. The request is
//! admitted only if latency, radio throughput and MH capacity all suffice.
//!
//! The crate is organised bottom-up:
//!
//! - [`topology`]: BS/MH deployment and exact nearest-neighbour queries.
//! - [`mobility`]: per-second position traces (ingested or synthetic).
//! - [`privacy`]: planar-Laplace and uniform-disk location obfuscation.
//! - [`link`]: path loss, Shannon capacity, proportional-fair sharing, latency.
//! - [`engine`]: the per-timestep offloading protocol and experiment driver.
//! - [`metrics`]: outcome classification and confidence-interval reporting.
//! - [`config`], [`outcome`], [`report`], [`manifest`]: file interfaces.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod link;
pub mod manifest;
pub mod metrics;
pub mod mobility;
pub mod outcome;
pub mod privacy;
pub mod report;
pub mod rng;
pub mod topology;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use geometry::{Area, Point};
