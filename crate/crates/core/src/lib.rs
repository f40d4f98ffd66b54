//! Learned variable fixing for supply-chain planning MIPs.

pub mod config;
pub mod drl;
pub mod features;
pub mod learn;
pub mod metrics;
pub mod mip;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod scp;
pub mod solve;
