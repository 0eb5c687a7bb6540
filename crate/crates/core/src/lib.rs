//! Topology-reconfigurable OAM line-of-sight links: array geometry, channel
//! models, transceiver chain, performance metrics, topology optimization and
//! reconfiguration cost.

pub mod channel;
pub mod geometry;
pub mod metrics;
pub mod numerics;
pub mod optimizer;
pub mod reconfig;
pub mod transceiver;

pub use num_complex::Complex64;
