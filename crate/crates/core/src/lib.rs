//! Desk-scale system-level simulator for multi-panel mmWave downlink beam
//! management: grid-of-beams codebooks, proportional-fair MU-MIMO scheduling,
//! FTP3 traffic, and a from-scratch double-DQN beam-selection policy compared
//! against legacy max-RSRP selection.

pub mod codebook;
pub mod config;
pub mod ddqn;
pub mod error;
pub mod measurement;
pub mod metrics;
pub mod policy;
pub mod scheduler;
pub mod sim;
pub mod topology;
pub mod traffic;
