//! Priority data-movement orchestration over a deterministic flow-level
//! network simulator.
//!
//! The crate models the control plane that sits between a data-management
//! planner (Rucio-style dataflow requests), a transfer executor (FTS-style
//! queues feeding XRootD-style storage endpoints), and a network orchestrator
//! that provisions end-to-end guaranteed-rate services. Priority flows share
//! the manageable fraction of each link (80% by default) under weighted
//! max-min fairness; the remainder is reserved for best-effort traffic.
//!
//! Everything runs on a single-threaded discrete-event kernel with virtual
//! time, so whole scenarios are reproducible byte-for-byte. Batch evaluation
//! of many independent scenarios is data-parallel via rayon when the
//! `parallel` feature is enabled (the default).

pub mod batch;
pub mod cli;
pub mod dmm;
pub mod engine;
mod error;
pub mod ipv6;
pub mod orchestrator;
pub mod report;
pub mod rse;
pub mod scale;
pub mod scenario;
pub mod server;
pub mod sim;
pub mod site_rm;
pub mod synth;
pub mod topology;
pub mod transfer;
pub mod units;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
