//! Topology-preserving reduction of inductive power-grid networks.

pub mod ensemble;
pub mod grid;
pub mod io;
pub mod kron;
pub mod ledger;
pub mod metrics;
pub mod service;
pub mod topo;

pub use grid::{Bus, BusId, Line, LineKey, Network, NetworkError};
pub use kron::{KronError, LoopyLaplacian};
pub use ledger::{ExpansionTarget, LedgerError, ReductionLedger};
pub use topo::{Stage, Thresholds, TopoError};
