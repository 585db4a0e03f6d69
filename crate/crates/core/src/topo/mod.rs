//! Topological reduction stages.
//!
//! Each stage mutates a [`Network`](crate::grid::Network) and records one
//! reversible step per removed bus in the
//! [`ReductionLedger`](crate::ledger::ReductionLedger).

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod degree_one;
mod degree_two;
mod pipeline;
mod triangle;

pub use degree_one::reduce_degree_one;
pub use degree_two::reduce_degree_two;
pub use pipeline::{aggregate_triangle_laplacian, numeric_reduction_pipeline, topological_reduction, PipelineOutput, Reduction};
pub use triangle::{eligible_nodes, greedy_triangle_reduce};

/// Thresholds for the greedy triangle stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Buses of this degree or more are never collapsed.
    pub max_degree: usize,
    /// Buses above this nominal voltage (kV) are never collapsed;
    /// `None` disables the filter.
    pub max_voltage_kv: Option<f64>,
}

impl Thresholds {
    pub fn new(max_degree: usize, max_voltage_kv: Option<f64>) -> Result<Self, TopoError> {
        if max_degree < 4 {
            return Err(TopoError::Threshold(format!("degree threshold must be at least 4, got {max_degree}")));
        }
        if let Some(v) = max_voltage_kv {
            if v.is_nan() || v < 0.0 {
                return Err(TopoError::Threshold(format!("voltage threshold must be non-negative, got {v}")));
            }
        }
        Ok(Thresholds { max_degree, max_voltage_kv })
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { max_degree: 6, max_voltage_kv: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    D1,
    D2,
    Tri,
}

impl Stage {
    pub fn tag(self) -> &'static str {
        match self {
            Stage::D1 => "d1",
            Stage::D2 => "d2",
            Stage::Tri => "tri",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = TopoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "d1" => Ok(Stage::D1),
            "d2" => Ok(Stage::D2),
            "tri" => Ok(Stage::Tri),
            other => Err(TopoError::Threshold(format!("unknown stage {other:?}; expected d1, d2 or tri"))),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TopoError {
    #[error("degenerate tree network: everything collapses into {0}")]
    DegenerateTree(String),
    #[error("degenerate ring network: only {0} buses would remain")]
    DegenerateRing(usize),
    #[error("network must be connected")]
    Disconnected,
    #[error("bus {0} has degree {1}; run the degree-one stage first")]
    LowDegree(String, usize),
    #[error("{0}")]
    Threshold(String),
    #[error("triple {0:?} is not a triangle")]
    NotTriangle([String; 3]),
    #[error(transparent)]
    Ledger(#[from] crate::ledger::LedgerError),
    #[error(transparent)]
    Kron(#[from] crate::kron::KronError),
    #[error(transparent)]
    Network(#[from] crate::grid::NetworkError),
}
