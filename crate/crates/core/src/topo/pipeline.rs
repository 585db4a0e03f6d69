use std::collections::BTreeSet;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{greedy_triangle_reduce, reduce_degree_one, reduce_degree_two, Stage, Thresholds, TopoError};
use crate::grid::{validate, BusId, Network, ValidationMode};
use crate::kron::{adjacency_onto, currents_of, kron_reduce, laplacian_of, reduced_currents, CurrentVector, LoopyLaplacian};
use crate::ledger::{ReductionLedger, Step};
use crate::metrics::ReductionReport;

/// Merges a triangle of `q` into its first bus.
///
/// The three rows and columns are summed, so the merged bus carries the
/// sum of the three shunts and of the three currents.
pub fn aggregate_triangle_laplacian(q: &LoopyLaplacian, c: &CurrentVector, triple: [&BusId; 3]) -> Result<(LoopyLaplacian, CurrentVector), TopoError> {
    let not_triangle = || TopoError::NotTriangle(triple.map(ToString::to_string));
    let pos = triple.map(|b| q.position(b));
    let [Some(base), Some(p2), Some(p3)] = pos else {
        return Err(not_triangle());
    };
    let m = q.matrix();
    let zero = Complex64::new(0.0, 0.0);
    if base == p2 || base == p3 || p2 == p3 || m[(base, p2)] == zero || m[(base, p3)] == zero || m[(p2, p3)] == zero {
        return Err(not_triangle());
    }
    let n = q.len();
    let keep: Vec<usize> = (0..n).filter(|&i| i != p2 && i != p3).collect();
    let mut merge = DMatrix::<Complex64>::zeros(keep.len(), n);
    for (row, &col) in keep.iter().enumerate() {
        merge[(row, col)] = Complex64::new(1.0, 0.0);
        if col == base {
            merge[(row, p2)] = Complex64::new(1.0, 0.0);
            merge[(row, p3)] = Complex64::new(1.0, 0.0);
        }
    }
    let merged = &merge * m * merge.transpose();
    let index = keep.iter().map(|&i| q.index()[i].clone()).collect();
    Ok((LoopyLaplacian::new(merged, index)?, &merge * c))
}

/// Everything a reduction run produces.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    /// Admittance matrix of the reduced network.
    pub laplacian: LoopyLaplacian,
    /// Currents injected at the reduced buses, aligned with `laplacian`.
    pub currents: CurrentVector,
    /// Reduced topology.
    pub network: Network,
    pub ledger: ReductionLedger,
    pub report: ReductionReport,
}

impl PipelineOutput {
    /// The equivalent network as buses and lines: shunts and lines from
    /// `laplacian`, currents from `currents`, voltages from `original`.
    pub fn equivalent_network(&self, original: &Network) -> Result<Network, TopoError> {
        let mut net = adjacency_onto(&self.laplacian, original)?;
        for (i, id) in self.laplacian.index().iter().enumerate() {
            if let Some(bus) = net.bus_mut(id) {
                bus.injected_current = self.currents[i];
            }
        }
        Ok(net)
    }
}

/// Topology and ledger of a reduction run, without the numeric part.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub network: Network,
    pub ledger: ReductionLedger,
    pub report: ReductionReport,
}

/// Runs the requested stages (ascending order, each at most once) on any
/// network, without checking the inductive-network assumptions.
pub fn topological_reduction(net: &Network, stages: &[Stage], thr: Thresholds, seed: u64) -> Result<Reduction, TopoError> {
    run_stages(net, stages, thr, seed).map(|(r, _)| r)
}

/// Also returns the buses that entered the triangle stage (or the final
/// buses when there is none).
fn run_stages(net: &Network, stages: &[Stage], thr: Thresholds, seed: u64) -> Result<(Reduction, BTreeSet<BusId>), TopoError> {
    if stages.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TopoError::Threshold("stages must be distinct and in the order d1, d2, tri".into()));
    }
    let thr = Thresholds::new(thr.max_degree, thr.max_voltage_kv)?;
    let mut ledger = ReductionLedger::new();
    ledger.header_mut().seed = Some(seed);
    ledger.header_mut().thresholds = Some(thr);
    let mut history = vec![("input".to_string(), net.clone())];
    let mut current = net.clone();
    let mut references: Option<BTreeSet<BusId>> = None;
    for &stage in stages {
        let (next, next_ledger) = match stage {
            Stage::D1 => reduce_degree_one(&current, &ledger)?,
            Stage::D2 => reduce_degree_two(&current, &ledger)?,
            Stage::Tri => {
                references = Some(current.bus_ids().cloned().collect());
                greedy_triangle_reduce(&current, &ledger, thr, seed)?
            }
        };
        current = next;
        ledger = next_ledger;
        ledger.push_stage_count(stage, &current);
        log::info!("{}: {} buses, {} lines", stage.tag(), current.bus_count(), current.line_count());
        history.push((stage.tag().to_string(), current.clone()));
    }
    let references = references.unwrap_or_else(|| current.bus_ids().cloned().collect());
    let report = ReductionReport::from_history(&history, &ledger).map_err(|e| TopoError::Threshold(e.to_string()))?;
    ledger.refresh(&current);
    Ok((Reduction { network: current, ledger, report }, references))
}

/// Runs the requested stages (ascending order, each at most once) and
/// computes the power-flow equivalent of the result.
///
/// The buses surviving the degree-one and degree-two stages are kept by a
/// single Kron reduction of the input; each greedy triangle collapse is
/// then applied to the matrix in recorded order.
pub fn numeric_reduction_pipeline(net: &Network, stages: &[Stage], thr: Thresholds, seed: u64) -> Result<PipelineOutput, TopoError> {
    validate(net, ValidationMode::Strict)?;
    let (Reduction { network, ledger, report }, references) = run_stages(net, stages, thr, seed)?;

    let q = laplacian_of(net);
    let c = currents_of(net, q.index())?;
    let kr = kron_reduce(&q, &references)?;
    let mut currents = reduced_currents(&kr, q.index(), &c)?;
    let mut laplacian = kr.q_red;

    let absorbed: Vec<_> = ledger
        .steps()
        .iter()
        .filter_map(|s| match s {
            Step::Absorb(a) => Some(a),
            _ => None,
        })
        .collect();
    for pair in absorbed.chunks(2) {
        let [first, second] = pair else {
            return Err(TopoError::Threshold("unpaired triangle absorption in the ledger".into()));
        };
        if first.base != second.base {
            return Err(TopoError::NotTriangle([first.base.to_string(), first.node.to_string(), second.node.to_string()]));
        }
        (laplacian, currents) = aggregate_triangle_laplacian(&laplacian, &currents, [&first.base, &first.node, &second.node])?;
    }

    Ok(PipelineOutput { laplacian, currents, network, ledger, report })
}
