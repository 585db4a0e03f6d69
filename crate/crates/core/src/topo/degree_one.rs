use std::collections::BTreeSet;

use super::{Stage, TopoError};
use crate::grid::{BusId, Network};
use crate::ledger::{CollapseStep, ReductionLedger, Step};

/// Collapses leaves into their neighbour, smallest id first, until no bus
/// of degree below two is left. Cascades onto the neighbour when it
/// becomes a leaf in turn. Returns the buses the cascades ended at.
pub(super) fn collapse_leaves(
    net: &mut Network,
    ledger: &mut ReductionLedger,
    stage: Stage,
    mut leaves: BTreeSet<BusId>,
) -> Result<Vec<BusId>, TopoError> {
    let mut roots = Vec::new();
    while let Some(leaf) = leaves.pop_first() {
        if !net.contains(&leaf) || net.degree(&leaf) != 1 {
            continue;
        }
        if net.bus_count() <= 2 {
            let survivor = net.bus_ids().find(|b| **b != leaf).unwrap_or(&leaf).to_string();
            return Err(TopoError::DegenerateTree(survivor));
        }
        let root = net.neighbors(&leaf).next().cloned().expect("degree one");
        let admittance = net.line(&leaf, &root).expect("line to the only neighbour");
        ledger.record(net, Step::Collapse(CollapseStep { seq: 0, stage, node: leaf, into: root.clone(), admittance }))?;
        if net.degree(&root) == 1 {
            leaves.insert(root);
        } else {
            roots.push(root);
        }
    }
    Ok(roots)
}

/// Removes every tree hanging off the network, keeping the root ids.
///
/// Fails on a disconnected input and on a network that is itself a tree.
pub fn reduce_degree_one(net: &Network, ledger: &ReductionLedger) -> Result<(Network, ReductionLedger), TopoError> {
    if !net.is_connected() {
        return Err(TopoError::Disconnected);
    }
    if net.bus_count() == 1 {
        return Err(TopoError::DegenerateTree(net.bus_ids().next().map(ToString::to_string).unwrap_or_default()));
    }
    let mut net = net.clone();
    let mut ledger = ledger.clone();
    let leaves: BTreeSet<BusId> = net.bus_ids().filter(|b| net.degree(b) < 2).cloned().collect();
    collapse_leaves(&mut net, &mut ledger, Stage::D1, leaves)?;
    ledger.refresh(&net);
    Ok((net, ledger))
}
