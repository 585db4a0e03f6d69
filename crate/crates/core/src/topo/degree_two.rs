use std::collections::BTreeSet;

use num_complex::Complex64;

use super::degree_one::collapse_leaves;
use super::{Stage, TopoError};
use crate::grid::{BusId, Network};
use crate::ledger::{EdgeRecord, ReductionLedger, Step};

/// Series combination shown on the line that replaces a folded bus.
fn series(a: Complex64, b: Complex64) -> Complex64 {
    let sum = a + b;
    if sum == Complex64::new(0.0, 0.0) {
        sum
    } else {
        a * b / sum
    }
}

/// Folds every degree-two bus into a line between its neighbours,
/// smallest id first.
///
/// When the fold closes a sparsely connected triangle, one neighbour is
/// left as a leaf; it is collapsed on the spot together with any cascade
/// it starts.
pub fn reduce_degree_two(net: &Network, ledger: &ReductionLedger) -> Result<(Network, ReductionLedger), TopoError> {
    if !net.is_connected() {
        return Err(TopoError::Disconnected);
    }
    if let Some(low) = net.bus_ids().find(|b| net.degree(b) < 2) {
        return Err(TopoError::LowDegree(low.to_string(), net.degree(low)));
    }
    let mut net = net.clone();
    let mut ledger = ledger.clone();
    let mut queue: BTreeSet<BusId> = net.bus_ids().filter(|b| net.degree(b) == 2).cloned().collect();
    while let Some(node) = queue.pop_first() {
        if !net.contains(&node) || net.degree(&node) != 2 {
            continue;
        }
        if net.bus_count() <= 3 {
            return Err(TopoError::DegenerateRing(net.bus_count() - 1));
        }
        let ends: Vec<BusId> = net.neighbors(&node).cloned().collect();
        let (left, right) = (ends[0].clone(), ends[1].clone());
        let y_left = net.line(&node, &left).expect("line");
        let y_right = net.line(&node, &right).expect("line");
        let prior = net.line(&left, &right);
        let after = prior.unwrap_or_default() + series(y_left, y_right);
        let step = Step::Edge(EdgeRecord { seq: 0, left: left.clone(), node, right: right.clone(), y_left, y_right, prior, after });
        ledger.record(&mut net, step)?;

        let mut touched = vec![left.clone(), right.clone()];
        let leaves: BTreeSet<BusId> = [left, right].into_iter().filter(|b| net.degree(b) == 1).collect();
        if !leaves.is_empty() {
            if net.bus_count() <= 3 {
                return Err(TopoError::DegenerateRing(net.bus_count() - leaves.len()));
            }
            touched.extend(collapse_leaves(&mut net, &mut ledger, Stage::D2, leaves)?);
        }
        for b in touched {
            if net.contains(&b) && net.degree(&b) == 2 {
                queue.insert(b);
            }
        }
    }
    if net.bus_count() < 3 {
        return Err(TopoError::DegenerateRing(net.bus_count()));
    }
    ledger.refresh(&net);
    Ok((net, ledger))
}
