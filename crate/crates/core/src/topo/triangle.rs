use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Thresholds, TopoError};
use crate::grid::{BusId, Network};
use crate::ledger::{AbsorbRecord, ReductionLedger, Rewire, Step};

/// Buses allowed to take part in a triangle collapse.
///
/// A bus is excluded when its own nominal voltage, or that of any bus
/// hidden behind its tree, triangle or meta-line fields, exceeds
/// `max_voltage_kv`. Ascending id order.
pub fn eligible_nodes(net: &Network, ledger: &ReductionLedger, max_voltage_kv: Option<f64>) -> Vec<BusId> {
    let Some(limit) = max_voltage_kv else {
        return net.bus_ids().cloned().collect();
    };
    net.buses()
        .filter(|bus| bus.nominal_voltage <= limit)
        .filter(|bus| ledger.hidden_buses(&bus.id).iter().all(|h| h.nominal_voltage <= limit))
        .map(|bus| bus.id.clone())
        .collect()
}

fn find_triangle(net: &Network, base: &BusId, open: &BTreeSet<BusId>, max_degree: usize) -> Option<(BusId, BusId)> {
    let candidates: Vec<&BusId> = net.neighbors(base).filter(|n| open.contains(*n) && net.degree(n) < max_degree).collect();
    for (i, a) in candidates.iter().enumerate() {
        for b in &candidates[i + 1..] {
            if net.has_line(a, b) {
                return Some(((*a).clone(), (*b).clone()));
            }
        }
    }
    None
}

/// Merges `node` into `base`, moving its lines over; lines that would
/// double an existing one are folded into it and the line to `base` is
/// dropped.
fn absorb(net: &mut Network, ledger: &mut ReductionLedger, node: &BusId, base: &BusId) -> Result<(), TopoError> {
    let lines: Vec<(BusId, _)> = net.neighbors(node).map(|n| (n.clone(), net.line(node, n).expect("line"))).collect();
    let rewires = lines
        .iter()
        .filter(|(n, _)| n != base)
        .map(|(n, y)| {
            let prior = net.line(base, n);
            Rewire { neighbor: n.clone(), prior, after: prior.unwrap_or_default() + y }
        })
        .collect();
    let step = Step::Absorb(AbsorbRecord { seq: 0, node: node.clone(), base: base.clone(), lines, rewires });
    ledger.record(net, step)?;
    Ok(())
}

/// Greedily collapses triangles of low-degree, low-voltage buses.
///
/// Bases are visited in a seeded random order (ChaCha8 stream,
/// Fisher-Yates shuffle). While the base is below the degree threshold,
/// the first neighbour pair (ascending ids) that closes a triangle of
/// eligible buses below the threshold is absorbed into it. After any
/// collapse the scan restarts from a fresh shuffle.
pub fn greedy_triangle_reduce(net: &Network, ledger: &ReductionLedger, thr: Thresholds, seed: u64) -> Result<(Network, ReductionLedger), TopoError> {
    let thr = Thresholds::new(thr.max_degree, thr.max_voltage_kv)?;
    let mut net = net.clone();
    let mut ledger = ledger.clone();
    let mut open: BTreeSet<BusId> = eligible_nodes(&net, &ledger, thr.max_voltage_kv).into_iter().collect();
    if open.len() < 3 {
        return Ok((net, ledger));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<BusId> = open.iter().cloned().collect();
    order.shuffle(&mut rng);
    let mut k = 0;
    while k < order.len() {
        let base = order[k].clone();
        let mut collapsed = false;
        while net.degree(&base) < thr.max_degree {
            let Some((b2, b3)) = find_triangle(&net, &base, &open, thr.max_degree) else {
                break;
            };
            absorb(&mut net, &mut ledger, &b2, &base)?;
            absorb(&mut net, &mut ledger, &b3, &base)?;
            open.remove(&b2);
            open.remove(&b3);
            log::debug!("triangle {base} {b2} {b3} -> degree {}", net.degree(&base));
            collapsed = true;
        }
        if collapsed {
            order.retain(|b| open.contains(b));
            order.shuffle(&mut rng);
            k = 0;
        } else {
            k += 1;
        }
    }
    ledger.refresh(&net);
    Ok((net, ledger))
}
