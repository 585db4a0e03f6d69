//! Repeated greedy triangle runs over a range of seeds.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::grid::Network;
use crate::ledger::ReductionLedger;
use crate::topo::{greedy_triangle_reduce, reduce_degree_one, reduce_degree_two, Thresholds, TopoError};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleRun {
    pub seed: u64,
    /// Buses left after the triangle stage.
    pub buses: usize,
    pub collapses: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ensemble {
    /// Buses entering the triangle stage.
    pub start: usize,
    /// Runs in seed order.
    pub runs: Vec<EnsembleRun>,
    /// Final bus count to number of runs.
    pub histogram: BTreeMap<usize, usize>,
}

impl Ensemble {
    pub fn mean(&self) -> f64 {
        self.runs.iter().map(|r| r.buses as f64).sum::<f64>() / self.runs.len().max(1) as f64
    }
}

/// Runs the two degree stages once, then the triangle stage for each of
/// `runs` consecutive seeds starting at `seed`, in parallel.
///
/// Results do not depend on the thread count.
pub fn triangle_ensemble(net: &Network, thr: Thresholds, seed: u64, runs: usize) -> Result<Ensemble, TopoError> {
    let (net, ledger) = reduce_degree_one(net, &ReductionLedger::new())?;
    let (net, ledger) = reduce_degree_two(&net, &ledger)?;
    let seeds: Vec<u64> = (0..runs as u64).map(|k| seed.wrapping_add(k)).collect();
    let runs = seeds
        .par_iter()
        .map(|&s| {
            let (out, l) = greedy_triangle_reduce(&net, &ledger, thr, s)?;
            let collapses = (l.steps().len() - ledger.steps().len()) / 2;
            Ok(EnsembleRun { seed: s, buses: out.bus_count(), collapses })
        })
        .collect::<Result<Vec<_>, TopoError>>()?;
    let mut histogram = BTreeMap::new();
    for r in &runs {
        *histogram.entry(r.buses).or_insert(0) += 1;
    }
    Ok(Ensemble { start: net.bus_count(), runs, histogram })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{generate_synthetic, PocketSpec, SyntheticSpec};

    #[test]
    fn pockets_always_collapse() {
        let mut spec = SyntheticSpec::ring(8);
        spec.pockets.push(PocketSpec { anchors: [0, 2, 5] });
        let net = generate_synthetic(&spec).unwrap();
        let e = triangle_ensemble(&net, Thresholds::default(), 5, 6).unwrap();
        assert_eq!(e.start, 11);
        assert_eq!(e.histogram, BTreeMap::from([(9, 6)]));
        assert_eq!(e.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), (5..11).collect::<Vec<_>>());
        assert!(e.runs.iter().all(|r| r.collapses == 1));
    }
}
