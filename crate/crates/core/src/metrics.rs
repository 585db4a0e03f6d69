//! Degree statistics and reduction reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::grid::{graph_density, Network};
use crate::ledger::{expand_all, removed_buses, FieldKey, LedgerError, ReductionLedger};

const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("invalid distribution: {0}")]
    Invalid(String),
    #[error("degree distribution of an empty network")]
    Empty,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// Probability mass over integer degrees.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DegreeDistribution(BTreeMap<usize, f64>);

impl DegreeDistribution {
    /// Masses must be non-negative and sum to one. Zero bins are dropped.
    pub fn new(bins: BTreeMap<usize, f64>) -> Result<Self, MetricsError> {
        if let Some((d, m)) = bins.iter().find(|(_, m)| !m.is_finite() || **m < 0.0) {
            return Err(MetricsError::Invalid(format!("mass {m} at degree {d}")));
        }
        let total: f64 = bins.values().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(MetricsError::Invalid(format!("masses sum to {total}")));
        }
        Ok(DegreeDistribution(bins.into_iter().filter(|(_, m)| *m > 0.0).collect()))
    }

    pub fn bins(&self) -> &BTreeMap<usize, f64> {
        &self.0
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().map(|(d, m)| *d as f64 * m).sum()
    }
}

pub fn degree_distribution(net: &Network) -> Result<DegreeDistribution, MetricsError> {
    let n = net.bus_count();
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for b in net.bus_ids() {
        *counts.entry(net.degree(b)).or_default() += 1;
    }
    Ok(DegreeDistribution(counts.into_iter().map(|(d, c)| (d, c as f64 / n as f64)).collect()))
}

/// Earth mover's distance with `|i - j|` ground cost, via the gap between
/// the two cumulative distributions.
pub fn wasserstein1(p: &DegreeDistribution, q: &DegreeDistribution) -> f64 {
    let mut support: Vec<usize> = p.0.keys().chain(q.0.keys()).copied().collect();
    support.sort_unstable();
    support.dedup();
    let (mut cp, mut cq, mut total) = (0.0, 0.0, 0.0);
    for w in support.windows(2) {
        cp += p.0.get(&w[0]).copied().unwrap_or(0.0);
        cq += q.0.get(&w[0]).copied().unwrap_or(0.0);
        total += (cp - cq).abs() * (w[1] - w[0]) as f64;
    }
    total
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageStats {
    pub label: String,
    pub buses: usize,
    pub lines: usize,
    pub density: Option<f64>,
    pub mean_degree: f64,
    pub std_degree: f64,
    pub max_degree: usize,
    pub distribution: DegreeDistribution,
}

impl StageStats {
    pub fn of(label: impl Into<String>, net: &Network) -> Result<Self, MetricsError> {
        let distribution = degree_distribution(net)?;
        let mean = distribution.mean();
        let var: f64 = distribution.bins().iter().map(|(d, m)| m * (*d as f64 - mean).powi(2)).sum();
        Ok(StageStats {
            label: label.into(),
            buses: net.bus_count(),
            lines: net.line_count(),
            density: graph_density(net).ok(),
            mean_degree: mean,
            std_degree: var.sqrt(),
            max_degree: distribution.bins().keys().next_back().copied().unwrap_or(0),
            distribution,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceEntry {
    pub from: String,
    pub to: String,
    pub value: f64,
}

/// Counts, degree statistics and cluster-size histograms of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReductionReport {
    pub stages: Vec<StageStats>,
    /// Buses per collapsed tree, root included, as size -> count.
    pub tree_lengths: BTreeMap<usize, usize>,
    /// Hidden buses per meta line, as size -> count.
    pub meta_edge_interiors: BTreeMap<usize, usize>,
    /// Buses absorbed per triangle base, as size -> count.
    pub triangle_absorbed: BTreeMap<usize, usize>,
    pub wasserstein: Vec<DistanceEntry>,
}

fn histogram(values: impl IntoIterator<Item = usize>) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for v in values {
        *h.entry(v).or_default() += 1;
    }
    h
}

fn mean_of(h: &BTreeMap<usize, usize>) -> Option<f64> {
    let n: usize = h.values().sum();
    (n > 0).then(|| h.iter().map(|(k, c)| (k * c) as f64).sum::<f64>() / n as f64)
}

impl ReductionReport {
    /// Builds the report from labelled stage networks (first is the
    /// input) and the ledger of the run.
    pub fn from_history(history: &[(String, Network)], ledger: &ReductionLedger) -> Result<Self, MetricsError> {
        let stages = history.iter().map(|(label, net)| StageStats::of(label.clone(), net)).collect::<Result<Vec<_>, _>>()?;
        let mut trees = Vec::new();
        let mut metas = Vec::new();
        let mut tris = Vec::new();
        for (key, items) in ledger.entries() {
            let hidden = removed_buses(items).len();
            match key {
                FieldKey::Tree(_) => trees.push(hidden + 1),
                FieldKey::Edge(_) => metas.push(hidden),
                FieldKey::Tri(_) => tris.push(hidden),
            }
        }
        let mut wasserstein = Vec::new();
        for w in stages.windows(2) {
            wasserstein.push(DistanceEntry { from: w[0].label.clone(), to: w[1].label.clone(), value: wasserstein1(&w[0].distribution, &w[1].distribution) });
        }
        if stages.len() > 2 {
            let (first, last) = (&stages[0], &stages[stages.len() - 1]);
            wasserstein.push(DistanceEntry { from: first.label.clone(), to: last.label.clone(), value: wasserstein1(&first.distribution, &last.distribution) });
        }
        Ok(ReductionReport { stages, tree_lengths: histogram(trees), meta_edge_interiors: histogram(metas), triangle_absorbed: histogram(tris), wasserstein })
    }

    /// Report comparing the fully expanded network with the current one.
    pub fn for_state(net: &Network, ledger: &ReductionLedger) -> Result<Self, MetricsError> {
        let original = expand_all(net, ledger)?;
        Self::from_history(&[("original".into(), original), ("current".into(), net.clone())], ledger)
    }

    /// Buses accounted for by the histograms; equals the number removed.
    pub fn removed_accounted(&self) -> usize {
        let trees: usize = self.tree_lengths.iter().map(|(len, c)| (len - 1) * c).sum();
        let metas: usize = self.meta_edge_interiors.iter().map(|(k, c)| k * c).sum();
        let tris: usize = self.triangle_absorbed.iter().map(|(k, c)| k * c).sum();
        trees + metas + tris
    }

    pub fn mean_tree_length(&self) -> Option<f64> {
        mean_of(&self.tree_lengths)
    }

    pub fn mean_meta_edge_interior(&self) -> Option<f64> {
        mean_of(&self.meta_edge_interiors)
    }

    /// Fixed-width summary table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>8} {:>8} {:>9} {:>7} {:>7} {:>5}", "stage", "|N|", "|E|", "density", "mean", "std", "max");
        for s in &self.stages {
            let density = s.density.map_or_else(|| "-".to_string(), |d| format!("{d:.5}"));
            let _ = writeln!(
                out,
                "{:<10} {:>8} {:>8} {:>9} {:>7.3} {:>7.3} {:>5}",
                s.label, s.buses, s.lines, density, s.mean_degree, s.std_degree, s.max_degree
            );
        }
        let fmt_mean = |m: Option<f64>| m.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        let _ = writeln!(out, "trees: {} (mean length {})", self.tree_lengths.values().sum::<usize>(), fmt_mean(self.mean_tree_length()));
        let _ = writeln!(
            out,
            "meta lines: {} (mean hidden buses {})",
            self.meta_edge_interiors.values().sum::<usize>(),
            fmt_mean(self.mean_meta_edge_interior())
        );
        let _ = writeln!(out, "triangle bases: {} (absorbed {})", self.triangle_absorbed.values().sum::<usize>(), self.triangle_absorbed.iter().map(|(k, c)| k * c).sum::<usize>());
        for w in &self.wasserstein {
            let _ = writeln!(out, "W1({} -> {}) = {:.6}", w.from, w.to, w.value);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Bus;
    use crate::topo::reduce_degree_one;
    use num_complex::Complex64;

    fn dist(pairs: &[(usize, f64)]) -> DegreeDistribution {
        DegreeDistribution::new(pairs.iter().copied().collect()).unwrap()
    }

    fn build(edges: &[(&str, &str)]) -> Network {
        let mut net = Network::new();
        for (a, b) in edges {
            for x in [a, b] {
                if !net.contains(&(*x).into()) {
                    net.add_bus(Bus::new(*x, 1.0));
                }
            }
            net.set_line(&(*a).into(), &(*b).into(), Complex64::new(0.0, -1.0));
        }
        net
    }

    #[test]
    fn small_distributions() {
        assert_eq!(degree_distribution(&build(&[("a", "b"), ("b", "c"), ("c", "a")])).unwrap(), dist(&[(2, 1.0)]));
        let path = degree_distribution(&build(&[("a", "b"), ("b", "c")])).unwrap();
        assert!((path.bins()[&1] - 2.0 / 3.0).abs() < 1e-15 && (path.bins()[&2] - 1.0 / 3.0).abs() < 1e-15);
        let star = degree_distribution(&build(&[("h", "a"), ("h", "b"), ("h", "c"), ("h", "d")])).unwrap();
        assert_eq!(star, dist(&[(1, 0.8), (4, 0.2)]));
        assert_eq!(degree_distribution(&Network::new()), Err(MetricsError::Empty));
    }

    #[test]
    fn distances() {
        assert_eq!(wasserstein1(&dist(&[(2, 1.0)]), &dist(&[(5, 1.0)])), 3.0);
        let p = dist(&[(1, 0.25), (4, 0.75)]);
        assert_eq!(wasserstein1(&p, &p), 0.0);
        assert_eq!(wasserstein1(&dist(&[(1, 0.5), (3, 0.5)]), &dist(&[(2, 1.0)])), 1.0);
    }

    #[test]
    fn invalid_masses() {
        assert!(DegreeDistribution::new([(1, 0.5)].into_iter().collect()).is_err());
        assert!(DegreeDistribution::new([(1, -0.5), (2, 1.5)].into_iter().collect()).is_err());
        assert!(DegreeDistribution::new([(1, f64::NAN)].into_iter().collect()).is_err());
    }

    #[test]
    fn tree_report() {
        let net = build(&[("b1", "b2"), ("b1", "b3"), ("b1", "b4"), ("b4", "b5"), ("b5", "b6"), ("b5", "b7"), ("b1", "r1"), ("r1", "r2"), ("r2", "b1")]);
        let (out, ledger) = reduce_degree_one(&net, &ReductionLedger::new()).unwrap();
        let report = ReductionReport::from_history(&[("input".into(), net.clone()), ("d1".into(), out.clone())], &ledger).unwrap();
        assert_eq!(report.tree_lengths, BTreeMap::from([(7, 1)]));
        assert_eq!(report.removed_accounted(), 6);
        assert!(report.table().contains("d1"));
        let same = ReductionReport::for_state(&out, &ledger).unwrap();
        assert_eq!(same.stages[0].buses, 9);

        let idle = ReductionReport::from_history(&[("input".into(), net)], &ReductionLedger::new()).unwrap();
        assert!(idle.tree_lengths.is_empty() && idle.meta_edge_interiors.is_empty() && idle.triangle_absorbed.is_empty());
    }
}
