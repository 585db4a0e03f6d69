//! Shared generators and reference implementations for the integration
//! tests. Nothing here calls into the code under test except to build
//! inputs.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use gridreduce::kron::LoopyLaplacian;
use gridreduce::metrics::DegreeDistribution;
use gridreduce::{Bus, BusId, Network};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Proptest settings shared by the property files; inputs come from a
/// seed, so shrinking failures are reproducible without persistence files.
pub fn cases(n: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config { cases: n, failure_persistence: None, ..Default::default() }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn j(x: f64) -> Complex64 {
    Complex64::new(0.0, x)
}

pub fn name(i: usize) -> BusId {
    BusId::new(format!("b{i:03}"))
}

/// Random connected edge list: a random spanning tree plus `extra`
/// distinct chords.
pub fn random_edges(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> BTreeSet<(usize, usize)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = BTreeSet::new();
    for k in 1..n {
        let parent = order[rng.random_range(0..k)];
        let child = order[k];
        edges.insert((parent.min(child), parent.max(child)));
    }
    let max = n * (n - 1) / 2;
    let target = (edges.len() + extra).min(max);
    while edges.len() < target {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    edges
}

/// Inductive network on `edges` with random admittances, at least one
/// non-zero shunt and random injected currents.
pub fn strict_network(rng: &mut ChaCha8Rng, n: usize, edges: &BTreeSet<(usize, usize)>) -> Network {
    let tiers = [69.0, 138.0, 345.0];
    let grounded = rng.random_range(0..n);
    let mut net = Network::new();
    for i in 0..n {
        let mut bus = Bus::new(name(i), tiers[rng.random_range(0..3)]).with_current(Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        if i == grounded || rng.random_bool(0.3) {
            bus = bus.with_shunt(j(-rng.random_range(0.01..0.5)));
        }
        net.add_bus(bus);
    }
    for &(a, b) in edges {
        net.set_line(&name(a), &name(b), j(-rng.random_range(0.2..3.0)));
    }
    net
}

pub fn random_network(rng: &mut ChaCha8Rng, n: usize) -> Network {
    let extra = rng.random_range(n / 4..=n);
    let edges = random_edges(rng, n, extra);
    strict_network(rng, n, &edges)
}

pub fn with_zero_currents(net: &Network, keep: &BTreeSet<BusId>) -> Network {
    let mut out = net.clone();
    let ids: Vec<BusId> = out.bus_ids().cloned().collect();
    for id in ids {
        if !keep.contains(&id) {
            out.bus_mut(&id).unwrap().injected_current = Complex64::new(0.0, 0.0);
        }
    }
    out
}

/// Schur complement by eliminating one interior bus at a time with plain
/// loops, in the order given.
pub fn eliminate_in_order(q: &LoopyLaplacian, interior: &[BusId]) -> BTreeMap<(BusId, BusId), Complex64> {
    let ids: Vec<BusId> = q.index().to_vec();
    let n = ids.len();
    let mut m: Vec<Vec<Complex64>> = (0..n).map(|r| (0..n).map(|c| q.matrix()[(r, c)]).collect()).collect();
    let mut alive: Vec<bool> = vec![true; n];
    for bus in interior {
        let k = ids.iter().position(|b| b == bus).expect("interior bus in index");
        let pivot = m[k][k];
        for r in 0..n {
            if !alive[r] || r == k {
                continue;
            }
            let factor = m[r][k] / pivot;
            for c in 0..n {
                if alive[c] && c != k {
                    let above = m[k][c];
                    m[r][c] -= factor * above;
                }
            }
        }
        alive[k] = false;
    }
    let mut out = BTreeMap::new();
    for r in (0..n).filter(|&r| alive[r]) {
        for c in (0..n).filter(|&c| alive[c]) {
            out.insert((ids[r].clone(), ids[c].clone()), m[r][c]);
        }
    }
    out
}

/// Largest elementwise gap between a Laplacian and a reference map over
/// the same buses.
pub fn gap(q: &LoopyLaplacian, reference: &BTreeMap<(BusId, BusId), Complex64>) -> f64 {
    assert_eq!(q.len() * q.len(), reference.len(), "different bus sets");
    let mut worst = 0.0f64;
    for ((a, b), v) in reference {
        let got = q.get(a, b).expect("bus present in both");
        worst = worst.max((got - v).norm());
    }
    worst
}

/// Exact 1-D transport cost by successive shortest paths on the
/// bipartite supply/demand graph with |x - y| arc costs.
pub fn transport_cost(p: &DegreeDistribution, q: &DegreeDistribution) -> f64 {
    let sources: Vec<(f64, f64)> = p.bins().iter().map(|(&d, &m)| (d as f64, m)).collect();
    let sinks: Vec<(f64, f64)> = q.bins().iter().map(|(&d, &m)| (d as f64, m)).collect();
    let (ns, nt) = (sources.len(), sinks.len());
    // nodes: 0 = super source, 1..=ns sources, ns+1..=ns+nt sinks, last = super sink
    let n = ns + nt + 2;
    let sink = n - 1;
    let mut cap = vec![vec![0.0f64; n]; n];
    let mut cost = vec![vec![0.0f64; n]; n];
    for (i, &(_, m)) in sources.iter().enumerate() {
        cap[0][1 + i] = m;
    }
    for (k, &(_, m)) in sinks.iter().enumerate() {
        cap[1 + ns + k][sink] = m;
    }
    for (i, &(x, _)) in sources.iter().enumerate() {
        for (k, &(y, _)) in sinks.iter().enumerate() {
            let (u, v) = (1 + i, 1 + ns + k);
            cap[u][v] = f64::INFINITY;
            cost[u][v] = (x - y).abs();
            cost[v][u] = -(x - y).abs();
        }
    }
    let eps = 1e-15;
    let mut total = 0.0;
    loop {
        // Bellman-Ford over the residual graph
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        dist[0] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if dist[u].is_infinite() {
                    continue;
                }
                for v in 0..n {
                    if cap[u][v] > eps && dist[u] + cost[u][v] < dist[v] - 1e-15 {
                        dist[v] = dist[u] + cost[u][v];
                        prev[v] = u;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink].is_infinite() {
            return total;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        while v != 0 {
            let u = prev[v];
            push = push.min(cap[u][v]);
            v = u;
        }
        let mut v = sink;
        while v != 0 {
            let u = prev[v];
            cap[u][v] -= push;
            cap[v][u] += push;
            v = u;
        }
        total += push * dist[sink];
    }
}

pub fn random_distribution(rng: &mut ChaCha8Rng, max_support: usize) -> DegreeDistribution {
    let support = rng.random_range(1..=max_support);
    let mut bins = BTreeMap::new();
    while bins.len() < support {
        bins.insert(rng.random_range(1..60usize), rng.random_range(0.01..1.0f64));
    }
    let total: f64 = bins.values().sum();
    for m in bins.values_mut() {
        *m /= total;
    }
    DegreeDistribution::new(bins).unwrap()
}

/// Whether some path in `net` runs from a bus in `from` to a bus in `to`
/// with every intermediate bus in `interior`. Plain depth-first search
/// over simple paths.
pub fn path_through(net: &Network, from: &BTreeSet<BusId>, to: &BTreeSet<BusId>, interior: &BTreeSet<BusId>) -> bool {
    fn walk(net: &Network, at: &BusId, to: &BTreeSet<BusId>, interior: &BTreeSet<BusId>, seen: &mut BTreeSet<BusId>) -> bool {
        for next in net.neighbors(at) {
            if to.contains(next) {
                return true;
            }
            if interior.contains(next) && !seen.contains(next) {
                seen.insert(next.clone());
                if walk(net, next, to, interior, seen) {
                    return true;
                }
                seen.remove(next);
            }
        }
        false
    }
    from.iter().any(|start| {
        let mut seen = BTreeSet::from([start.clone()]);
        walk(net, start, to, interior, &mut seen)
    })
}

/// Every labelled connected graph on `n` vertices.
pub fn all_connected_graphs(n: usize) -> Vec<BTreeSet<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let edges: BTreeSet<(usize, usize)> = pairs.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &e)| e).collect();
        let mut reach = vec![false; n];
        reach[0] = true;
        let mut stack = vec![0];
        while let Some(u) = stack.pop() {
            for &(a, b) in &edges {
                let v = if a == u { b } else if b == u { a } else { continue };
                if !reach[v] {
                    reach[v] = true;
                    stack.push(v);
                }
            }
        }
        if reach.iter().all(|&r| r) {
            out.push(edges);
        }
    }
    out
}

/// Random synthetic spec that the generator accepts, with the network.
/// Motifs are added one at a time; a motif the generator rejects is
/// dropped and another drawn.
pub fn random_synthetic(rng: &mut ChaCha8Rng, half_ring: std::ops::RangeInclusive<usize>, motifs: usize) -> (gridreduce::io::SyntheticSpec, Network) {
    use gridreduce::io::{generate_synthetic, MeshSpec, PocketSpec, StringSpec, SyntheticSpec, TreeSpec};
    let ring = 2 * rng.random_range(half_ring);
    let mut spec = SyntheticSpec::ring(ring);
    spec.seed = rng.random();
    let wanted = rng.random_range(0..=motifs);
    let mut attempts = 0;
    while spec.trees.len() + spec.strings.len() + spec.meshes.len() + spec.pockets.len() < wanted && attempts < 4 * motifs {
        attempts += 1;
        let mut next = spec.clone();
        match rng.random_range(0..4) {
            0 => next.trees.push(TreeSpec { attach: rng.random_range(0..ring), depth: rng.random_range(1..=3), branching: rng.random_range(1..=3) }),
            1 => {
                let from = rng.random_range(0..ring);
                let to = if rng.random_bool(0.5) { (from + 1) % ring } else { rng.random_range(0..ring) };
                next.strings.push(StringSpec { from, to, length: rng.random_range(3..=7) });
            }
            2 => next.meshes.push(MeshSpec { attach: rng.random_range(0..ring), size: rng.random_range(2..=6) }),
            _ => next.pockets.push(PocketSpec { anchors: [0; 3].map(|_| rng.random_range(0..ring)) }),
        }
        if generate_synthetic(&next).is_ok() {
            spec = next;
        }
    }
    let net = generate_synthetic(&spec).expect("accepted above");
    (spec, net)
}

/// `side` x `side` grid with one diagonal per cell, so interior buses have
/// degree six and neighbouring triangles share edges.
pub fn triangulated_grid(side: usize) -> Network {
    let id = |r: usize, c: usize| BusId::new(format!("g{r:02}_{c:02}"));
    let mut net = Network::new();
    for r in 0..side {
        for c in 0..side {
            net.add_bus(Bus::new(id(r, c), 69.0).with_shunt(j(-0.1)));
        }
    }
    for r in 0..side {
        for c in 0..side {
            if c + 1 < side {
                net.set_line(&id(r, c), &id(r, c + 1), j(-1.0));
            }
            if r + 1 < side {
                net.set_line(&id(r, c), &id(r + 1, c), j(-1.0));
            }
            if r + 1 < side && c + 1 < side {
                net.set_line(&id(r, c), &id(r + 1, c + 1), j(-1.0));
            }
        }
    }
    net
}
