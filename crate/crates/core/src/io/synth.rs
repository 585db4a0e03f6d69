//! Synthetic grids with known reduction counts.
//!
//! The backbone is a Möbius ladder: a ring of `ring` buses with every bus
//! also tied to the one opposite. It is 3-regular and triangle-free, so
//! none of the stages touch it. Motifs hang off backbone buses:
//!
//! - a tree of given depth and branching disappears in the degree-one stage;
//! - a string of `length` buses (both backbone ends included) leaves
//!   `length - 2` buses to the degree-two stage;
//! - a fan of `size` buses around a backbone bus is a triangular mesh that
//!   the degree-two stage folds back into that bus;
//! - a pocket is a triangle of three new buses tied to three pairwise
//!   non-adjacent backbone buses; one greedy collapse removes two of them.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{validate_with_power, Bus, BusId, Network, ValidationMode};
use crate::ledger::ReductionLedger;
use crate::topo::{reduce_degree_one, reduce_degree_two};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub attach: usize,
    pub depth: usize,
    pub branching: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StringSpec {
    pub from: usize,
    pub to: usize,
    /// Buses on the string, both backbone ends included.
    pub length: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub attach: usize,
    pub size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PocketSpec {
    pub anchors: [usize; 3],
}

/// Nominal voltage (kV) per motif.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VoltageTiers {
    pub backbone: f64,
    pub strings: f64,
    pub trees: f64,
    pub meshes: f64,
    pub pockets: f64,
}

impl Default for VoltageTiers {
    fn default() -> Self {
        VoltageTiers { backbone: 345.0, strings: 138.0, trees: 69.0, meshes: 69.0, pockets: 69.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Backbone buses: even, at least 6.
    pub ring: usize,
    #[serde(default)]
    pub trees: Vec<TreeSpec>,
    #[serde(default)]
    pub strings: Vec<StringSpec>,
    #[serde(default)]
    pub meshes: Vec<MeshSpec>,
    #[serde(default)]
    pub pockets: Vec<PocketSpec>,
    #[serde(default)]
    pub tiers: VoltageTiers,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("invalid synthetic spec: {0}")]
    Invalid(String),
    #[error("synthetic spec gives a disconnected network")]
    Disconnected,
    #[error("synthetic spec is not predictable: {0}")]
    Unpredictable(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub buses: usize,
    pub lines: usize,
}

/// Network size after each stage, for a degree threshold of at least 4
/// and a voltage threshold at or above the pocket tier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Prediction {
    pub input: Counts,
    pub after_d1: Counts,
    pub after_d2: Counts,
    pub after_tri: Counts,
}

impl Prediction {
    /// Buses and lines removed by each of the three stages.
    pub fn removals(&self) -> [Counts; 3] {
        let diff = |a: Counts, b: Counts| Counts { buses: a.buses - b.buses, lines: a.lines - b.lines };
        [diff(self.input, self.after_d1), diff(self.after_d1, self.after_d2), diff(self.after_d2, self.after_tri)]
    }
}

fn tree_size(t: &TreeSpec) -> usize {
    (1..=t.depth).map(|i| t.branching.pow(i as u32)).sum()
}

impl SyntheticSpec {
    pub fn ring(n: usize) -> Self {
        SyntheticSpec { ring: n, trees: vec![], strings: vec![], meshes: vec![], pockets: vec![], tiers: VoltageTiers::default(), seed: 0 }
    }

    fn backbone_adjacent(&self, a: usize, b: usize) -> bool {
        let n = self.ring;
        let d = a.abs_diff(b);
        d == 1 || d == n - 1 || d == n / 2
    }

    fn check(&self) -> Result<(), SpecError> {
        let bad = |m: String| Err(SpecError::Invalid(m));
        if self.ring == 0 {
            return if self.trees.is_empty() && self.strings.is_empty() && self.meshes.is_empty() && self.pockets.is_empty() {
                Err(SpecError::Invalid("empty spec".into()))
            } else {
                Err(SpecError::Disconnected)
            };
        }
        if self.ring < 6 || self.ring % 2 == 1 {
            return bad(format!("ring must be even and at least 6, got {}", self.ring));
        }
        let idx = |i: usize, what: &str| {
            if i < self.ring {
                Ok(())
            } else {
                Err(SpecError::Invalid(format!("{what} index {i} outside the ring")))
            }
        };
        for t in &self.trees {
            idx(t.attach, "tree")?;
            if t.depth == 0 || t.branching == 0 {
                return bad("trees need depth and branching of at least 1".into());
            }
        }
        for s in &self.strings {
            idx(s.from, "string")?;
            idx(s.to, "string")?;
            if s.from == s.to || s.length < 3 {
                return bad("strings join two distinct backbone buses through at least one bus".into());
            }
        }
        for m in &self.meshes {
            idx(m.attach, "mesh")?;
            if m.size < 2 {
                return bad("meshes need at least 2 buses".into());
            }
        }
        for p in &self.pockets {
            for a in p.anchors {
                idx(a, "pocket")?;
            }
            let [a, b, c] = p.anchors;
            if a == b || b == c || a == c || self.backbone_adjacent(a, b) || self.backbone_adjacent(b, c) || self.backbone_adjacent(a, c) {
                return bad(format!("pocket anchors {:?} must be distinct and pairwise non-adjacent", p.anchors));
            }
        }
        Ok(())
    }

    pub fn predict(&self) -> Prediction {
        let trees: usize = self.trees.iter().map(tree_size).sum();
        let meshes: usize = self.meshes.iter().map(|m| m.size).sum();
        let mesh_lines: usize = self.meshes.iter().map(|m| 2 * m.size - 1).sum();
        let strings: usize = self.strings.iter().map(|s| s.length - 2).sum();
        let string_lines: usize = self.strings.iter().map(|s| s.length - 1).sum();
        // a string whose ends are already joined merges into that line
        let mut joined = BTreeSet::new();
        let mut string_lines_left = 0;
        for s in &self.strings {
            let pair = (s.from.min(s.to), s.from.max(s.to));
            if !self.backbone_adjacent(s.from, s.to) && joined.insert(pair) {
                string_lines_left += 1;
            }
        }
        let p = self.pockets.len();
        let input = Counts {
            buses: self.ring + trees + strings + meshes + 3 * p,
            lines: 3 * self.ring / 2 + trees + string_lines + mesh_lines + 6 * p,
        };
        let after_d1 = Counts { buses: input.buses - trees, lines: input.lines - trees };
        let after_d2 = Counts {
            buses: after_d1.buses - strings - meshes,
            lines: after_d1.lines - string_lines + string_lines_left - mesh_lines,
        };
        let after_tri = Counts { buses: after_d2.buses - 2 * p, lines: after_d2.lines - 3 * p };
        Prediction { input, after_d1, after_d2, after_tri }
    }
}

struct Builder {
    net: Network,
    rng: ChaCha8Rng,
}

impl Builder {
    fn bus(&mut self, id: String, kv: f64, shunt: bool) -> BusId {
        let current = Complex64::new(self.rng.random_range(-1.0..1.0), self.rng.random_range(-1.0..1.0));
        let mut bus = Bus::new(id, kv).with_current(current);
        if shunt {
            bus = bus.with_shunt(Complex64::new(0.0, -self.rng.random_range(0.05..0.2)));
        }
        let id = bus.id.clone();
        self.net.add_bus(bus);
        id
    }

    fn line(&mut self, a: &BusId, b: &BusId) {
        let y = Complex64::new(0.0, -self.rng.random_range(0.5..2.0));
        self.net.set_line(a, b, y);
    }
}

fn triangles(net: &Network) -> BTreeSet<[BusId; 3]> {
    let mut out = BTreeSet::new();
    for (k, _) in net.lines() {
        for c in net.neighbors(&k.a) {
            if c > &k.b && net.has_line(&k.b, c) {
                out.insert([k.a.clone(), k.b.clone(), c.clone()]);
            }
        }
    }
    out
}

/// Builds the network described by `spec` and checks that the stage counts
/// of [`SyntheticSpec::predict`] are forced by it.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Network, SpecError> {
    spec.check()?;
    let mut b = Builder { net: Network::new(), rng: ChaCha8Rng::seed_from_u64(spec.seed) };
    let tiers = spec.tiers;
    let ring: Vec<BusId> = (0..spec.ring).map(|i| b.bus(format!("r{i}"), tiers.backbone, true)).collect();
    for i in 0..spec.ring {
        b.line(&ring[i], &ring[(i + 1) % spec.ring]);
        if i < spec.ring / 2 {
            b.line(&ring[i], &ring[i + spec.ring / 2]);
        }
    }
    for (k, t) in spec.trees.iter().enumerate() {
        let mut level = vec![ring[t.attach].clone()];
        let mut count = 0;
        for _ in 0..t.depth {
            let mut next = Vec::new();
            for parent in &level {
                for _ in 0..t.branching {
                    count += 1;
                    let child = b.bus(format!("t{k}n{count}"), tiers.trees, false);
                    b.line(parent, &child);
                    next.push(child);
                }
            }
            level = next;
        }
    }
    for (k, s) in spec.strings.iter().enumerate() {
        let mut prev = ring[s.from].clone();
        for i in 1..s.length - 1 {
            let bus = b.bus(format!("s{k}n{i}"), tiers.strings, false);
            b.line(&prev, &bus);
            prev = bus;
        }
        b.line(&prev, &ring[s.to]);
    }
    for (k, m) in spec.meshes.iter().enumerate() {
        let hub = ring[m.attach].clone();
        let mut prev: Option<BusId> = None;
        for i in 1..=m.size {
            let bus = b.bus(format!("m{k}n{i}"), tiers.meshes, false);
            b.line(&hub, &bus);
            if let Some(p) = &prev {
                b.line(p, &bus);
            }
            prev = Some(bus);
        }
    }
    let mut pocket_sets = BTreeSet::new();
    for (k, p) in spec.pockets.iter().enumerate() {
        let corners: Vec<BusId> = (1..=3).map(|i| b.bus(format!("p{k}n{i}"), tiers.pockets, false)).collect();
        for i in 0..3 {
            b.line(&corners[i], &corners[(i + 1) % 3]);
            b.line(&corners[i], &ring[p.anchors[i]]);
        }
        let mut sorted = corners.clone();
        sorted.sort();
        pocket_sets.insert([sorted[0].clone(), sorted[1].clone(), sorted[2].clone()]);
    }
    let net = b.net;
    if !net.is_connected() {
        return Err(SpecError::Disconnected);
    }
    // purely inductive by construction, so the power balance needs no solve
    validate_with_power(&net, ValidationMode::Strict, None).map_err(|e| SpecError::Unpredictable(e.to_string()))?;

    let (after_d1, ledger) = reduce_degree_one(&net, &ReductionLedger::new()).map_err(|e| SpecError::Unpredictable(e.to_string()))?;
    let (after_d2, _) = reduce_degree_two(&after_d1, &ledger).map_err(|e| SpecError::Unpredictable(e.to_string()))?;
    let found = triangles(&after_d2);
    if let Some(extra) = found.difference(&pocket_sets).next() {
        return Err(SpecError::Unpredictable(format!("strings close an extra triangle {extra:?}")));
    }
    for p in &spec.pockets {
        let [a, c, d] = p.anchors.map(|i| &ring[i]);
        if after_d2.has_line(a, c) || after_d2.has_line(c, d) || after_d2.has_line(a, d) {
            return Err(SpecError::Unpredictable(format!("strings join the anchors of pocket {:?}", p.anchors)));
        }
    }
    Ok(net)
}
