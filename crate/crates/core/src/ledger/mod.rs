//! Invertible record of a reduction run.
//!
//! The ledger keeps every removal as a self-contained [`Step`] that can be
//! replayed forward or undone exactly. The keyed field view (`t_<root>`,
//! `e_<a>_<b>`, `tri_<base>`) is rebuilt from the remaining steps, so a
//! partial expansion re-keys whatever it leaves behind without any extra
//! bookkeeping.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Bus, BusId, LineKey, Network};
use crate::topo::{Stage, Thresholds};

mod expand;
mod format;

pub use expand::{expand, expand_all, Expansion, ExpansionTarget};
pub use format::{deserialize, serialize};

pub const FORMAT_VERSION: u32 = 1;

/// Name of a ledger field.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldKey {
    /// Trees collapsed into a root bus.
    Tree(BusId),
    /// Strings hidden inside a meta line.
    Edge(LineKey),
    /// Buses absorbed by greedy triangle collapses into a base bus.
    Tri(BusId),
}

impl FieldKey {
    /// The surviving bus the field hangs off (the smaller end for lines).
    pub fn anchor(&self) -> &BusId {
        match self {
            FieldKey::Tree(b) | FieldKey::Tri(b) => b,
            FieldKey::Edge(k) => &k.a,
        }
    }
}

impl fmt::Display for FieldKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldKey::Tree(b) => write!(f, "t_{b}"),
            FieldKey::Edge(k) => write!(f, "e_{}_{}", k.a, k.b),
            FieldKey::Tri(b) => write!(f, "tri_{b}"),
        }
    }
}

/// One hop of a collapsed branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub seq: u64,
    pub stage: Stage,
    pub admittance: Complex64,
}

/// Leaf-first path to the root; `segments[k]` removed `path[k]` into
/// `path[k + 1]`. Segments shared by sibling paths repeat with equal seq.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub path: Vec<BusId>,
    pub segments: Vec<Segment>,
}

/// A degree-two bus folded into the line between its neighbours.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub seq: u64,
    pub left: BusId,
    pub node: BusId,
    pub right: BusId,
    pub y_left: Complex64,
    pub y_right: Complex64,
    /// Admittance of `left-right` before the fold, if that line existed.
    pub prior: Option<Complex64>,
    pub after: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rewire {
    pub neighbor: BusId,
    pub prior: Option<Complex64>,
    pub after: Complex64,
}

/// A bus merged into a triangle base, with its lines at that moment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsorbRecord {
    pub seq: u64,
    pub node: BusId,
    pub base: BusId,
    pub lines: Vec<(BusId, Complex64)>,
    pub rewires: Vec<Rewire>,
}

/// A leaf folded into its only neighbour.
#[derive(Clone, Debug, PartialEq)]
pub struct CollapseStep {
    pub seq: u64,
    pub stage: Stage,
    pub node: BusId,
    pub into: BusId,
    pub admittance: Complex64,
}

/// Atomic, exactly reversible removal of one bus.
#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Collapse(CollapseStep),
    Edge(EdgeRecord),
    Absorb(AbsorbRecord),
}

/// An entry of a ledger field.
#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    Branch(Branch),
    Edge(EdgeRecord),
    Nested { key: FieldKey, items: Vec<Item> },
    Absorbed(AbsorbRecord),
    /// Lines of a triangle base as they currently stand.
    Base { bus: BusId, lines: Vec<(BusId, Complex64)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: Stage,
    pub buses: usize,
    pub lines: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerHeader {
    pub format_version: u32,
    pub seed: Option<u64>,
    pub thresholds: Option<Thresholds>,
    pub stage_counts: Vec<StageCount>,
}

impl Default for LedgerHeader {
    fn default() -> Self {
        LedgerHeader { format_version: FORMAT_VERSION, seed: None, thresholds: None, stage_counts: Vec::new() }
    }
}

/// A field/member pair that has to be expanded first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Prerequisite {
    pub key: String,
    pub member: BusId,
}

impl fmt::Display for Prerequisite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.key, self.member)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LedgerError {
    #[error("no ledger field or member {0}")]
    NotFound(String),
    #[error("cannot expand {target} yet; expand first: {}", list(.prerequisites))]
    Dependency { target: String, prerequisites: Vec<Prerequisite> },
    #[error("inconsistent ledger at step {seq}: {reason}")]
    Integrity { seq: u64, reason: String },
    #[error("malformed target {0:?}")]
    BadTarget(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported ledger format version {0}")]
    Version(u32),
}

fn list(p: &[Prerequisite]) -> String {
    p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl Step {
    pub fn seq(&self) -> u64 {
        match self {
            Step::Collapse(c) => c.seq,
            Step::Edge(e) => e.seq,
            Step::Absorb(a) => a.seq,
        }
    }

    fn set_seq(&mut self, seq: u64) {
        match self {
            Step::Collapse(c) => c.seq = seq,
            Step::Edge(e) => e.seq = seq,
            Step::Absorb(a) => a.seq = seq,
        }
    }

    pub fn stage(&self) -> Stage {
        match self {
            Step::Collapse(c) => c.stage,
            Step::Edge(_) => Stage::D2,
            Step::Absorb(_) => Stage::Tri,
        }
    }

    /// The bus this step removes.
    pub fn node(&self) -> &BusId {
        match self {
            Step::Collapse(c) => &c.node,
            Step::Edge(e) => &e.node,
            Step::Absorb(a) => &a.node,
        }
    }

    /// Buses that must be present to undo the step.
    pub fn requires(&self) -> Vec<&BusId> {
        match self {
            Step::Collapse(c) => vec![&c.into],
            Step::Edge(e) => vec![&e.left, &e.right],
            Step::Absorb(a) => std::iter::once(&a.base).chain(a.lines.iter().map(|(n, _)| n)).collect(),
        }
    }

    /// Lines the step removed, created or changed.
    pub fn writes(&self) -> Vec<LineKey> {
        match self {
            Step::Collapse(c) => vec![LineKey::new(&c.node, &c.into)],
            Step::Edge(e) => vec![LineKey::new(&e.node, &e.left), LineKey::new(&e.node, &e.right), LineKey::new(&e.left, &e.right)],
            Step::Absorb(a) => a
                .lines
                .iter()
                .map(|(n, _)| LineKey::new(&a.node, n))
                .chain(a.rewires.iter().map(|r| LineKey::new(&a.base, &r.neighbor)))
                .collect(),
        }
    }

    /// True when `later` has to be undone before `self`.
    pub fn blocked_by(&self, later: &Step) -> bool {
        if later.seq() <= self.seq() {
            return false;
        }
        if self.requires().contains(&later.node()) {
            return true;
        }
        let mine = self.writes();
        later.writes().iter().any(|k| mine.contains(k))
    }

    /// Removes the bus from `net`, checking the network matches what the
    /// step expects, and moves its attributes to `archive`.
    pub fn apply(&self, net: &mut Network, archive: &mut BTreeMap<BusId, Bus>) -> Result<(), String> {
        let node = self.node();
        if !net.contains(node) {
            return Err(format!("bus {node} is not present"));
        }
        let expect = |lines: Vec<(&BusId, Complex64)>| -> Result<(), String> {
            let have: BTreeMap<&BusId, Complex64> = net.neighbors(node).map(|n| (n, net.line(node, n).unwrap_or(ZERO))).collect();
            let want: BTreeMap<&BusId, Complex64> = lines.into_iter().collect();
            if have != want {
                return Err(format!("lines of {node} differ from the record"));
            }
            Ok(())
        };
        match self {
            Step::Collapse(c) => {
                expect(vec![(&c.into, c.admittance)])?;
                move_to_archive(net, archive, node);
            }
            Step::Edge(e) => {
                expect(vec![(&e.left, e.y_left), (&e.right, e.y_right)])?;
                if net.line(&e.left, &e.right) != e.prior {
                    return Err(format!("line {}-{} differs from the record", e.left, e.right));
                }
                move_to_archive(net, archive, node);
                net.set_line(&e.left, &e.right, e.after);
            }
            Step::Absorb(a) => {
                expect(a.lines.iter().map(|(n, y)| (n, *y)).collect())?;
                for r in &a.rewires {
                    if net.line(&a.base, &r.neighbor) != r.prior {
                        return Err(format!("line {}-{} differs from the record", a.base, r.neighbor));
                    }
                }
                move_to_archive(net, archive, node);
                for r in &a.rewires {
                    net.set_line(&a.base, &r.neighbor, r.after);
                }
            }
        }
        Ok(())
    }

    /// Checks that the step can be reversed on `net` as it stands.
    pub fn check_undo(&self, net: &Network) -> Result<(), String> {
        if net.contains(self.node()) {
            return Err(format!("bus {} is already present", self.node()));
        }
        if let Some(missing) = self.requires().into_iter().find(|b| !net.contains(b)) {
            return Err(format!("bus {missing} is not present"));
        }
        match self {
            Step::Collapse(_) => {}
            Step::Edge(e) => {
                if net.line(&e.left, &e.right) != Some(e.after) {
                    return Err(format!("line {}-{} was changed after this step", e.left, e.right));
                }
            }
            Step::Absorb(a) => {
                if let Some(r) = a.rewires.iter().find(|r| net.line(&a.base, &r.neighbor) != Some(r.after)) {
                    return Err(format!("line {}-{} was changed after this step", a.base, r.neighbor));
                }
            }
        }
        Ok(())
    }

    /// Reintroduces the bus with its original attributes and lines.
    pub fn undo(&self, net: &mut Network, archive: &mut BTreeMap<BusId, Bus>) -> Result<(), String> {
        self.check_undo(net)?;
        let node = self.node();
        let bus = archive.remove(node).ok_or_else(|| format!("bus {node} is missing from the archive"))?;
        net.add_bus(bus);
        match self {
            Step::Collapse(c) => net.set_line(node, &c.into, c.admittance),
            Step::Edge(e) => {
                restore(net, &e.left, &e.right, e.prior);
                net.set_line(node, &e.left, e.y_left);
                net.set_line(node, &e.right, e.y_right);
            }
            Step::Absorb(a) => {
                for r in &a.rewires {
                    restore(net, &a.base, &r.neighbor, r.prior);
                }
                for (n, y) in &a.lines {
                    net.set_line(node, n, *y);
                }
            }
        }
        Ok(())
    }
}

fn move_to_archive(net: &mut Network, archive: &mut BTreeMap<BusId, Bus>, node: &BusId) {
    if let Some(bus) = net.remove_bus(node) {
        archive.insert(bus.id.clone(), bus);
    }
}

fn restore(net: &mut Network, x: &BusId, y: &BusId, prior: Option<Complex64>) {
    match prior {
        Some(v) => net.set_line(x, y, v),
        None => {
            net.remove_line(x, y);
        }
    }
}

/// Ordered field view plus the steps it is built from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReductionLedger {
    header: LedgerHeader,
    /// Remaining steps, ascending by seq.
    steps: Vec<Step>,
    /// Attributes of every bus currently removed.
    archive: BTreeMap<BusId, Bus>,
    /// Current lines of triangle bases, shown at the end of their field.
    bases: BTreeMap<BusId, Vec<(BusId, Complex64)>>,
    entries: IndexMap<FieldKey, Vec<Item>>,
}

impl ReductionLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn header(&self) -> &LedgerHeader {
        &self.header
    }

    pub fn header_mut(&mut self) -> &mut LedgerHeader {
        &mut self.header
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn archive(&self) -> &BTreeMap<BusId, Bus> {
        &self.archive
    }

    pub fn entries(&self) -> &IndexMap<FieldKey, Vec<Item>> {
        &self.entries
    }

    /// Looks a field up by its printed key.
    pub fn field(&self, key: &str) -> Option<(&FieldKey, &Vec<Item>)> {
        self.entries.iter().find(|(k, _)| k.to_string() == key)
    }

    pub fn next_seq(&self) -> u64 {
        self.steps.last().map_or(1, |s| s.seq() + 1)
    }

    pub fn step(&self, seq: u64) -> Option<&Step> {
        self.steps.binary_search_by_key(&seq, Step::seq).ok().map(|i| &self.steps[i])
    }

    /// The step that removed `node`, if it is still recorded.
    pub fn step_removing(&self, node: &BusId) -> Option<&Step> {
        self.steps.iter().find(|s| s.node() == node)
    }

    /// Applies a new step to `net` and records it with the next seq.
    pub(crate) fn record(&mut self, net: &mut Network, mut step: Step) -> Result<u64, LedgerError> {
        let seq = self.next_seq();
        step.set_seq(seq);
        step.apply(net, &mut self.archive).map_err(|reason| LedgerError::Integrity { seq, reason })?;
        self.steps.push(step);
        Ok(seq)
    }

    pub(crate) fn push_stage_count(&mut self, stage: Stage, net: &Network) {
        self.header.stage_counts.push(StageCount { stage, buses: net.bus_count(), lines: net.line_count() });
    }

    /// Refreshes base line lists from `net` and rebuilds the field view.
    pub(crate) fn refresh(&mut self, net: &Network) {
        self.bases.clear();
        for step in &self.steps {
            if let Step::Absorb(a) = step {
                if net.contains(&a.base) {
                    let lines = net.neighbors(&a.base).map(|n| (n.clone(), net.line(&a.base, n).unwrap_or(ZERO))).collect();
                    self.bases.insert(a.base.clone(), lines);
                }
            }
        }
        self.rebuild();
    }

    pub(crate) fn from_parts(header: LedgerHeader, mut steps: Vec<Step>, archive: BTreeMap<BusId, Bus>, bases: BTreeMap<BusId, Vec<(BusId, Complex64)>>) -> Self {
        steps.sort_by_key(Step::seq);
        let mut ledger = ReductionLedger { header, steps, archive, bases, entries: IndexMap::new() };
        ledger.rebuild();
        ledger
    }

    pub(crate) fn take_steps(&mut self, seqs: &BTreeSet<u64>) -> Vec<Step> {
        let (taken, kept): (Vec<Step>, Vec<Step>) = std::mem::take(&mut self.steps).into_iter().partition(|s| seqs.contains(&s.seq()));
        self.steps = kept;
        taken
    }

    pub(crate) fn archive_mut(&mut self) -> &mut BTreeMap<BusId, Bus> {
        &mut self.archive
    }

    /// Replays the field-building rules over the remaining steps.
    fn rebuild(&mut self) {
        let mut fields: IndexMap<FieldKey, Vec<Item>> = IndexMap::new();
        let mut pending: Vec<Item> = Vec::new();
        for (i, step) in self.steps.iter().enumerate() {
            match step {
                Step::Collapse(c) => {
                    let seg = Segment { seq: c.seq, stage: c.stage, admittance: c.admittance };
                    let moved = fields.shift_remove(&FieldKey::Tree(c.node.clone()));
                    let line_key = FieldKey::Edge(LineKey::new(&c.node, &c.into));
                    if let Some(items) = fields.shift_remove(&line_key) {
                        pending.push(Item::Nested { key: line_key, items });
                    }
                    let target = FieldKey::Tree(c.into.clone());
                    let list = fields.entry(target).or_default();
                    match moved {
                        Some(items) => {
                            for mut item in items {
                                if let Item::Branch(b) = &mut item {
                                    b.path.push(c.into.clone());
                                    b.segments.push(seg.clone());
                                }
                                list.push(item);
                            }
                        }
                        None => list.push(Item::Branch(Branch { path: vec![c.node.clone(), c.into.clone()], segments: vec![seg] })),
                    }
                    // a cascade of collapses files hidden lines under its final root
                    let cascades = matches!(self.steps.get(i + 1), Some(Step::Collapse(next)) if next.node == c.into);
                    if !cascades && !pending.is_empty() {
                        list.splice(0..0, pending.drain(..));
                    }
                }
                Step::Edge(e) => {
                    let from_left = fields.shift_remove(&FieldKey::Edge(LineKey::new(&e.node, &e.left)));
                    let from_right = fields.shift_remove(&FieldKey::Edge(LineKey::new(&e.node, &e.right)));
                    let tree_key = FieldKey::Tree(e.node.clone());
                    let tree = fields.shift_remove(&tree_key);
                    let list = fields.entry(FieldKey::Edge(LineKey::new(&e.left, &e.right))).or_default();
                    list.extend(from_left.into_iter().flatten());
                    list.extend(from_right.into_iter().flatten());
                    list.push(Item::Edge(e.clone()));
                    if let Some(items) = tree {
                        list.push(Item::Nested { key: tree_key, items });
                    }
                }
                Step::Absorb(a) => {
                    let inner = fields.shift_remove(&FieldKey::Tri(a.node.clone()));
                    let tree_key = FieldKey::Tree(a.node.clone());
                    let tree = fields.shift_remove(&tree_key);
                    let hidden: Vec<Item> = a
                        .lines
                        .iter()
                        .filter_map(|(n, _)| {
                            let key = FieldKey::Edge(LineKey::new(&a.node, n));
                            fields.shift_remove(&key).map(|items| Item::Nested { key, items })
                        })
                        .collect();
                    let list = fields.entry(FieldKey::Tri(a.base.clone())).or_default();
                    list.push(Item::Absorbed(a.clone()));
                    list.extend(inner.into_iter().flatten());
                    if let Some(items) = tree {
                        list.push(Item::Nested { key: tree_key, items });
                    }
                    list.extend(hidden);
                }
            }
        }
        for (key, list) in fields.iter_mut() {
            if let FieldKey::Tri(base) = key {
                if let Some(lines) = self.bases.get(base) {
                    list.push(Item::Base { bus: base.clone(), lines: lines.clone() });
                }
            }
        }
        self.entries = fields;
    }

    /// Top-level field whose contents include step `seq`.
    pub fn locate(&self, seq: u64) -> Option<&FieldKey> {
        self.entries.iter().find(|(_, items)| items_contain(items, seq)).map(|(k, _)| k)
    }

    /// Number of original buses a surviving bus stands for, itself included.
    pub fn cluster_size(&self, bus: &BusId) -> usize {
        let mut n = 1;
        for key in [FieldKey::Tree(bus.clone()), FieldKey::Tri(bus.clone())] {
            if let Some(items) = self.entries.get(&key) {
                n += removed_buses(items).len();
            }
        }
        n
    }

    /// Keys of the fields attached to `bus`: its tree and triangle fields
    /// and the meta lines it ends.
    pub fn fields_of(&self, bus: &BusId) -> Vec<String> {
        self.entries
            .keys()
            .filter(|k| match k {
                FieldKey::Tree(b) | FieldKey::Tri(b) => b == bus,
                FieldKey::Edge(l) => &l.a == bus || &l.b == bus,
            })
            .map(|k| k.to_string())
            .collect()
    }

    /// Buses hidden behind the fields attached to `bus`, with their
    /// archived attributes.
    pub fn hidden_buses(&self, bus: &BusId) -> Vec<&Bus> {
        let mut out = BTreeSet::new();
        for (key, items) in &self.entries {
            let attached = match key {
                FieldKey::Tree(b) | FieldKey::Tri(b) => b == bus,
                FieldKey::Edge(l) => &l.a == bus || &l.b == bus,
            };
            if attached {
                out.extend(removed_buses(items));
            }
        }
        out.into_iter().filter_map(|b| self.archive.get(&b)).collect()
    }
}

fn items_contain(items: &[Item], seq: u64) -> bool {
    items.iter().any(|item| match item {
        Item::Branch(b) => b.segments.iter().any(|s| s.seq == seq),
        Item::Edge(e) => e.seq == seq,
        Item::Absorbed(a) => a.seq == seq,
        Item::Nested { items, .. } => items_contain(items, seq),
        Item::Base { .. } => false,
    })
}

/// Every step seq inside a list of items.
pub fn step_seqs(items: &[Item]) -> BTreeSet<u64> {
    let mut out = BTreeSet::new();
    collect_seqs(items, &mut out);
    out
}

fn collect_seqs(items: &[Item], out: &mut BTreeSet<u64>) {
    for item in items {
        match item {
            Item::Branch(b) => out.extend(b.segments.iter().map(|s| s.seq)),
            Item::Edge(e) => {
                out.insert(e.seq);
            }
            Item::Absorbed(a) => {
                out.insert(a.seq);
            }
            Item::Nested { items, .. } => collect_seqs(items, out),
            Item::Base { .. } => {}
        }
    }
}

/// Buses removed by the steps inside a list of items.
pub fn removed_buses(items: &[Item]) -> BTreeSet<BusId> {
    let mut out = BTreeSet::new();
    collect_removed(items, &mut out);
    out
}

fn collect_removed(items: &[Item], out: &mut BTreeSet<BusId>) {
    for item in items {
        match item {
            Item::Branch(b) => out.extend(b.path[..b.path.len() - 1].iter().cloned()),
            Item::Edge(e) => {
                out.insert(e.node.clone());
            }
            Item::Absorbed(a) => {
                out.insert(a.node.clone());
            }
            Item::Nested { items, .. } => collect_removed(items, out),
            Item::Base { .. } => {}
        }
    }
}
