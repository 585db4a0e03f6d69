//! Grid domain types and pure-topology primitives.
//!
//! A [`Network`] is a simple undirected graph of [`Bus`]es joined by
//! [`Line`]s carrying complex admittances. Self loops are not lines: they
//! live on the bus as its shunt admittance.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stable bus identifier. Ordering is plain string ordering.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(String);

impl BusId {
    pub fn new(id: impl Into<String>) -> Self {
        BusId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BusId {
    fn from(s: &str) -> Self {
        BusId(s.to_owned())
    }
}

impl From<String> for BusId {
    fn from(s: String) -> Self {
        BusId(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    /// Nominal voltage in kV.
    pub nominal_voltage: f64,
    /// Self-loop admittance in siemens.
    pub shunt_admittance: Complex64,
    /// Injected current in amperes.
    pub injected_current: Complex64,
}

impl Bus {
    pub fn new(id: impl Into<BusId>, nominal_voltage: f64) -> Self {
        Bus {
            id: id.into(),
            nominal_voltage,
            shunt_admittance: Complex64::new(0.0, 0.0),
            injected_current: Complex64::new(0.0, 0.0),
        }
    }

    pub fn with_shunt(mut self, shunt: Complex64) -> Self {
        self.shunt_admittance = shunt;
        self
    }

    pub fn with_current(mut self, current: Complex64) -> Self {
        self.injected_current = current;
        self
    }
}

/// Unordered bus pair, stored with `a < b`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineKey {
    pub a: BusId,
    pub b: BusId,
}

impl LineKey {
    pub fn new(x: &BusId, y: &BusId) -> Self {
        if x <= y {
            LineKey { a: x.clone(), b: y.clone() }
        } else {
            LineKey { a: y.clone(), b: x.clone() }
        }
    }

    pub fn other(&self, end: &BusId) -> Option<&BusId> {
        if &self.a == end {
            Some(&self.b)
        } else if &self.b == end {
            Some(&self.a)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub endpoints: LineKey,
    pub admittance: Complex64,
}

/// A raw line as read from data; may be parallel or self-referential.
#[derive(Clone, Debug, PartialEq)]
pub struct RawLine {
    pub from: BusId,
    pub to: BusId,
    pub admittance: Complex64,
}

/// Unprocessed input: may hold zero-voltage buses, parallel lines, self
/// lines and several components.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawNetwork {
    pub buses: Vec<Bus>,
    pub lines: Vec<RawLine>,
}

impl From<&Network> for RawNetwork {
    fn from(net: &Network) -> Self {
        RawNetwork {
            buses: net.buses().cloned().collect(),
            lines: net.lines().map(|(k, admittance)| RawLine { from: k.a.clone(), to: k.b.clone(), admittance }).collect(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("unknown bus {0}")]
    UnknownBus(BusId),
    #[error("duplicate bus {0}")]
    DuplicateBus(BusId),
    #[error("line {0}-{0} joins a bus to itself")]
    SelfLine(BusId),
    #[error("no usable component after preprocessing")]
    NoUsableComponent,
    #[error("graph density needs at least two buses, got {0}")]
    TooFewBuses(usize),
    #[error("validation failed: {0}")]
    Invalid(Violation),
}

/// Simple undirected graph with complex line admittances.
///
/// Adjacency is kept in sync with the line table; every mutation goes
/// through the methods below.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Network {
    buses: BTreeMap<BusId, Bus>,
    lines: BTreeMap<LineKey, Complex64>,
    adjacency: BTreeMap<BusId, BTreeSet<BusId>>,
}

impl Network {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a network from buses and simple lines.
    pub fn from_parts(buses: impl IntoIterator<Item = Bus>, lines: impl IntoIterator<Item = Line>) -> Result<Self, NetworkError> {
        let mut net = Network::new();
        for bus in buses {
            if net.buses.contains_key(&bus.id) {
                return Err(NetworkError::DuplicateBus(bus.id));
            }
            net.add_bus(bus);
        }
        for line in lines {
            let LineKey { a, b } = &line.endpoints;
            if a == b {
                return Err(NetworkError::SelfLine(a.clone()));
            }
            for end in [a, b] {
                if !net.buses.contains_key(end) {
                    return Err(NetworkError::UnknownBus(end.clone()));
                }
            }
            net.set_line(a, b, line.admittance);
        }
        Ok(net)
    }

    pub fn add_bus(&mut self, bus: Bus) {
        self.adjacency.entry(bus.id.clone()).or_default();
        self.buses.insert(bus.id.clone(), bus);
    }

    /// Removes a bus together with all its lines.
    pub fn remove_bus(&mut self, id: &BusId) -> Option<Bus> {
        let bus = self.buses.remove(id)?;
        if let Some(nbrs) = self.adjacency.remove(id) {
            for n in nbrs {
                self.lines.remove(&LineKey::new(id, &n));
                if let Some(set) = self.adjacency.get_mut(&n) {
                    set.remove(id);
                }
            }
        }
        Some(bus)
    }

    /// Inserts or overwrites the line between two existing buses.
    pub fn set_line(&mut self, x: &BusId, y: &BusId, admittance: Complex64) {
        debug_assert!(x != y, "self line {x}");
        debug_assert!(self.buses.contains_key(x) && self.buses.contains_key(y));
        self.lines.insert(LineKey::new(x, y), admittance);
        self.adjacency.entry(x.clone()).or_default().insert(y.clone());
        self.adjacency.entry(y.clone()).or_default().insert(x.clone());
    }

    pub fn remove_line(&mut self, x: &BusId, y: &BusId) -> Option<Complex64> {
        let y_old = self.lines.remove(&LineKey::new(x, y))?;
        if let Some(s) = self.adjacency.get_mut(x) {
            s.remove(y);
        }
        if let Some(s) = self.adjacency.get_mut(y) {
            s.remove(x);
        }
        Some(y_old)
    }

    pub fn bus(&self, id: &BusId) -> Option<&Bus> {
        self.buses.get(id)
    }

    pub fn bus_mut(&mut self, id: &BusId) -> Option<&mut Bus> {
        self.buses.get_mut(id)
    }

    pub fn contains(&self, id: &BusId) -> bool {
        self.buses.contains_key(id)
    }

    pub fn line(&self, x: &BusId, y: &BusId) -> Option<Complex64> {
        self.lines.get(&LineKey::new(x, y)).copied()
    }

    pub fn has_line(&self, x: &BusId, y: &BusId) -> bool {
        self.lines.contains_key(&LineKey::new(x, y))
    }

    /// Buses in ascending id order.
    pub fn buses(&self) -> impl Iterator<Item = &Bus> {
        self.buses.values()
    }

    pub fn bus_ids(&self) -> impl Iterator<Item = &BusId> {
        self.buses.keys()
    }

    /// Lines in canonical `(min id, max id)` order.
    pub fn lines(&self) -> impl Iterator<Item = (&LineKey, Complex64)> {
        self.lines.iter().map(|(k, y)| (k, *y))
    }

    pub fn neighbors(&self, id: &BusId) -> impl Iterator<Item = &BusId> {
        self.adjacency.get(id).into_iter().flatten()
    }

    pub fn degree(&self, id: &BusId) -> usize {
        self.adjacency.get(id).map_or(0, BTreeSet::len)
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn is_connected(&self) -> bool {
        match self.buses.keys().next() {
            None => true,
            Some(start) => self.component_of(start).len() == self.buses.len(),
        }
    }

    pub fn component_of(&self, start: &BusId) -> BTreeSet<BusId> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        seen.insert(start.clone());
        queue.push_back(start.clone());
        while let Some(u) = queue.pop_front() {
            for v in self.neighbors(&u) {
                if seen.insert(v.clone()) {
                    queue.push_back(v.clone());
                }
            }
        }
        seen
    }

    /// Connected components, each sorted, listed by smallest member.
    pub fn components(&self) -> Vec<BTreeSet<BusId>> {
        let mut seen: BTreeSet<BusId> = BTreeSet::new();
        let mut out = Vec::new();
        for id in self.buses.keys() {
            if seen.contains(id) {
                continue;
            }
            let comp = self.component_of(id);
            seen.extend(comp.iter().cloned());
            out.push(comp);
        }
        out
    }

    /// Restricts the network to the given bus set.
    pub fn induced(&self, keep: &BTreeSet<BusId>) -> Network {
        let mut net = Network::new();
        for id in keep {
            if let Some(bus) = self.buses.get(id) {
                net.add_bus(bus.clone());
            }
        }
        for (k, y) in &self.lines {
            if keep.contains(&k.a) && keep.contains(&k.b) {
                net.set_line(&k.a, &k.b, *y);
            }
        }
        net
    }
}

/// Removes zero-voltage buses, merges parallel lines, folds self lines into
/// shunts and keeps the largest connected component.
///
/// Ties between equally large components go to the one holding the
/// smallest bus id.
pub fn preprocess_degree_zero(raw: &RawNetwork) -> Result<Network, NetworkError> {
    let mut net = Network::new();
    for bus in &raw.buses {
        if bus.nominal_voltage == 0.0 {
            continue;
        }
        if net.contains(&bus.id) {
            return Err(NetworkError::DuplicateBus(bus.id.clone()));
        }
        net.add_bus(bus.clone());
    }
    let known: BTreeSet<&BusId> = raw.buses.iter().map(|b| &b.id).collect();
    for line in &raw.lines {
        for end in [&line.from, &line.to] {
            if !known.contains(end) {
                return Err(NetworkError::UnknownBus(end.clone()));
            }
        }
        if !net.contains(&line.from) || !net.contains(&line.to) {
            continue;
        }
        if line.from == line.to {
            let bus = net.bus_mut(&line.from).expect("checked above");
            bus.shunt_admittance += line.admittance;
            continue;
        }
        let merged = net.line(&line.from, &line.to).unwrap_or_default() + line.admittance;
        net.set_line(&line.from, &line.to, merged);
    }

    // components() lists by smallest member, so the first maximum wins ties
    let mut best: Option<BTreeSet<BusId>> = None;
    for comp in net.components() {
        if best.as_ref().is_none_or(|b| comp.len() > b.len()) {
            best = Some(comp);
        }
    }
    match best {
        Some(keep) if !keep.is_empty() => Ok(net.induced(&keep)),
        _ => Err(NetworkError::NoUsableComponent),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValidationMode {
    Strict,
    Lenient,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Violation {
    NonInductiveLine { a: BusId, b: BusId, admittance: Complex64 },
    NonInductiveShunt { bus: BusId, admittance: Complex64 },
    NoNonzeroShunt,
    Disconnected { components: usize },
    PowerImbalance { net_power: Complex64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonInductiveLine { a, b, admittance } => {
                write!(f, "line {a}-{b} admittance {admittance} is not inductive")
            }
            Violation::NonInductiveShunt { bus, admittance } => {
                write!(f, "bus {bus} shunt {admittance} is not inductive")
            }
            Violation::NoNonzeroShunt => write!(f, "no non-zero diagonal: every shunt admittance is zero"),
            Violation::Disconnected { components } => write!(f, "graph has {components} components"),
            Violation::PowerImbalance { net_power } => write!(f, "net power {net_power} is not balanced"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Whether net-power balance was checked (needs a voltage solve).
    pub power_checked: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

const PURE_IMAG_TOL: f64 = 1e-9;

/// Purely imaginary with negative imaginary part, to relative tolerance.
pub fn is_inductive(y: Complex64) -> bool {
    y.re.abs() <= PURE_IMAG_TOL * y.im.abs().max(1.0) && y.im < 0.0
}

fn is_inductive_or_zero(y: Complex64) -> bool {
    y == Complex64::new(0.0, 0.0) || (y.re.abs() <= PURE_IMAG_TOL * y.im.abs().max(1.0) && y.im <= 0.0)
}

/// Checks the inductive-network assumptions and, when a solution is
/// available, that the injected currents draw no net active power.
///
/// Reactive power is not checked: a lossless network with any non-zero
/// current always absorbs some.
///
/// `net_power` is the sum of power injections at the solved voltages; pass
/// `None` to skip the balance check.
pub fn validate_with_power(net: &Network, mode: ValidationMode, net_power: Option<(Complex64, f64)>) -> Result<ValidationReport, NetworkError> {
    let mut report = ValidationReport::default();
    for (k, y) in net.lines() {
        if !is_inductive(y) {
            report.violations.push(Violation::NonInductiveLine { a: k.a.clone(), b: k.b.clone(), admittance: y });
        }
    }
    for bus in net.buses() {
        if !is_inductive_or_zero(bus.shunt_admittance) {
            report.violations.push(Violation::NonInductiveShunt { bus: bus.id.clone(), admittance: bus.shunt_admittance });
        }
    }
    if net.buses().all(|b| b.shunt_admittance == Complex64::new(0.0, 0.0)) {
        report.violations.push(Violation::NoNonzeroShunt);
    }
    let comps = net.components().len();
    if comps > 1 {
        report.violations.push(Violation::Disconnected { components: comps });
    }
    if let Some((total, scale)) = net_power {
        report.power_checked = true;
        if total.re.abs() > 1e-9 * scale {
            report.violations.push(Violation::PowerImbalance { net_power: total });
        }
    }
    if mode == ValidationMode::Strict {
        if let Some(first) = report.violations.first() {
            return Err(NetworkError::Invalid(first.clone()));
        }
    }
    Ok(report)
}

/// Validity checks; the power balance is included whenever the network
/// can be solved for voltages.
pub fn validate(net: &Network, mode: ValidationMode) -> Result<ValidationReport, NetworkError> {
    let power = if net.bus_count() > 0 { crate::kron::net_power(net).ok() } else { None };
    validate_with_power(net, mode, power)
}

pub type DegreeMap = BTreeMap<BusId, usize>;

pub fn degree_map(net: &Network) -> DegreeMap {
    net.bus_ids().map(|id| (id.clone(), net.degree(id))).collect()
}

/// `2|E| / (|N|(|N|-1))`.
pub fn graph_density(net: &Network) -> Result<f64, NetworkError> {
    let n = net.bus_count();
    if n < 2 {
        return Err(NetworkError::TooFewBuses(n));
    }
    Ok(2.0 * net.line_count() as f64 / (n as f64 * (n as f64 - 1.0)))
}

/// 0/1 connectivity matrix in the given bus order (row-major).
pub fn topological_connectivity(net: &Network, ordering: &[BusId]) -> Vec<Vec<u8>> {
    ordering
        .iter()
        .map(|i| ordering.iter().map(|j| u8::from(i != j && net.has_line(i, j))).collect())
        .collect()
}
