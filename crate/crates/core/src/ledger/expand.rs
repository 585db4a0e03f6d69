use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{removed_buses, step_seqs, LedgerError, Prerequisite, ReductionLedger, Step};
use crate::grid::{BusId, LineKey, Network};

/// What to bring back.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExpansionTarget {
    /// Every recorded step.
    All,
    /// A whole field such as `t_b1`.
    Field(String),
    /// One bus inside a field, e.g. `t_b1:b6`. For tree fields the buses
    /// between it and the root come back too.
    Member { key: String, member: BusId },
}

impl FromStr for ExpansionTarget {
    type Err = LedgerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "ALL" {
            return Ok(ExpansionTarget::All);
        }
        let valid_key = |k: &str| ["t_", "e_", "tri_"].iter().any(|p| k.len() > p.len() && k.starts_with(p));
        match s.split_once(':') {
            Some((key, member)) if valid_key(key) && !member.is_empty() => Ok(ExpansionTarget::Member { key: key.to_owned(), member: member.into() }),
            None if valid_key(s) => Ok(ExpansionTarget::Field(s.to_owned())),
            _ => Err(LedgerError::BadTarget(s.to_owned())),
        }
    }
}

impl fmt::Display for ExpansionTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpansionTarget::All => f.write_str("ALL"),
            ExpansionTarget::Field(k) => f.write_str(k),
            ExpansionTarget::Member { key, member } => write!(f, "{key}:{member}"),
        }
    }
}

/// Network change made by an expansion.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Expansion {
    pub added_nodes: Vec<BusId>,
    pub added_edges: Vec<LineKey>,
    pub removed_edges: Vec<LineKey>,
    /// Existing bus the new buses hang off.
    pub anchor: Option<BusId>,
}

impl Expansion {
    pub fn between(before: &Network, after: &Network, anchor: Option<BusId>) -> Self {
        let added_nodes = after.bus_ids().filter(|b| !before.contains(b)).cloned().collect();
        let added_edges = after.lines().filter(|(k, _)| !before.has_line(&k.a, &k.b)).map(|(k, _)| k.clone()).collect();
        let removed_edges = before.lines().filter(|(k, _)| !after.has_line(&k.a, &k.b)).map(|(k, _)| k.clone()).collect();
        Expansion { added_nodes, added_edges, removed_edges, anchor }
    }
}

/// Steps a target resolves to.
fn resolve(net: &Network, ledger: &ReductionLedger, target: &ExpansionTarget) -> Result<(BTreeSet<u64>, Option<BusId>), LedgerError> {
    match target {
        ExpansionTarget::All => Ok((ledger.steps().iter().map(Step::seq).collect(), None)),
        ExpansionTarget::Field(key) => {
            let (field, items) = ledger.field(key).ok_or_else(|| LedgerError::NotFound(key.clone()))?;
            Ok((step_seqs(items), Some(field.anchor().clone())))
        }
        ExpansionTarget::Member { key, member } => {
            let (field, items) = ledger.field(key).ok_or_else(|| LedgerError::NotFound(key.clone()))?;
            if !removed_buses(items).contains(member) {
                return Err(LedgerError::NotFound(target.to_string()));
            }
            let in_field = step_seqs(items);
            let step = ledger.step_removing(member).ok_or_else(|| LedgerError::NotFound(target.to_string()))?;
            let mut seqs = BTreeSet::from([step.seq()]);
            // tree members come back together with the path up to the root
            let mut cursor = step;
            while let Step::Collapse(c) = cursor {
                if net.contains(&c.into) {
                    break;
                }
                match ledger.step_removing(&c.into) {
                    Some(next @ Step::Collapse(_)) if in_field.contains(&next.seq()) => {
                        seqs.insert(next.seq());
                        cursor = next;
                    }
                    _ => break,
                }
            }
            Ok((seqs, Some(field.anchor().clone())))
        }
    }
}

/// Steps outside `seqs` that must be undone first, latest first.
fn blockers<'a>(ledger: &'a ReductionLedger, seqs: &BTreeSet<u64>) -> Vec<&'a Step> {
    let chosen: Vec<&Step> = ledger.steps().iter().filter(|s| seqs.contains(&s.seq())).collect();
    let Some(first) = seqs.first() else { return Vec::new() };
    ledger
        .steps()
        .iter()
        .rev()
        .filter(|t| t.seq() > *first && !seqs.contains(&t.seq()))
        .filter(|t| chosen.iter().any(|s| s.blocked_by(t)))
        .collect()
}

fn undo_all(net: &mut Network, ledger: &mut ReductionLedger, seqs: &BTreeSet<u64>) -> Result<(), LedgerError> {
    let mut taken = ledger.take_steps(seqs);
    taken.sort_by_key(|s| std::cmp::Reverse(s.seq()));
    for step in &taken {
        step.undo(net, ledger.archive_mut()).map_err(|reason| LedgerError::Integrity { seq: step.seq(), reason })?;
    }
    ledger.refresh(net);
    Ok(())
}

/// Reintroduces the target's buses with their original lines.
///
/// Works on copies: on error the inputs are untouched. Returns the new
/// network and ledger with the consumed steps removed.
pub fn expand(net: &Network, ledger: &ReductionLedger, target: &ExpansionTarget) -> Result<(Network, ReductionLedger, Expansion), LedgerError> {
    let (seqs, anchor) = resolve(net, ledger, target)?;
    let blocking = blockers(ledger, &seqs);
    if !blocking.is_empty() {
        let mut prerequisites: Vec<Prerequisite> = Vec::new();
        for step in blocking {
            let key = ledger.locate(step.seq()).map(|k| k.to_string()).unwrap_or_default();
            let p = Prerequisite { key, member: step.node().clone() };
            if !prerequisites.contains(&p) {
                prerequisites.push(p);
            }
        }
        return Err(LedgerError::Dependency { target: target.to_string(), prerequisites });
    }
    let mut out_net = net.clone();
    let mut out_ledger = ledger.clone();
    undo_all(&mut out_net, &mut out_ledger, &seqs)?;
    let delta = Expansion::between(net, &out_net, anchor);
    Ok((out_net, out_ledger, delta))
}

/// Undoes every step, latest first, and returns the original network.
pub fn expand_all(net: &Network, ledger: &ReductionLedger) -> Result<Network, LedgerError> {
    let mut out_net = net.clone();
    let mut out_ledger = ledger.clone();
    let seqs = ledger.steps().iter().map(Step::seq).collect();
    undo_all(&mut out_net, &mut out_ledger, &seqs)?;
    if let Some(stray) = out_ledger.archive().keys().next() {
        return Err(LedgerError::Integrity { seq: 0, reason: format!("archived bus {stray} has no step") });
    }
    Ok(out_net)
}
