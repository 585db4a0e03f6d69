//! JSON ledger documents.
//!
//! A document carries the header, the archived attributes of removed
//! buses and the ordered field view. Steps are read back out of the view,
//! and the view is rebuilt from them on load, so a document whose fields
//! disagree with its own steps is rejected.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{AbsorbRecord, Branch, CollapseStep, EdgeRecord, Item, LedgerError, LedgerHeader, ReductionLedger, Step, FORMAT_VERSION};
use crate::grid::{Bus, BusId};
use crate::topo::Thresholds;

#[derive(Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format_version: u32,
    seed: Option<u64>,
    thresholds: Option<Thresholds>,
    stage_counts: Vec<super::StageCount>,
    archive: Vec<Bus>,
    entries: Vec<Entry>,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    key: String,
    items: Vec<DocItem>,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum DocItem {
    Branch(Branch),
    Edge(EdgeRecord),
    Nested { key: String, items: Vec<DocItem> },
    Absorbed(AbsorbRecord),
    Base { bus: BusId, lines: Vec<(BusId, Complex64)> },
}

fn to_doc_items(items: &[Item]) -> Vec<DocItem> {
    items
        .iter()
        .map(|item| match item {
            Item::Branch(b) => DocItem::Branch(b.clone()),
            Item::Edge(e) => DocItem::Edge(e.clone()),
            Item::Nested { key, items } => DocItem::Nested { key: key.to_string(), items: to_doc_items(items) },
            Item::Absorbed(a) => DocItem::Absorbed(a.clone()),
            Item::Base { bus, lines } => DocItem::Base { bus: bus.clone(), lines: lines.clone() },
        })
        .collect()
}

fn to_document(ledger: &ReductionLedger) -> Document {
    let h = ledger.header();
    Document {
        format_version: h.format_version,
        seed: h.seed,
        thresholds: h.thresholds,
        stage_counts: h.stage_counts.clone(),
        archive: ledger.archive().values().cloned().collect(),
        entries: ledger.entries().iter().map(|(k, items)| Entry { key: k.to_string(), items: to_doc_items(items) }).collect(),
    }
}

/// Canonical pretty-printed JSON, newline terminated.
pub fn serialize(ledger: &ReductionLedger) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&to_document(ledger)).expect("ledger documents always serialize");
    out.push(b'\n');
    out
}

#[derive(Default)]
struct Harvest {
    steps: BTreeMap<u64, Step>,
    bases: BTreeMap<BusId, Vec<(BusId, Complex64)>>,
}

impl Harvest {
    fn add(&mut self, step: Step) -> Result<(), LedgerError> {
        let seq = step.seq();
        match self.steps.get(&seq) {
            Some(seen) if seen != &step => Err(LedgerError::Integrity { seq, reason: "seq used by two different steps".into() }),
            Some(_) => Ok(()),
            None => {
                self.steps.insert(seq, step);
                Ok(())
            }
        }
    }

    fn walk(&mut self, items: &[DocItem]) -> Result<(), LedgerError> {
        for item in items {
            match item {
                DocItem::Branch(b) => {
                    if b.path.len() != b.segments.len() + 1 {
                        let seq = b.segments.first().map_or(0, |s| s.seq);
                        return Err(LedgerError::Integrity { seq, reason: "branch path and segments disagree in length".into() });
                    }
                    for (k, seg) in b.segments.iter().enumerate() {
                        self.add(Step::Collapse(CollapseStep {
                            seq: seg.seq,
                            stage: seg.stage,
                            node: b.path[k].clone(),
                            into: b.path[k + 1].clone(),
                            admittance: seg.admittance,
                        }))?;
                    }
                }
                DocItem::Edge(e) => self.add(Step::Edge(e.clone()))?,
                DocItem::Absorbed(a) => self.add(Step::Absorb(a.clone()))?,
                DocItem::Nested { items, .. } => self.walk(items)?,
                DocItem::Base { bus, lines } => {
                    self.bases.insert(bus.clone(), lines.clone());
                }
            }
        }
        Ok(())
    }
}

/// Parses a ledger document and checks it against its own steps.
pub fn deserialize(bytes: &[u8]) -> Result<ReductionLedger, LedgerError> {
    let doc: Document =
        serde_json::from_slice(bytes).map_err(|e| LedgerError::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
    if doc.format_version != FORMAT_VERSION {
        return Err(LedgerError::Version(doc.format_version));
    }
    let mut harvest = Harvest::default();
    for entry in &doc.entries {
        harvest.walk(&entry.items)?;
    }
    let mut archive = BTreeMap::new();
    for bus in &doc.archive {
        if archive.insert(bus.id.clone(), bus.clone()).is_some() {
            return Err(LedgerError::Integrity { seq: 0, reason: format!("bus {} archived twice", bus.id) });
        }
    }
    for step in harvest.steps.values() {
        if !archive.contains_key(step.node()) {
            return Err(LedgerError::Integrity { seq: step.seq(), reason: format!("bus {} is missing from the archive", step.node()) });
        }
    }
    if archive.len() != harvest.steps.len() {
        return Err(LedgerError::Integrity { seq: 0, reason: "archive holds buses that no step removed".into() });
    }
    let header = LedgerHeader { format_version: doc.format_version, seed: doc.seed, thresholds: doc.thresholds, stage_counts: doc.stage_counts.clone() };
    let ledger = ReductionLedger::from_parts(header, harvest.steps.into_values().collect(), archive, harvest.bases);
    let rebuilt = to_document(&ledger);
    if rebuilt.entries != doc.entries {
        let first = rebuilt.entries.iter().zip(&doc.entries).find(|(a, b)| a != b).map(|(a, _)| a.key.clone());
        let where_ = first.unwrap_or_else(|| "entry list length".into());
        return Err(LedgerError::Integrity { seq: 0, reason: format!("fields do not match their steps ({where_})") });
    }
    Ok(ledger)
}
