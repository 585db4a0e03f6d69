//! Partial expansion from a saved ledger.
//!
//! Members come back one at a time, tree members pull in the buses between
//! them and the root, and a member whose successor is still hidden is
//! refused with the prerequisite to expand first.

use gridreduce::ledger::{deserialize, expand, expand_all, serialize, ExpansionTarget};
use gridreduce::topo::{reduce_degree_one, reduce_degree_two};
use gridreduce::{Bus, LedgerError, Network, ReductionLedger};
use num_complex::Complex64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let y = Complex64::new(0.0, -1.0);
    let mut net = Network::new();
    for name in ["b1", "b2", "b3", "b4", "b5", "b6", "b7", "r1", "r2", "r3", "s1", "s2", "s3"] {
        net.add_bus(Bus::new(name, 69.0));
    }
    let lines = [
        ("b1", "b2"), ("b1", "b3"), ("b1", "b4"), ("b4", "b5"), ("b5", "b6"), ("b5", "b7"),
        ("b1", "r1"), ("b1", "r2"), ("b1", "r3"), ("r1", "r2"), ("r2", "r3"), ("r1", "r3"),
        ("r1", "s1"), ("s1", "s2"), ("s2", "s3"), ("s3", "r2"),
    ];
    for (a, b) in lines {
        net.set_line(&a.into(), &b.into(), y);
    }
    let (reduced, ledger) = reduce_degree_one(&net, &ReductionLedger::new())?;
    let (reduced, ledger) = reduce_degree_two(&reduced, &ledger)?;

    let bytes = serialize(&ledger);
    println!("ledger is {} bytes; fields {:?}", bytes.len(), ledger.entries().keys().map(ToString::to_string).collect::<Vec<_>>());
    let ledger = deserialize(&bytes)?;

    let target: ExpansionTarget = "t_b1:b6".parse()?;
    let (partial, rest, delta) = expand(&reduced, &ledger, &target)?;
    println!("{target}: added {:?} at {:?}", delta.added_nodes, delta.anchor);
    println!("b1 now stands for {} buses", rest.cluster_size(&"b1".into()));

    match expand(&partial, &rest, &"e_r1_r2:s1".parse()?) {
        Err(LedgerError::Dependency { prerequisites, .. }) => {
            let first: Vec<String> = prerequisites.iter().map(ToString::to_string).collect();
            println!("e_r1_r2:s1 needs {first:?} first");
        }
        other => println!("unexpected: {other:?}"),
    }

    let whole = expand_all(&partial, &rest)?;
    println!("fully expanded equals the input: {}", whole == net);
    Ok(())
}
