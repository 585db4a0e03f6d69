//! Degree-one and degree-two reductions and the fields they record.
//!
//! A radial tree hangs off one corner of a 4-clique and a string of three
//! buses bridges two other corners. The tree folds into `t_k0`; the string
//! becomes the meta line `e_k1_k2`.

use gridreduce::ledger::Item;
use gridreduce::topo::{reduce_degree_one, reduce_degree_two};
use gridreduce::{Bus, BusId, Network, ReductionLedger};
use num_complex::Complex64;

fn describe(items: &[Item], depth: usize) {
    let pad = "  ".repeat(depth + 1);
    for item in items {
        match item {
            Item::Branch(b) => println!("{pad}branch {:?}", b.path.iter().map(BusId::as_str).collect::<Vec<_>>()),
            Item::Edge(e) => println!("{pad}edge [{}, {}, {}]", e.left, e.node, e.right),
            Item::Nested { key, items } => {
                println!("{pad}{key}:");
                describe(items, depth + 1);
            }
            other => println!("{pad}{other:?}"),
        }
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let y = Complex64::new(0.0, -1.0);
    let mut net = Network::new();
    let names = ["k0", "k1", "k2", "k3", "t1", "t2", "t3", "t4", "s1", "s2", "s3"];
    for name in names {
        net.add_bus(Bus::new(name, 69.0).with_shunt(Complex64::new(0.0, -0.05)));
    }
    let lines = [
        ("k0", "k1"), ("k0", "k2"), ("k0", "k3"), ("k1", "k2"), ("k1", "k3"), ("k2", "k3"),
        ("k0", "t1"), ("t1", "t2"), ("t1", "t3"), ("t3", "t4"),
        ("k1", "s1"), ("s1", "s2"), ("s2", "s3"), ("s3", "k2"),
    ];
    for (a, b) in lines {
        net.set_line(&a.into(), &b.into(), y);
    }

    let (after_d1, ledger) = reduce_degree_one(&net, &ReductionLedger::new())?;
    println!("degree one: {} -> {} buses", net.bus_count(), after_d1.bus_count());
    let (after_d2, ledger) = reduce_degree_two(&after_d1, &ledger)?;
    println!("degree two: {} -> {} buses", after_d1.bus_count(), after_d2.bus_count());

    for (key, items) in ledger.entries() {
        println!("{key}:");
        describe(items, 0);
    }
    let k0 = BusId::from("k0");
    println!("k0 stands for {} buses", ledger.cluster_size(&k0));
    println!("k1-k2 is now {:.4}", after_d2.line(&"k1".into(), &"k2".into()).unwrap());
    Ok(())
}
