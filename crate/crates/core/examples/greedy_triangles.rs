//! Greedy triangle collapse under degree and voltage thresholds.

use gridreduce::topo::{eligible_nodes, greedy_triangle_reduce};
use gridreduce::{Bus, Network, ReductionLedger, Thresholds};
use num_complex::Complex64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // two triangles sharing the edge a-b, one 345 kV bus
    let mut net = Network::new();
    for (name, kv) in [("a", 69.0), ("b", 69.0), ("c", 69.0), ("d", 345.0), ("x", 69.0), ("z", 69.0)] {
        net.add_bus(Bus::new(name, kv).with_shunt(Complex64::new(0.0, -0.1)));
    }
    for (u, v) in [("a", "b"), ("b", "c"), ("a", "c"), ("a", "d"), ("b", "d"), ("c", "x"), ("x", "z"), ("z", "d")] {
        net.set_line(&u.into(), &v.into(), Complex64::new(0.0, -1.0));
    }
    let ledger = ReductionLedger::new();

    for (label, thr) in [("no voltage limit", Thresholds::new(6, None)?), ("below 100 kV", Thresholds::new(6, Some(100.0))?)] {
        let eligible = eligible_nodes(&net, &ledger, thr.max_voltage_kv);
        println!("{label}: eligible {:?}", eligible.iter().map(|b| b.as_str()).collect::<Vec<_>>());
        for seed in 0..3 {
            let (out, l) = greedy_triangle_reduce(&net, &ledger, thr, seed)?;
            let fields: Vec<String> = l.entries().keys().map(ToString::to_string).collect();
            println!("  seed {seed}: {} buses, fields {fields:?}", out.bus_count());
        }
    }
    Ok(())
}
