//! Degree distributions and their 1-Wasserstein distance.

use std::collections::BTreeMap;

use gridreduce::metrics::{degree_distribution, wasserstein1, DegreeDistribution};
use gridreduce::{Bus, Network};
use num_complex::Complex64;

fn ring(n: usize) -> Network {
    let mut net = Network::new();
    for i in 0..n {
        net.add_bus(Bus::new(format!("r{i}"), 69.0));
    }
    for i in 0..n {
        net.set_line(&format!("r{i}").into(), &format!("r{}", (i + 1) % n).into(), Complex64::new(0.0, -1.0));
    }
    net
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = DegreeDistribution::new(BTreeMap::from([(1, 0.5), (3, 0.5)]))?;
    let q = DegreeDistribution::new(BTreeMap::from([(2, 1.0)]))?;
    println!("W1 of {{1,3}} vs {{2}}: {}", wasserstein1(&p, &q));

    let cycle = degree_distribution(&ring(8))?;
    let mut chorded = ring(8);
    chorded.set_line(&"r0".into(), &"r4".into(), Complex64::new(0.0, -1.0));
    let chorded = degree_distribution(&chorded)?;
    println!("ring bins {:?}", cycle.bins());
    println!("chorded bins {:?}", chorded.bins());
    println!("W1 = {:.4} (two of eight buses moved up one degree)", wasserstein1(&cycle, &chorded));
    Ok(())
}
