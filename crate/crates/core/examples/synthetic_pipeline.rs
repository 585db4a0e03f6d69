//! Synthetic grid, predicted counts and the full numeric pipeline.

use gridreduce::io::{generate_synthetic, MeshSpec, PocketSpec, StringSpec, SyntheticSpec, TreeSpec};
use gridreduce::kron::net_power;
use gridreduce::topo::numeric_reduction_pipeline;
use gridreduce::{Stage, Thresholds};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = SyntheticSpec::ring(16);
    spec.seed = 7;
    spec.trees.push(TreeSpec { attach: 0, depth: 3, branching: 2 });
    spec.strings.push(StringSpec { from: 2, to: 5, length: 6 });
    spec.meshes.push(MeshSpec { attach: 4, size: 5 });
    spec.pockets.push(PocketSpec { anchors: [6, 10, 12] });
    let net = generate_synthetic(&spec)?;
    let predicted = spec.predict();
    println!("predicted {predicted:?}");

    let out = numeric_reduction_pipeline(&net, &[Stage::D1, Stage::D2, Stage::Tri], Thresholds::default(), 1)?;
    print!("{}", out.report.table());
    let counts: Vec<usize> = out.ledger.header().stage_counts.iter().map(|c| c.buses).collect();
    println!("stage counts {counts:?}");

    let equivalent = out.equivalent_network(&net)?;
    let (before, _) = net_power(&net)?;
    let (after, _) = net_power(&equivalent)?;
    println!("net power {before:.6} -> {after:.6}");
    Ok(())
}
