//! Spread of the triangle stage over many seeds.

use gridreduce::ensemble::triangle_ensemble;
use gridreduce::{Bus, Network, Thresholds};
use num_complex::Complex64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // a strip of triangles: which ones collapse first depends on the seed
    let mut net = Network::new();
    let n = 14;
    for i in 0..n {
        net.add_bus(Bus::new(format!("v{i:02}"), 69.0).with_shunt(Complex64::new(0.0, -0.1)));
    }
    for i in 0..n {
        for k in [1, 2] {
            if i + k < n {
                net.set_line(&format!("v{i:02}").into(), &format!("v{:02}", i + k).into(), Complex64::new(0.0, -1.0));
            }
        }
    }
    net.set_line(&"v00".into(), &format!("v{:02}", n - 1).into(), Complex64::new(0.0, -1.0));

    let e = triangle_ensemble(&net, Thresholds::new(6, None)?, 0, 100)?;
    println!("{} buses enter the triangle stage", e.start);
    for (size, runs) in &e.histogram {
        println!("{size:>4} {}", "#".repeat(*runs));
    }
    println!("mean {:.2}", e.mean());
    Ok(())
}
