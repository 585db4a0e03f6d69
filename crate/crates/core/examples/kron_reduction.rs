//! Kron reduction of a small star network.
//!
//! Eliminating the hub of a star leaves a complete graph on the leaves.
//! Dropping a single leaf by Schur complement agrees with its closed form,
//! and net power at the solved voltages is the same before and after.

use std::collections::BTreeSet;

use gridreduce::kron::{closed_form_eliminate, currents_of, kron_reduce, laplacian_of, power_injections, reduced_currents, solve_voltages, Elimination};
use gridreduce::{Bus, BusId, Network};
use num_complex::Complex64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let j = |x: f64| Complex64::new(0.0, x);
    let mut net = Network::new();
    net.add_bus(Bus::new("hub", 138.0));
    for (i, name) in ["a", "b", "c", "d"].into_iter().enumerate() {
        let current = Complex64::new(0.3 * i as f64 - 0.4, 0.1);
        net.add_bus(Bus::new(name, 69.0).with_shunt(j(-0.1)).with_current(current));
        net.set_line(&"hub".into(), &name.into(), j(-1.0 - i as f64));
    }

    let q = laplacian_of(&net);
    let keep: BTreeSet<BusId> = ["a", "b", "c", "d"].into_iter().map(BusId::from).collect();
    let kr = kron_reduce(&q, &keep)?;
    println!("reduced to {} buses", kr.q_red.len());
    for (i, a) in kr.q_red.index().iter().enumerate() {
        for b in &kr.q_red.index()[i + 1..] {
            println!("  {a}-{b}: {:+.4}i", -kr.q_red.get(a, b).unwrap().im);
        }
    }

    let without_d: BTreeSet<BusId> = q.index().iter().filter(|b| b.as_str() != "d").cloned().collect();
    let schur = kron_reduce(&q, &without_d)?.q_red;
    let by_hand = closed_form_eliminate(&q, &Elimination::Node("d".into()))?;
    println!("leaf d, closed form vs Schur: {:.2e}", by_hand.max_abs_diff(&schur)?);

    let c = currents_of(&net, q.index())?;
    let full: Complex64 = power_injections(&solve_voltages(&q, &c)?, &c)?.iter().sum();
    let c_red = reduced_currents(&kr, q.index(), &c)?;
    let reduced: Complex64 = power_injections(&solve_voltages(&kr.q_red, &c_red)?, &c_red)?.iter().sum();
    println!("net power: full {full:.6}, reduced {reduced:.6}");
    Ok(())
}
