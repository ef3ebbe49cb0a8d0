//! Plain subgradient descent zigzags across the valley floor; gradient
//! sampling descends monotonically.
//!
//! Run with `cargo run --example subgradient_vs_gsa`.

use qgsa::gsa::subgradient_descent;
use qgsa::oracle::valley_benchmark;
use qgsa::{gsa_minimize, BundleMode, GsaParams};

fn main() {
    let bench = valley_benchmark();
    let trace = subgradient_descent(bench.objective.as_ref(), &bench.start, 0.5, 2000);
    println!("subgradient descent, 2000 steps:");
    for k in [0, 1, 2, 3, 4, 5, 10, 100, 1000, 1999] {
        println!("  step {k:>4}: f = {:.4}", trace.values[k]);
    }
    println!("  f increased {} times, best {:.4e}", trace.increases(), trace.f_best);

    let res = gsa_minimize(&bench.objective, &bench.start, &GsaParams::new(2, BundleMode::Qp)).expect("valid run");
    println!("gradient sampling:");
    for r in res.log.records.iter().step_by(15) {
        println!("  iteration {:>3}: f = {:.4e} ({})", r.iteration, r.f, r.event);
    }
    println!("  best {:.4e} after {} iterations", res.f_best, res.log.len());
}
