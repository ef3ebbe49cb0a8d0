//! Gradient sampling on the nonsmooth valley `10|x₂ − x₁²| + (1 − x₁)²`
//! from `(−1, 2)`, with the iteration log written to `valley_log.csv`.
//!
//! Run with `cargo run --example gradient_sampling`.

use std::fs::File;

use qgsa::oracle::valley_benchmark;
use qgsa::{gsa_minimize, BundleMode, GsaParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bench = valley_benchmark();
    for mode in [BundleMode::Qp, BundleMode::Avg] {
        let mut params = GsaParams::new(2, mode);
        params.seed = 7;
        params.max_iter = 5000;
        let res = gsa_minimize(&bench.objective, &bench.start, &params)?;
        println!(
            "{mode}: f = {:.3e} at ({:.6}, {:.6}) after {} iterations, converged: {}",
            res.f_best,
            res.x_best[0],
            res.x_best[1],
            res.log.len(),
            res.log.converged
        );
        if mode == BundleMode::Qp {
            res.log.write_csv(File::create("valley_log.csv")?)?;
        }
    }
    println!("iteration log written to valley_log.csv");
    Ok(())
}
