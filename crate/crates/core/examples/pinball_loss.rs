//! Pinball loss and its derivative, and why its minimiser is a quantile.
//!
//! Run with `cargo run --example pinball_loss`.

use qgsa::oracle::empirical_quantile;
use qgsa::PinballLoss;

fn main() {
    let loss = PinballLoss::new(0.9).expect("valid level");
    println!("rho_0.9(q, y = 5):");
    for q in [3.0, 4.0, 5.0, 6.0, 7.0] {
        println!("  q = {q}: loss {:.2}, derivative {:+.1}", loss.rho(q, 5.0), loss.rho_grad(q, 5.0));
    }

    // scan the total loss over candidate constants: the minimum sits at the 0.9-quantile
    let ys: Vec<f64> = (1..=19).map(|k| (k * k % 17) as f64).collect();
    let total = |q: f64| ys.iter().map(|&y| loss.rho(q, y)).sum::<f64>();
    let best = ys
        .iter()
        .copied()
        .min_by(|a, b| total(*a).total_cmp(&total(*b)))
        .expect("non-empty");
    println!("sample: {ys:?}");
    println!(
        "argmin of total loss over the sample: {best} (empirical 0.9-quantile {})",
        empirical_quantile(&ys, 0.9).expect("non-empty")
    );
}
