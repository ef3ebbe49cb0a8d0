//! LOESS on a noisy sine and per-day smoothing of a small panel.
//!
//! Run with `cargo run --example loess_smoothing`.

use qgsa::panel::{generate_synthetic, Distribution, SyntheticSpec};
use qgsa::{loess_fit, smooth_by_group, SmootherSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 0.2).expect("valid sd");
    let x: Vec<f64> = (0..60).map(|i| i as f64 * 0.1).collect();
    let z: Vec<f64> = x.iter().map(|v| v.sin() + noise.sample(&mut rng)).collect();

    for span in [0.2, 0.4, 0.8] {
        let spec = SmootherSpec {
            span,
            ..SmootherSpec::default()
        };
        let fit = loess_fit(&x, &z, &spec).expect("valid input");
        let rmse = (fit.values.iter().zip(&x).map(|(f, v)| (f - v.sin()).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
        println!("span {span}: RMSE against sin {rmse:.4}");
    }

    let spec = SyntheticSpec::new(8, 3, 4, |t, j| (t * j) as f64, |_, _| 1.0, Distribution::Normal, 3);
    let panel = generate_synthetic(&spec).expect("valid spec");
    let smoothed = smooth_by_group(panel.values(), &panel, &SmootherSpec::default()).expect("smooths");
    for j in 1..=3 {
        let curve: Vec<String> = (1..=8)
            .map(|t| format!("{:.2}", smoothed.values[panel.cell_range(t, j).start]))
            .collect();
        println!("day {j}: {}", curve.join(" "));
    }
}
