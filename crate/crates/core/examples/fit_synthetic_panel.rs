//! Fit the 0.9-quantile surface of a synthetic 17-hour × 7-day panel and
//! compare it with the true quantiles.
//!
//! Run with `cargo run --example fit_synthetic_panel`.

use std::f64::consts::PI;

use qgsa::panel::{generate_synthetic, Distribution, SyntheticSpec};
use qgsa::qam::InitMode;
use qgsa::smoother::GroupKey;
use qgsa::{qam_fit, QamConfig};

const Z_90: f64 = 1.2815515655446004;

fn mean(t: usize, j: usize) -> f64 {
    10.0 + 2.0 * (2.0 * PI * t as f64 / 17.0).sin() + j as f64 / 2.0
}

fn main() {
    let spec = SyntheticSpec::new(17, 7, 200, mean, |_, _| 1.0, Distribution::Normal, 42);
    let panel = generate_synthetic(&spec).expect("valid spec");

    let mut config = QamConfig::new(0.9);
    config.smoother.span = 0.3;
    config.smoother.group_key = GroupKey::Pooled;
    config.init = InitMode::PerDayConstant;
    let surface = qam_fit(&panel, &config).expect("fit runs");

    println!(
        "loss {:.2} -> {:.2} in {} iterations",
        surface.initial_loss,
        surface.final_loss,
        surface.fit_log.len()
    );
    let worst = surface
        .cells()
        .map(|(t, j, q)| (q - mean(t, j) - Z_90).abs())
        .fold(0.0, f64::max);
    println!("largest error against the true quantile: {worst:.3}");
    println!("hour  fitted(Mon)  true(Mon)");
    for t in 1..=17 {
        println!("{t:>4}  {:>11.3}  {:>9.3}", surface.value(t, 1).unwrap_or(f64::NAN), mean(t, 1) + Z_90);
    }
    if let Some(d) = &surface.decomposition {
        println!("grand level {:.3}", d.beta0);
    }
}
