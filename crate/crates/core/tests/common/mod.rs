#![allow(dead_code)]

use proptest::prelude::*;
use qgsa::panel::{generate_synthetic, Distribution, SyntheticSpec};
use qgsa::SalesPanel;

/// Cell counts `counts[j][t]` for a panel with `t_count` hours.
pub fn counts_strategy(max_t: usize, max_j: usize, max_rep: usize) -> impl Strategy<Value = (usize, Vec<Vec<usize>>)> {
    (2..=max_t, 1..=max_j).prop_flat_map(move |(t, j)| {
        (Just(t), prop::collection::vec(prop::collection::vec(0..=max_rep, t), j))
    })
}

pub fn panel_from_counts(t_count: usize, counts: &[Vec<usize>], values: &mut impl FnMut(usize, usize, usize) -> f64) -> SalesPanel {
    let cells = counts
        .iter()
        .enumerate()
        .map(|(j0, day)| {
            day.iter()
                .enumerate()
                .map(|(t0, &c)| (0..c).map(|i| values(t0 + 1, j0 + 1, i)).collect())
                .collect()
        })
        .collect();
    SalesPanel::from_cells(cells, t_count).unwrap()
}

pub fn mu(t: usize, j: usize) -> f64 {
    10.0 + 2.0 * (2.0 * std::f64::consts::PI * t as f64 / 17.0).sin() + j as f64 / 2.0
}

/// T = 17, J = 7 normal panel with `mu(t, j)` means and unit sd.
pub fn sine_panel(replicates: usize, seed: u64) -> SalesPanel {
    let spec = SyntheticSpec::new(17, 7, replicates, mu, |_, _| 1.0, Distribution::Normal, seed);
    generate_synthetic(&spec).unwrap()
}

pub const Z_90: f64 = 1.2815515655446004;
