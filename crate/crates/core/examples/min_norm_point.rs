//! Nearest point to the origin in the convex hull of a gradient bundle,
//! checked against an exhaustive simplex grid.
//!
//! Run with `cargo run --example min_norm_point`.

use qgsa::minnorm::{satisfies_wolfe_criterion, DEFAULT_TOL};
use qgsa::oracle::simplex_grid_min_norm;
use qgsa::{average_point, min_norm_point, GradientBundle};

fn main() {
    let bundle = GradientBundle::new(vec![vec![1.0, 1.0], vec![-1.0, 1.0], vec![0.0, 3.0], vec![2.0, 0.5]])
        .expect("valid bundle");
    let mn = min_norm_point(&bundle, DEFAULT_TOL).expect("solvable");
    println!("min-norm point {:?}, norm {:.6}", mn.point, mn.norm);
    println!("weights {:?}", mn.weights);
    println!("optimality certificate holds: {}", satisfies_wolfe_criterion(&bundle, &mn.point, 1e-9));

    let avg = average_point(&bundle);
    println!("plain average {avg:?} for comparison");

    let grid = simplex_grid_min_norm(&bundle, 1e-3).expect("small grid");
    println!("grid search (step 1e-3) finds {grid:?}");
}
