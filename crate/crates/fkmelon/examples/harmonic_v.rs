//! Harmonic function of two non-intersecting simple walks: survival-mass
//! power iteration, compared to the Vandermonde determinant (the gap).

use fkmelon::walks::{estimate_v, IncrementDist};
use fkmelon::watermelon::vandermonde_i;

fn main() {
    let dist = IncrementDist::simple();
    let grid: Vec<Vec<i64>> = (1..=24).map(|g| vec![0, g]).collect();
    let est = estimate_v(&dist, &grid, 1500).unwrap();
    println!("iterations: {}, residual {:.2e}", est.iterations, est.residual);
    println!("{:>5} {:>10} {:>8}", "gap", "V", "V/Delta");
    for (point, value) in &est.points {
        let delta = vandermonde_i(point);
        println!("{:>5} {:>10.4} {:>8.4}", point[1], value, value / delta);
    }
}
