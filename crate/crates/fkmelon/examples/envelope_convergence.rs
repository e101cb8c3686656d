//! Envelope midpoints of conditioned clusters against the watermelon
//! marginal: the KS distance should shrink as boxes grow.

use fkmelon::gibbs::RcParams;
use fkmelon::harness::envelope_convergence_test;
use fkmelon::lattice::Boundary;

fn main() {
    let params = RcParams::new(0.45, 1.0).unwrap();
    let report =
        envelope_convergence_test(params, Boundary::Free, 2, 2, &[8, 16, 32], 600, 17).unwrap();
    println!("fitted diffusivity sigma = {:.3}", report.sigma);
    println!("{:>4} {:>8} {:>14} {:>12}", "n", "KS", "width/sqrt(n)", "width/log n");
    for row in &report.rows {
        println!(
            "{:>4} {:>8.4} {:>14.3} {:>12.3}",
            row.n, row.ks, row.median_scaled_width, row.width_over_log
        );
    }
    println!("KS non-increasing: {}", report.ks_non_increasing);
    println!("scaled width decreasing: {}", report.width_decreasing);
    println!("width/log ratio spread: {:.2}", report.width_log_ratio);
}
