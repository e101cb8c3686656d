//! Exact conditioned walk bridges: sample non-intersecting bridges by
//! rejection and by backward-DP forward sampling, and compare midpoint gaps.

use fkmelon::stats::mean_stderr;
use fkmelon::walks::{default_cap, sample_conditioned_bridge, BridgeMethod, IncrementDist};

fn midpoint_gaps(systems: &[fkmelon::walks::WalkSystem], n: usize) -> Vec<f64> {
    systems
        .iter()
        .map(|s| {
            let heights = s.synchronized_heights();
            let (_, z) = heights
                .iter()
                .min_by_key(|(t, _)| (t - n as i64 / 2).abs())
                .unwrap();
            (z[1] - z[0]) as f64
        })
        .collect()
}

fn main() {
    let dist = IncrementDist::simple();
    let x = [0i64, 2];
    let n = 32;
    let cap = default_cap(&dist, &x, &x, n);
    let rej =
        sample_conditioned_bridge(&dist, &x, &x, n, 2000, BridgeMethod::Rejection, cap, 3).unwrap();
    let dp =
        sample_conditioned_bridge(&dist, &x, &x, n, 2000, BridgeMethod::DpBackward, cap, 4).unwrap();
    let (m_rej, se_rej) = mean_stderr(&midpoint_gaps(&rej, n));
    let (m_dp, se_dp) = mean_stderr(&midpoint_gaps(&dp, n));
    println!("midpoint gap, rejection:   {m_rej:.3} +- {se_rej:.3}");
    println!("midpoint gap, backward DP: {m_dp:.3} +- {se_dp:.3}");

    // The backward-DP sampler reaches sizes where rejection is hopeless.
    let n = 1024;
    let cap = default_cap(&dist, &x, &x, n);
    let big =
        sample_conditioned_bridge(&dist, &x, &x, n, 50, BridgeMethod::DpBackward, cap, 5).unwrap();
    let (m_big, se_big) = mean_stderr(&midpoint_gaps(&big, n));
    println!("midpoint gap at n = 1024:  {m_big:.2} +- {se_big:.2} (about sqrt(n) scale)");
}
