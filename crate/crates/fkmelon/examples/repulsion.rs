//! Entropic repulsion and non-confinement: early gap expansion of
//! conditioned bridges, and how rarely a bridge hugs a narrow tube.

use fkmelon::walks::{
    default_cap, non_confinement_count, repulsion_stats, sample_conditioned_bridge,
    sample_system, BridgeMethod, IncrementDist,
};

fn main() {
    let dist = IncrementDist::simple();
    let x = [0i64, 2];
    let epsilon = 0.2;
    println!("{:>5} {:>18} {:>18}", "n", "P[eta > n^0.8]", "P[bulk gap <= n^0.15]");
    for n in [64usize, 256] {
        let cap = default_cap(&dist, &x, &x, n);
        let systems =
            sample_conditioned_bridge(&dist, &x, &x, n, 400, BridgeMethod::DpBackward, cap, 29)
                .unwrap();
        let stats = repulsion_stats(&systems, n, epsilon);
        println!(
            "{:>5} {:>18.4} {:>18.4}",
            n,
            stats.freq_eta_exceeds((n as f64).powf(1.0 - epsilon)),
            stats.freq_bulk_gap_at_most((n as f64).powf(0.15))
        );
    }

    // Non-confinement: time spent inside a tube of width n^eps around the
    // straight interpolation, for free walks.
    let eps = 0.26;
    for n in [256usize, 1024] {
        let tube = (n as f64).powf(eps);
        let horizon = (n as f64).powf(1.0 - eps) as i64;
        let mut confined = 0u64;
        let trials = 20_000;
        for i in 0..trials {
            let system = sample_system(&dist, &[0], n, false, 31, i).unwrap();
            let count = non_confinement_count(&system.trajectories[0], |_| 0.0, tube, horizon);
            if count as f64 > 0.9 * horizon as f64 {
                confined += 1;
            }
        }
        println!(
            "n = {n:>5}: P[time in tube > 0.9 horizon] = {:.4}",
            confined as f64 / trials as f64
        );
    }
}
