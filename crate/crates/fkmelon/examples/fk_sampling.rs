//! Draw random-cluster configurations with the heat-bath chain and check
//! the sampled edge marginal against exact enumeration on a small box.

use fkmelon::gibbs::{exact_enumerate, sample_fk, RcParams, SampleOptions};
use fkmelon::lattice::{Boundary, BoxGeometry};

fn main() {
    let geometry = BoxGeometry::new(3, 0, 2).unwrap();
    let params = RcParams::new(0.5, 2.0).unwrap();
    for boundary in [Boundary::Free, Boundary::Wired] {
        let configs = sample_fk(geometry, boundary, params, 20_000, SampleOptions::default(), 7);
        let e = 0usize;
        let freq = configs.iter().filter(|c| c.is_open(e)).count() as f64 / configs.len() as f64;
        let exact = exact_enumerate(geometry, boundary, params, |c, _| c.is_open(e)).unwrap();
        println!(
            "{:>5} boundary: edge 0 open frequency {:.4}, exact {:.4}",
            boundary.as_str(),
            freq,
            exact
        );
    }
}
