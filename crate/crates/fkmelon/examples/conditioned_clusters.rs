//! Sample configurations conditioned on two disjoint left-right connections
//! and summarize the envelopes of the two clusters.

use fkmelon::gibbs::{sample_fk_conditioned, RcParams, SampleOptions};
use fkmelon::lattice::{
    check_con_ni, extract_envelopes, label_clusters, Boundary, BoxGeometry,
};
use fkmelon::stats::median;

fn main() {
    let n = 16;
    let geometry = BoxGeometry::strip(n, 10);
    let params = RcParams::new(0.45, 1.0).unwrap();
    let x = [0i64, 2];
    let configs = sample_fk_conditioned(
        geometry,
        Boundary::Free,
        params,
        &x,
        &x,
        500,
        4,
        SampleOptions::default(),
        11,
    )
    .unwrap();
    let mut widths = Vec::new();
    let mut gaps = Vec::new();
    for config in &configs {
        let labels = label_clusters(config);
        let status = check_con_ni(&geometry, &labels, &x, &x).unwrap();
        assert!(status.holds(), "chain must stay in the conditioned event");
        let envs = extract_envelopes(config, &labels, &x).unwrap();
        widths.push(envs.iter().map(|e| e.max_width()).max().unwrap() as f64);
        let mid = (n / 2) as i64;
        gaps.push((envs[1].lower_at(mid).unwrap() - envs[0].upper_at(mid).unwrap()) as f64);
    }
    println!("samples: {}", configs.len());
    println!("median max envelope width: {}", median(&widths));
    println!("median midpoint inter-envelope gap: {}", median(&gaps));
}
