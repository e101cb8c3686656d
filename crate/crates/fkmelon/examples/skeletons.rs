//! Cone points and diamond decompositions: extract the synchronized
//! skeleton of two conditioned clusters and the diamond volumes of each.

use fkmelon::geometry::{
    diamond_volumes, maximal_decomposition, synchronized_skeleton, ConeParams,
};
use fkmelon::gibbs::{sample_fk_conditioned, RcParams, SampleOptions};
use fkmelon::lattice::{label_clusters, Boundary, BoxGeometry};

fn main() {
    let n = 20;
    let geometry = BoxGeometry::strip(n, 12);
    let params = RcParams::new(0.42, 1.0).unwrap();
    let x = [0i64, 3];
    let configs = sample_fk_conditioned(
        geometry,
        Boundary::Free,
        params,
        &x,
        &x,
        3,
        1,
        SampleOptions::default(),
        23,
    )
    .unwrap();
    let cone = ConeParams::default();
    for (k, config) in configs.iter().enumerate() {
        let labels = label_clusters(config);
        let skeletons: Vec<_> = x
            .iter()
            .map(|&xi| {
                let coords: Vec<(i64, i64)> = labels
                    .cluster_members(geometry.vertex_index(0, xi))
                    .into_iter()
                    .map(|v| geometry.vertex_coords(v))
                    .collect();
                maximal_decomposition(&coords, cone)
            })
            .collect();
        println!("sample {k}:");
        for (i, s) in skeletons.iter().enumerate() {
            let volumes = diamond_volumes(s, cone);
            println!(
                "  cluster {i}: {} cone points, diamond volumes {:?}",
                s.points.len(),
                volumes.map(|v| v.iter().map(|x| *x as i64).collect::<Vec<_>>()).ok()
            );
        }
        let sync = synchronized_skeleton(&skeletons).unwrap();
        println!(
            "  synchronized columns: {:?} (ordered: {}, min gap {})",
            sync.columns,
            sync.is_ordered(),
            sync.min_gap()
        );
    }
}
