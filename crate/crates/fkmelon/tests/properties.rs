//! Randomized structural properties checked with proptest.

use fkmelon::geometry::{cone_points, is_cone_point, ConeParams};
use fkmelon::gibbs::{dual_parameter, self_dual_point};
use fkmelon::lattice::{label_clusters, Boundary, BoxGeometry, EdgeConfig};
use proptest::prelude::*;

proptest! {
    #[test]
    fn config_line_round_trip(
        n in 1usize..6,
        h in 0i64..3,
        wired in any::<bool>(),
        mask in any::<u64>(),
    ) {
        let geometry = BoxGeometry::strip(n, h);
        let boundary = if wired { Boundary::Wired } else { Boundary::Free };
        let mask = mask & ((1u64 << geometry.edge_count().min(63)) - 1);
        let config = EdgeConfig::from_mask(geometry, boundary, mask);
        let back = EdgeConfig::from_line(&config.to_line()).unwrap();
        prop_assert_eq!(config.to_line(), back.to_line());
        for e in 0..geometry.edge_count() {
            prop_assert_eq!(config.is_open(e), back.is_open(e));
        }
    }

    #[test]
    fn fast_cone_scan_matches_direct_definition(
        seeds in proptest::collection::vec((0i64..20, -6i64..6), 1..40),
        delta_tenths in 5u32..30,
    ) {
        let cone = ConeParams::new(delta_tenths as f64 / 10.0).unwrap();
        let mut cluster = seeds;
        cluster.sort_unstable();
        cluster.dedup();
        let fast = cone_points(&cluster, cone);
        let slow: Vec<(i64, i64)> = cluster
            .iter()
            .copied()
            .filter(|&v| is_cone_point(&cluster, v, cone))
            .collect();
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn dual_transform_is_an_involution(
        p_milli in 1u32..1000,
        q_centi in 1u32..400,
    ) {
        let p = p_milli as f64 / 1000.0;
        let q = q_centi as f64 / 100.0;
        let back = dual_parameter(dual_parameter(p, q), q);
        prop_assert!((back - p).abs() < 1e-12);
        let sd = self_dual_point(q);
        prop_assert!((dual_parameter(sd, q) - sd).abs() < 1e-12);
        // The transform reverses order around the self-dual point.
        if p < sd {
            prop_assert!(dual_parameter(p, q) > sd);
        }
    }

    #[test]
    fn cluster_labels_agree_with_reachability(
        n in 1usize..5,
        mask in any::<u64>(),
    ) {
        let geometry = BoxGeometry::strip(n, 1);
        let mask = mask & ((1u64 << geometry.edge_count().min(63)) - 1);
        let config = EdgeConfig::from_mask(geometry, Boundary::Free, mask);
        let labels = label_clusters(&config);
        // Open edges must join, absence of any open path must separate.
        let v = geometry.vertex_count();
        let mut adj = vec![Vec::new(); v];
        for e in 0..geometry.edge_count() {
            if config.is_open(e) {
                let (a, b) = geometry.edge_endpoints(e);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let mut comp = vec![usize::MAX; v];
        let mut next = 0;
        for s in 0..v {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = next;
            while let Some(u) = stack.pop() {
                for &w in &adj[u] {
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        for a in 0..v {
            for b in (a + 1)..v {
                prop_assert_eq!(labels.same_cluster(a, b), comp[a] == comp[b]);
            }
        }
    }
}
