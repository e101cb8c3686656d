//! Cone points, diamond decompositions, and synchronized skeletons of
//! planar clusters.
//!
//! For aperture `delta`, the forward cone at `v` is
//! `v + {delta x1 >= |x2|}` and the backward cone is `v + {delta x1 <= -|x2|}`.
//! A vertex `v` of a cluster is a cone point when the whole cluster lies in
//! the union of the two cones, equivalently when every vertex `w` satisfies
//! `|w2 - v2| <= delta |w1 - v1|`. The diamond of an ordered pair `(a, b)` is
//! the intersection of the forward cone at `a` with the backward cone at `b`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("cone aperture must be positive")]
    BadAperture,
    #[error("skeleton points must have strictly increasing first coordinates")]
    NotIncreasing,
    #[error("consecutive skeleton points not diamond-compatible")]
    NotConfined,
    #[error("need at least one skeleton per walk")]
    Empty,
}

/// Aperture of the forward and backward cones.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ConeParams {
    pub delta: f64,
}

impl ConeParams {
    pub fn new(delta: f64) -> Result<Self, GeometryError> {
        if !(delta > 0.0) {
            return Err(GeometryError::BadAperture);
        }
        Ok(ConeParams { delta })
    }
}

impl Default for ConeParams {
    fn default() -> Self {
        ConeParams { delta: 1.0 }
    }
}

/// Direct definition check: `v` (a member of `cluster`) is a cone point when
/// every cluster vertex lies in the union of the two cones at `v`.
pub fn is_cone_point(cluster: &[(i64, i64)], v: (i64, i64), cone: ConeParams) -> bool {
    cluster.iter().all(|&(wx, wy)| {
        ((wy - v.1).abs() as f64) <= cone.delta * ((wx - v.0).abs() as f64)
    })
}

/// All cone points of the cluster, in increasing first coordinate, computed
/// with prefix/suffix extrema over the x-sorted vertex list. Two distinct
/// cone points can never share a first coordinate, so the order is strict.
pub fn cone_points(cluster: &[(i64, i64)], cone: ConeParams) -> Vec<(i64, i64)> {
    if cluster.is_empty() {
        return Vec::new();
    }
    let d = cone.delta;
    let mut pts: Vec<(i64, i64)> = cluster.to_vec();
    pts.sort_unstable();
    pts.dedup();
    let m = pts.len();

    // Group boundaries by column.
    let mut group_end = Vec::new();
    let mut i = 0;
    while i < m {
        let mut j = i;
        while j < m && pts[j].0 == pts[i].0 {
            j += 1;
        }
        group_end.push(j);
        i = j;
    }
    let groups = group_end.len();
    let group_of = {
        let mut v = vec![0usize; m];
        let mut g = 0;
        for (k, slot) in v.iter_mut().enumerate() {
            if k >= group_end[g] {
                g += 1;
            }
            *slot = g;
        }
        v
    };

    // Prefix over groups of max(y + d x) and min(y - d x); suffix of
    // max(y - d x) and min(y + d x).
    let plus = |&(x, y): &(i64, i64)| y as f64 + d * x as f64;
    let minus = |&(x, y): &(i64, i64)| y as f64 - d * x as f64;
    let mut pre_max_plus = vec![f64::NEG_INFINITY; groups];
    let mut pre_min_minus = vec![f64::INFINITY; groups];
    let mut suf_max_minus = vec![f64::NEG_INFINITY; groups];
    let mut suf_min_plus = vec![f64::INFINITY; groups];
    let mut start = 0;
    for g in 0..groups {
        let slice = &pts[start..group_end[g]];
        let mp = slice.iter().map(plus).fold(f64::NEG_INFINITY, f64::max);
        let mm = slice.iter().map(minus).fold(f64::INFINITY, f64::min);
        let xm = slice.iter().map(minus).fold(f64::NEG_INFINITY, f64::max);
        let xp = slice.iter().map(plus).fold(f64::INFINITY, f64::min);
        pre_max_plus[g] = if g == 0 { mp } else { pre_max_plus[g - 1].max(mp) };
        pre_min_minus[g] = if g == 0 { mm } else { pre_min_minus[g - 1].min(mm) };
        suf_max_minus[g] = xm;
        suf_min_plus[g] = xp;
        start = group_end[g];
    }
    for g in (0..groups.saturating_sub(1)).rev() {
        suf_max_minus[g] = suf_max_minus[g].max(suf_max_minus[g + 1]);
        suf_min_plus[g] = suf_min_plus[g].min(suf_min_plus[g + 1]);
    }

    let eps = 1e-9;
    pts.iter()
        .enumerate()
        .filter(|&(k, &(vx, vy))| {
            let g = group_of[k];
            let (vx, vy) = (vx as f64, vy as f64);
            pre_max_plus[g] <= vy + d * vx + eps
                && pre_min_minus[g] >= vy - d * vx - eps
                && suf_max_minus[g] <= vy - d * vx + eps
                && suf_min_plus[g] >= vy + d * vx - eps
        })
        .map(|(_, &p)| p)
        .collect()
}

/// The maximal diamond decomposition of a cluster: the full ordered sequence
/// of its cone points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub points: Vec<(i64, i64)>,
}

impl Skeleton {
    pub fn columns(&self) -> Vec<i64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("skeleton serializes")
    }
}

/// Extracts the maximal decomposition: every cone point, in increasing x.
/// Inserting any additional vertex would break diamond confinement, and any
/// valid cone-point sequence is a subsequence of this one.
pub fn maximal_decomposition(cluster: &[(i64, i64)], cone: ConeParams) -> Skeleton {
    Skeleton { points: cone_points(cluster, cone) }
}

/// Checks that a cluster is reproduced by a skeleton: every vertex between
/// two consecutive skeleton columns lies in their diamond, vertices before
/// the first point lie in its backward cone and vertices after the last in
/// its forward cone.
pub fn decomposition_covers(
    cluster: &[(i64, i64)],
    skeleton: &Skeleton,
    cone: ConeParams,
) -> bool {
    if skeleton.points.is_empty() {
        return cluster.is_empty();
    }
    let d = cone.delta;
    let first = skeleton.points[0];
    let last = *skeleton.points.last().unwrap();
    cluster.iter().all(|&w| {
        if w.0 <= first.0 {
            ((w.1 - first.1).abs() as f64) <= d * ((first.0 - w.0) as f64)
        } else if w.0 >= last.0 {
            ((w.1 - last.1).abs() as f64) <= d * ((w.0 - last.0) as f64)
        } else {
            let i = skeleton.points.partition_point(|p| p.0 <= w.0) - 1;
            diamond_contains(skeleton.points[i], skeleton.points[i + 1], cone, w)
        }
    })
}

/// Whether `w` lies in the (closed) diamond of the ordered pair `(a, b)`.
pub fn diamond_contains(a: (i64, i64), b: (i64, i64), cone: ConeParams, w: (i64, i64)) -> bool {
    let d = cone.delta;
    ((w.1 - a.1).abs() as f64) <= d * ((w.0 - a.0) as f64)
        && ((w.1 - b.1).abs() as f64) <= d * ((b.0 - w.0) as f64)
}

/// Area of the diamond spanned by consecutive points `a`, `b` with
/// displacement `(t, h)`, `|h| <= delta t`: `(delta^2 t^2 - h^2) / (2 delta)`.
pub fn diamond_area(a: (i64, i64), b: (i64, i64), cone: ConeParams) -> Result<f64, GeometryError> {
    let t = (b.0 - a.0) as f64;
    let h = (b.1 - a.1) as f64;
    if t <= 0.0 {
        return Err(GeometryError::NotIncreasing);
    }
    if h.abs() > cone.delta * t + 1e-12 {
        return Err(GeometryError::NotConfined);
    }
    Ok((cone.delta * cone.delta * t * t - h * h) / (2.0 * cone.delta))
}

/// Areas of the diamonds between consecutive skeleton points.
pub fn diamond_volumes(skeleton: &Skeleton, cone: ConeParams) -> Result<Vec<f64>, GeometryError> {
    skeleton
        .points
        .windows(2)
        .map(|w| diamond_area(w[0], w[1], cone))
        .collect()
}

/// Synchronized skeleton of an r-tuple: the columns present in every
/// individual skeleton, with the r heights at each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncSkeleton {
    pub columns: Vec<i64>,
    /// `heights[k][i]` is the height of walk `i` at column `columns[k]`.
    pub heights: Vec<Vec<i64>>,
}

impl SyncSkeleton {
    /// Strict vertical order of the r heights at every synchronized column.
    pub fn is_ordered(&self) -> bool {
        self.heights.iter().all(|h| h.windows(2).all(|w| w[0] < w[1]))
    }

    /// Smallest consecutive height difference over all columns; infinite for
    /// r = 1 or when there is no column.
    pub fn min_gap(&self) -> f64 {
        self.heights.iter().map(|h| gap(h)).fold(f64::INFINITY, f64::min)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("skeleton serializes")
    }
}

/// Intersects the column sets of r skeletons.
pub fn synchronized_skeleton(skeletons: &[Skeleton]) -> Result<SyncSkeleton, GeometryError> {
    if skeletons.is_empty() {
        return Err(GeometryError::Empty);
    }
    let mut columns: Vec<i64> = skeletons[0].columns();
    for sk in &skeletons[1..] {
        let other: std::collections::BTreeSet<i64> = sk.columns().into_iter().collect();
        columns.retain(|c| other.contains(c));
    }
    let heights = columns
        .iter()
        .map(|&c| {
            skeletons
                .iter()
                .map(|sk| {
                    let i = sk.points.partition_point(|p| p.0 < c);
                    sk.points[i].1
                })
                .collect()
        })
        .collect();
    Ok(SyncSkeleton { columns, heights })
}

/// Minimal consecutive difference of an increasing height vector; plus
/// infinity when there are fewer than two entries.
pub fn gap(heights: &[i64]) -> f64 {
    heights
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64)
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    fn horizontal_path(n: i64) -> Vec<(i64, i64)> {
        (0..=n).map(|x| (x, 0)).collect()
    }

    #[test]
    fn every_vertex_of_straight_path_is_cone_point() {
        let path = horizontal_path(6);
        let cone = ConeParams::default();
        let cp = cone_points(&path, cone);
        assert_eq!(cp, path);
        for &v in &path {
            assert!(is_cone_point(&path, v, cone));
        }
    }

    #[test]
    fn vertical_bar_blocks_cone_points() {
        // A T shape: the bar of the T sees vertices above and below, so the
        // vertices at its column cannot be cone points at delta = 1.
        let mut cluster = horizontal_path(6);
        cluster.push((3, 1));
        cluster.push((3, -1));
        let cone = ConeParams::default();
        let cp = cone_points(&cluster, cone);
        assert!(!cp.contains(&(3, 0)));
        assert!(!cp.contains(&(3, 1)));
        // Far-away vertices on the axis still work.
        assert!(cp.contains(&(0, 0)));
        assert!(cp.contains(&(6, 0)));
        // (2, 0): vertex (3, 1) sits at |dy| = 1 = dx, inside the cone.
        assert!(cp.contains(&(2, 0)));
    }

    #[test]
    fn aperture_monotonicity() {
        // Wider cones only gain cone points.
        let mut rng = StreamRng::from_key(&[21]);
        for _ in 0..50 {
            let mut cluster = Vec::new();
            let mut y = 0i64;
            for x in 0..12 {
                y += rng.below(3) as i64 - 1;
                cluster.push((x, y));
            }
            let narrow = cone_points(&cluster, ConeParams::new(0.5).unwrap());
            let mid = cone_points(&cluster, ConeParams::new(1.0).unwrap());
            let wide = cone_points(&cluster, ConeParams::new(2.0).unwrap());
            assert!(narrow.iter().all(|p| mid.contains(p)));
            assert!(mid.iter().all(|p| wide.contains(p)));
        }
    }

    #[test]
    fn fast_cone_points_match_direct_scan() {
        let mut rng = StreamRng::from_key(&[33]);
        for trial in 0..200 {
            let mut cluster: Vec<(i64, i64)> = Vec::new();
            let m = 3 + rng.below(25) as i64;
            for _ in 0..m {
                cluster.push((rng.below(12) as i64, rng.below(13) as i64 - 6));
            }
            cluster.sort_unstable();
            cluster.dedup();
            for &delta in &[0.5, 1.0, 2.0] {
                let cone = ConeParams::new(delta).unwrap();
                let fast = cone_points(&cluster, cone);
                let slow: Vec<(i64, i64)> = cluster
                    .iter()
                    .copied()
                    .filter(|&v| is_cone_point(&cluster, v, cone))
                    .collect();
                assert_eq!(fast, slow, "trial {trial} delta {delta}");
            }
        }
    }

    #[test]
    fn maximal_decomposition_covers_cluster() {
        let mut rng = StreamRng::from_key(&[55]);
        for _ in 0..100 {
            // A thick random walk band: connected-ish planar blob.
            let mut cluster = Vec::new();
            let mut y = 0i64;
            for x in 0..20 {
                y += rng.below(3) as i64 - 1;
                for dy in 0..=rng.below(2) as i64 {
                    cluster.push((x, y + dy));
                }
            }
            let cone = ConeParams::default();
            let sk = maximal_decomposition(&cluster, cone);
            if !sk.points.is_empty() {
                assert!(decomposition_covers(&cluster, &sk, cone));
            }
        }
    }

    #[test]
    fn skeleton_of_straight_path_has_all_columns() {
        let path = horizontal_path(5);
        let sk = maximal_decomposition(&path, ConeParams::default());
        assert_eq!(sk.columns(), vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn diamond_area_matches_example_and_lattice_count() {
        let cone = ConeParams::default();
        for k in 1..8i64 {
            let area = diamond_area((0, 0), (2 * k, 0), cone).unwrap();
            assert!((area - 2.0 * (k * k) as f64).abs() < 1e-12);
            // Lattice points in the closed diamond: area + O(perimeter).
            let mut count = 0i64;
            for x in 0..=2 * k {
                for y in -k..=k {
                    if diamond_contains((0, 0), (2 * k, 0), cone, (x, y)) {
                        count += 1;
                    }
                }
            }
            let perimeter = 4.0 * (2.0f64.sqrt()) * k as f64;
            assert!(
                (count as f64 - area).abs() <= perimeter + 4.0,
                "k={k} count={count} area={area}"
            );
        }
    }

    #[test]
    fn diamond_area_shrinks_with_tilt() {
        let cone = ConeParams::default();
        let flat = diamond_area((0, 0), (6, 0), cone).unwrap();
        let tilted = diamond_area((0, 0), (6, 4), cone).unwrap();
        assert!(tilted < flat);
        assert!((tilted - (36.0 - 16.0) / 2.0).abs() < 1e-12);
        assert_eq!(
            diamond_area((0, 0), (2, 5), cone),
            Err(GeometryError::NotConfined)
        );
    }

    #[test]
    fn synchronized_skeleton_intersects_columns() {
        let a = Skeleton { points: vec![(0, 0), (2, 1), (3, 1), (6, 0)] };
        let b = Skeleton { points: vec![(0, 3), (3, 4), (5, 4), (6, 3)] };
        let sync = synchronized_skeleton(&[a, b]).unwrap();
        assert_eq!(sync.columns, vec![0, 3, 6]);
        assert_eq!(sync.heights, vec![vec![0, 3], vec![1, 4], vec![0, 3]]);
        assert!(sync.is_ordered());
        assert_eq!(sync.min_gap(), 3.0);
    }

    #[test]
    fn gap_of_single_walk_is_infinite() {
        assert_eq!(gap(&[5]), f64::INFINITY);
        assert_eq!(gap(&[0, 4, 6]), 2.0);
    }

    #[test]
    fn skeleton_json_round_trip() {
        let sk = Skeleton { points: vec![(0, -1), (4, 2)] };
        let line = sk.to_json_line();
        let back: Skeleton = serde_json::from_str(&line).unwrap();
        assert_eq!(back, sk);
        let sync = SyncSkeleton { columns: vec![0, 4], heights: vec![vec![-1, 3], vec![2, 5]] };
        let back: SyncSkeleton = serde_json::from_str(&sync.to_json_line()).unwrap();
        assert_eq!(back, sync);
    }
}
