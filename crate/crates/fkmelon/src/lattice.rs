//! Finite boxes of the square lattice, edge configurations, cluster
//! labelling, and the connection / non-intersection events.
//!
//! A box spans columns `0..=n` and rows `h_lo..=h_hi`. Vertices are indexed
//! column-major; edges are indexed with all horizontal edges first, then all
//! vertical edges, each group column-major. These orders are part of the
//! serialization format and must not change.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("invalid geometry: need n >= 1 and h_lo <= h_hi")]
    BadGeometry,
    #[error("endpoint vector must be strictly increasing and inside the box")]
    BadEndpoints,
    #[error("malformed config line: {0}")]
    BadConfigLine(String),
    #[error("column {0} carries no vertex of the cluster")]
    EmptyColumn(i64),
}

/// Boundary condition of the random-cluster measure on the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    /// Clusters are counted as they are.
    Free,
    /// All vertices on the box boundary are identified before counting.
    Wired,
}

impl Boundary {
    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::Free => "free",
            Boundary::Wired => "wired",
        }
    }
}

/// Rectangular box: columns `0..=n`, rows `h_lo..=h_hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxGeometry {
    pub n: usize,
    pub h_lo: i64,
    pub h_hi: i64,
}

impl BoxGeometry {
    pub fn new(n: usize, h_lo: i64, h_hi: i64) -> Result<Self, LatticeError> {
        if n < 1 || h_lo > h_hi {
            return Err(LatticeError::BadGeometry);
        }
        Ok(BoxGeometry { n, h_lo, h_hi })
    }

    /// Symmetric box of half-height `h`: rows `-h..=h`.
    pub fn strip(n: usize, h: i64) -> Self {
        BoxGeometry::new(n, -h, h).expect("valid strip")
    }

    pub fn height(&self) -> usize {
        (self.h_hi - self.h_lo + 1) as usize
    }

    pub fn columns(&self) -> usize {
        self.n + 1
    }

    pub fn vertex_count(&self) -> usize {
        self.columns() * self.height()
    }

    pub fn horizontal_edge_count(&self) -> usize {
        self.n * self.height()
    }

    pub fn vertical_edge_count(&self) -> usize {
        self.columns() * (self.height() - 1)
    }

    pub fn edge_count(&self) -> usize {
        self.horizontal_edge_count() + self.vertical_edge_count()
    }

    pub fn contains(&self, col: i64, row: i64) -> bool {
        col >= 0 && col <= self.n as i64 && row >= self.h_lo && row <= self.h_hi
    }

    pub fn vertex_index(&self, col: i64, row: i64) -> usize {
        debug_assert!(self.contains(col, row));
        col as usize * self.height() + (row - self.h_lo) as usize
    }

    pub fn vertex_coords(&self, idx: usize) -> (i64, i64) {
        let h = self.height();
        ((idx / h) as i64, (idx % h) as i64 + self.h_lo)
    }

    /// Endpoints of edge `e` as vertex indices, smaller index first.
    pub fn edge_endpoints(&self, e: usize) -> (usize, usize) {
        let h = self.height();
        let nh = self.horizontal_edge_count();
        if e < nh {
            (e, e + h)
        } else {
            let v = e - nh;
            let col = v / (h - 1);
            let off = v % (h - 1);
            let a = col * h + off;
            (a, a + 1)
        }
    }

    pub fn is_boundary_vertex(&self, idx: usize) -> bool {
        let (c, r) = self.vertex_coords(idx);
        c == 0 || c == self.n as i64 || r == self.h_lo || r == self.h_hi
    }

    /// Indices of the vertices on the box boundary.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.vertex_count()).filter(|&v| self.is_boundary_vertex(v)).collect()
    }
}

/// An edge configuration on a box: a bit per edge (1 = open).
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeConfig {
    pub geometry: BoxGeometry,
    pub boundary: Boundary,
    bits: Vec<u64>,
}

impl EdgeConfig {
    pub fn all_closed(geometry: BoxGeometry, boundary: Boundary) -> Self {
        let words = geometry.edge_count().div_ceil(64);
        EdgeConfig { geometry, boundary, bits: vec![0; words] }
    }

    pub fn all_open(geometry: BoxGeometry, boundary: Boundary) -> Self {
        let mut c = Self::all_closed(geometry, boundary);
        for e in 0..geometry.edge_count() {
            c.set(e, true);
        }
        c
    }

    pub fn is_open(&self, e: usize) -> bool {
        debug_assert!(e < self.geometry.edge_count());
        self.bits[e / 64] >> (e % 64) & 1 == 1
    }

    pub fn set(&mut self, e: usize, open: bool) {
        debug_assert!(e < self.geometry.edge_count());
        if open {
            self.bits[e / 64] |= 1 << (e % 64);
        } else {
            self.bits[e / 64] &= !(1 << (e % 64));
        }
    }

    pub fn open_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Loads the low `edge_count` bits of `mask` as the configuration.
    /// Only valid for boxes with at most 64 edges; used by enumeration.
    pub fn from_mask(geometry: BoxGeometry, boundary: Boundary, mask: u64) -> Self {
        assert!(geometry.edge_count() <= 64);
        EdgeConfig { geometry, boundary, bits: vec![mask] }
    }

    /// One-line serialization: `n,h_lo,h_hi;boundary;hex-edge-bitmap`.
    pub fn to_line(&self) -> String {
        let g = self.geometry;
        let mut hex = String::new();
        let bytes = self.geometry.edge_count().div_ceil(8);
        for i in 0..bytes {
            let byte = (self.bits[i / 8] >> (8 * (i % 8))) as u8;
            hex.push_str(&format!("{byte:02x}"));
        }
        format!("{},{},{};{};{}", g.n, g.h_lo, g.h_hi, self.boundary.as_str(), hex)
    }

    pub fn from_line(line: &str) -> Result<Self, LatticeError> {
        let bad = || LatticeError::BadConfigLine(line.to_string());
        let mut parts = line.trim().split(';');
        let geom = parts.next().ok_or_else(bad)?;
        let bc = parts.next().ok_or_else(bad)?;
        let hex = parts.next().ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        let nums: Vec<&str> = geom.split(',').collect();
        if nums.len() != 3 {
            return Err(bad());
        }
        let n: usize = nums[0].parse().map_err(|_| bad())?;
        let h_lo: i64 = nums[1].parse().map_err(|_| bad())?;
        let h_hi: i64 = nums[2].parse().map_err(|_| bad())?;
        let geometry = BoxGeometry::new(n, h_lo, h_hi).map_err(|_| bad())?;
        let boundary = match bc {
            "free" => Boundary::Free,
            "wired" => Boundary::Wired,
            _ => return Err(bad()),
        };
        let bytes = geometry.edge_count().div_ceil(8);
        if hex.len() != 2 * bytes {
            return Err(bad());
        }
        let mut config = EdgeConfig::all_closed(geometry, boundary);
        for i in 0..bytes {
            let byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
            config.bits[i / 8] |= (byte as u64) << (8 * (i % 8));
        }
        // Reject stray bits beyond the edge count.
        let e = geometry.edge_count();
        if e % 64 != 0 && config.bits[e / 64] >> (e % 64) != 0 {
            return Err(bad());
        }
        Ok(config)
    }
}

/// Connected-component labelling of the open subgraph.
///
/// Under wired boundary all boundary vertices are identified first, so they
/// share a root and contribute a single cluster to `cluster_count`.
#[derive(Clone, Debug)]
pub struct ClusterLabeling {
    root: Vec<u32>,
    pub cluster_count: usize,
}

impl ClusterLabeling {
    pub fn root(&self, v: usize) -> u32 {
        self.root[v]
    }

    pub fn same_cluster(&self, u: usize, v: usize) -> bool {
        self.root[u] == self.root[v]
    }

    /// Vertices sharing the cluster of `v`, as indices in increasing order.
    pub fn cluster_members(&self, v: usize) -> Vec<usize> {
        let r = self.root[v];
        (0..self.root.len()).filter(|&u| self.root[u] == r).collect()
    }
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
    components: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect(), size: vec![1; n], components: n }
    }

    fn find(&mut self, mut v: u32) -> u32 {
        while self.parent[v as usize] != v {
            self.parent[v as usize] = self.parent[self.parent[v as usize] as usize];
            v = self.parent[v as usize];
        }
        v
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (big, small) =
            if self.size[ra as usize] >= self.size[rb as usize] { (ra, rb) } else { (rb, ra) };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        self.components -= 1;
    }
}

/// Labels the clusters of the open subgraph of `config`, honouring the
/// boundary condition stored in the configuration.
pub fn label_clusters(config: &EdgeConfig) -> ClusterLabeling {
    let g = config.geometry;
    let mut uf = UnionFind::new(g.vertex_count());
    if config.boundary == Boundary::Wired {
        let bv = g.boundary_vertices();
        for w in bv.windows(2) {
            uf.union(w[0] as u32, w[1] as u32);
        }
    }
    for e in 0..g.edge_count() {
        if config.is_open(e) {
            let (a, b) = g.edge_endpoints(e);
            uf.union(a as u32, b as u32);
        }
    }
    let count = uf.components;
    let root: Vec<u32> = (0..g.vertex_count() as u32).map(|v| uf.find(v)).collect();
    ClusterLabeling { root, cluster_count: count }
}

/// Validates that `x` is strictly increasing and all rows fit in the box.
pub fn check_endpoints(g: &BoxGeometry, x: &[i64]) -> Result<(), LatticeError> {
    if x.is_empty() {
        return Err(LatticeError::BadEndpoints);
    }
    for w in x.windows(2) {
        if w[0] >= w[1] {
            return Err(LatticeError::BadEndpoints);
        }
    }
    if x.iter().any(|&r| r < g.h_lo || r > g.h_hi) {
        return Err(LatticeError::BadEndpoints);
    }
    Ok(())
}

/// Status of the connection and non-intersection events for sources
/// `(0, x_i)` and targets `(n, y_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConNiStatus {
    /// Every source `(0, x_i)` is connected to its target `(n, y_i)`.
    pub connected: bool,
    /// The clusters of the sources are pairwise distinct.
    pub disjoint: bool,
}

impl ConNiStatus {
    pub fn holds(&self) -> bool {
        self.connected && self.disjoint
    }
}

/// Checks the events `Con` (each `(0,x_i) <-> (n,y_i)`) and `NI` (pairwise
/// disjoint source clusters) on a labelled configuration.
pub fn check_con_ni(
    g: &BoxGeometry,
    labels: &ClusterLabeling,
    x: &[i64],
    y: &[i64],
) -> Result<ConNiStatus, LatticeError> {
    check_endpoints(g, x)?;
    check_endpoints(g, y)?;
    if x.len() != y.len() {
        return Err(LatticeError::BadEndpoints);
    }
    let connected = x.iter().zip(y).all(|(&xi, &yi)| {
        labels.same_cluster(g.vertex_index(0, xi), g.vertex_index(g.n as i64, yi))
    });
    let roots: Vec<u32> = x.iter().map(|&xi| labels.root(g.vertex_index(0, xi))).collect();
    let mut disjoint = true;
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            if roots[i] == roots[j] {
                disjoint = false;
            }
        }
    }
    Ok(ConNiStatus { connected, disjoint })
}

/// Upper and lower envelope of one cluster: for each column `k`, the largest
/// and smallest row of a cluster vertex in that column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePair {
    /// First column covered (columns are consecutive from here).
    pub col_start: i64,
    pub upper: Vec<i64>,
    pub lower: Vec<i64>,
}

impl EnvelopePair {
    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    pub fn upper_at(&self, col: i64) -> Option<i64> {
        let i = col.checked_sub(self.col_start)?;
        self.upper.get(usize::try_from(i).ok()?).copied()
    }

    pub fn lower_at(&self, col: i64) -> Option<i64> {
        let i = col.checked_sub(self.col_start)?;
        self.lower.get(usize::try_from(i).ok()?).copied()
    }

    /// Largest vertical extent `max_k (upper(k) - lower(k))`.
    pub fn max_width(&self) -> i64 {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).max().unwrap_or(0)
    }
}

/// Extracts upper and lower envelopes for the cluster of each source
/// `(0, x_i)` across every column of the box. Errs if some cluster misses a
/// column entirely.
pub fn extract_envelopes(
    config: &EdgeConfig,
    labels: &ClusterLabeling,
    x: &[i64],
) -> Result<Vec<EnvelopePair>, LatticeError> {
    let g = config.geometry;
    check_endpoints(&g, x)?;
    let roots: Vec<u32> = x.iter().map(|&xi| labels.root(g.vertex_index(0, xi))).collect();
    let mut out = Vec::with_capacity(x.len());
    for &r in &roots {
        let mut upper = Vec::with_capacity(g.columns());
        let mut lower = Vec::with_capacity(g.columns());
        for c in 0..=g.n as i64 {
            let mut hi = None;
            let mut lo = None;
            for row in g.h_lo..=g.h_hi {
                if labels.root(g.vertex_index(c, row)) == r {
                    hi = Some(row);
                    if lo.is_none() {
                        lo = Some(row);
                    }
                }
            }
            match (hi, lo) {
                (Some(hi), Some(lo)) => {
                    upper.push(hi);
                    lower.push(lo);
                }
                _ => return Err(LatticeError::EmptyColumn(c)),
            }
        }
        out.push(EnvelopePair { col_start: 0, upper, lower });
    }
    Ok(out)
}

/// Edges of the box with exactly one endpoint in the given vertex set.
/// Closing all of them decouples the set from the rest of the box, which is
/// what pins down the event "the cluster of x equals exactly this set".
pub fn exterior_boundary(g: &BoxGeometry, cluster: &[usize]) -> Vec<usize> {
    let mut inside = vec![false; g.vertex_count()];
    for &v in cluster {
        inside[v] = true;
    }
    (0..g.edge_count())
        .filter(|&e| {
            let (a, b) = g.edge_endpoints(e);
            inside[a] != inside[b]
        })
        .collect()
}
