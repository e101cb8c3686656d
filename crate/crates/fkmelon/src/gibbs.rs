//! Random-cluster measure on a box: heat-bath Glauber dynamics, exact
//! enumeration for small boxes, planar duality, and positive association
//! checks.
//!
//! The measure gives a configuration `w` weight `(p/(1-p))^{o(w)} q^{k(w)}`
//! where `o` counts open edges and `k` counts clusters after applying the
//! boundary condition. The heat-bath resampling probability for a single
//! edge is `p` when its endpoints are connected off the edge and
//! `p / (p + (1-p) q)` otherwise.

use crate::lattice::{
    check_endpoints, label_clusters, Boundary, BoxGeometry, ClusterLabeling, EdgeConfig,
    LatticeError,
};
use crate::rng::keyed_uniform;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GibbsError {
    #[error("parameters out of range: need 0 < p < 1 and q > 0")]
    BadParams,
    #[error("exact enumeration limited to 28 edges, box has {0}")]
    TooManyEdges(usize),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("no valid initial configuration for these endpoints")]
    NoInitialConfig,
}

/// Edge intensity and cluster weight of the random-cluster measure.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RcParams {
    pub p: f64,
    pub q: f64,
}

impl RcParams {
    pub fn new(p: f64, q: f64) -> Result<Self, GibbsError> {
        if !(p > 0.0 && p < 1.0 && q > 0.0) {
            return Err(GibbsError::BadParams);
        }
        Ok(RcParams { p, q })
    }
}

/// Dual edge intensity: the unique `p*` with `p p* / ((1-p)(1-p*)) = q`.
pub fn dual_parameter(p: f64, q: f64) -> f64 {
    q * (1.0 - p) / (p + q * (1.0 - p))
}

/// Self-dual point `sqrt(q) / (1 + sqrt(q))`, the fixed point of
/// [`dual_parameter`].
pub fn self_dual_point(q: f64) -> f64 {
    q.sqrt() / (1.0 + q.sqrt())
}

/// Whether the endpoints of edge `e` are connected by the configuration with
/// `e` removed, under the configuration's boundary condition.
pub fn connected_off_edge(config: &EdgeConfig, e: usize) -> bool {
    let g = config.geometry;
    let (src, dst) = g.edge_endpoints(e);
    let wired = config.boundary == Boundary::Wired;
    let mut seen = vec![false; g.vertex_count()];
    let mut stack = vec![src];
    seen[src] = true;
    let mut boundary_expanded = false;
    while let Some(v) = stack.pop() {
        if v == dst {
            return true;
        }
        if wired && !boundary_expanded && g.is_boundary_vertex(v) {
            boundary_expanded = true;
            for b in g.boundary_vertices() {
                if !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        let (c, r) = g.vertex_coords(v);
        let h = g.height();
        let nh = g.horizontal_edge_count();
        let mut try_edge = |edge: usize, w: usize, stack: &mut Vec<usize>| {
            if edge != e && config.is_open(edge) && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        };
        if c > 0 {
            try_edge((c - 1) as usize * h + (r - g.h_lo) as usize, v - h, &mut stack);
        }
        if c < g.n as i64 {
            try_edge(c as usize * h + (r - g.h_lo) as usize, v + h, &mut stack);
        }
        if r > g.h_lo {
            try_edge(nh + c as usize * (h - 1) + (r - 1 - g.h_lo) as usize, v - 1, &mut stack);
        }
        if r < g.h_hi {
            try_edge(nh + c as usize * (h - 1) + (r - g.h_lo) as usize, v + 1, &mut stack);
        }
    }
    false
}

/// Heat-bath probability that edge `e` is open given the rest of `config`.
pub fn heat_bath_open_prob(config: &EdgeConfig, params: RcParams, e: usize) -> f64 {
    if params.q == 1.0 || connected_off_edge(config, e) {
        params.p
    } else {
        params.p / (params.p + (1.0 - params.p) * params.q)
    }
}

/// A single-site Glauber chain for the random-cluster measure. Randomness is
/// addressed by `(seed, chain_id, sweep, edge)`, so a state can be advanced
/// deterministically and independently of other chains.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub config: EdgeConfig,
    pub params: RcParams,
    pub seed: u64,
    pub chain_id: u64,
    pub sweeps_done: u64,
}

impl ChainState {
    /// Starts from the extremal configuration matching the boundary
    /// condition: all-open for wired, all-closed for free.
    pub fn new(
        geometry: BoxGeometry,
        boundary: Boundary,
        params: RcParams,
        seed: u64,
        chain_id: u64,
    ) -> Self {
        let config = match boundary {
            Boundary::Wired => EdgeConfig::all_open(geometry, boundary),
            Boundary::Free => EdgeConfig::all_closed(geometry, boundary),
        };
        ChainState { config, params, seed, chain_id, sweeps_done: 0 }
    }

    /// Resamples edge `e` from its conditional law given the rest.
    pub fn heat_bath_step(&mut self, e: usize) {
        let p_open = heat_bath_open_prob(&self.config, self.params, e);
        let u = keyed_uniform(&[self.seed, self.chain_id, self.sweeps_done, e as u64]);
        self.config.set(e, u < p_open);
    }

    /// One full sweep: every edge once, in index order.
    pub fn sweep(&mut self) {
        for e in 0..self.config.geometry.edge_count() {
            self.heat_bath_step(e);
        }
        self.sweeps_done += 1;
    }
}

/// Burn-in and thinning schedule for chain sampling.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SampleOptions {
    pub burn_in: u64,
    pub thinning: u64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions { burn_in: 200, thinning: 10 }
    }
}

/// Draws `count` configurations from the chain after burn-in, keeping one
/// state every `thinning` sweeps.
pub fn sample_fk(
    geometry: BoxGeometry,
    boundary: Boundary,
    params: RcParams,
    count: usize,
    options: SampleOptions,
    seed: u64,
) -> Vec<EdgeConfig> {
    let mut chain = ChainState::new(geometry, boundary, params, seed, 0);
    for _ in 0..options.burn_in {
        chain.sweep();
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..options.thinning.max(1) {
            chain.sweep();
        }
        out.push(chain.config.clone());
    }
    out
}

/// Direct product-measure draw, valid exactly when `q = 1`. The draw with
/// index `index` under a fixed seed is reproducible in isolation.
pub fn sample_bernoulli(
    geometry: BoxGeometry,
    boundary: Boundary,
    p: f64,
    seed: u64,
    index: u64,
) -> EdgeConfig {
    let mut config = EdgeConfig::all_closed(geometry, boundary);
    for e in 0..geometry.edge_count() {
        if keyed_uniform(&[seed, index, e as u64]) < p {
            config.set(e, true);
        }
    }
    config
}

/// Exact probability of an event under the random-cluster measure, by
/// enumerating all configurations. Limited to 28 edges.
pub fn exact_enumerate<F>(
    geometry: BoxGeometry,
    boundary: Boundary,
    params: RcParams,
    event: F,
) -> Result<f64, GibbsError>
where
    F: Fn(&EdgeConfig, &ClusterLabeling) -> bool + Sync,
{
    let m = geometry.edge_count();
    if m > 28 {
        return Err(GibbsError::TooManyEdges(m));
    }
    let lambda = params.p / (1.0 - params.p);
    let chunks = 1u64 << m.min(12);
    let per = (1u64 << m) / chunks;
    let (total, hit) = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut total = 0.0f64;
            let mut hit = 0.0f64;
            for mask in chunk * per..(chunk + 1) * per {
                let config = EdgeConfig::from_mask(geometry, boundary, mask);
                let labels = label_clusters(&config);
                let w = lambda.powi(mask.count_ones() as i32)
                    * params.q.powi(labels.cluster_count as i32);
                total += w;
                if event(&config, &labels) {
                    hit += w;
                }
            }
            (total, hit)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(hit / total)
}

/// Exact probability of every configuration, indexed by edge bitmask.
/// Limited to 20 edges so the table stays small.
pub fn exact_distribution(
    geometry: BoxGeometry,
    boundary: Boundary,
    params: RcParams,
) -> Result<Vec<f64>, GibbsError> {
    let m = geometry.edge_count();
    if m > 20 {
        return Err(GibbsError::TooManyEdges(m));
    }
    let lambda = params.p / (1.0 - params.p);
    let mut probs: Vec<f64> = (0u64..1 << m)
        .into_par_iter()
        .map(|mask| {
            let config = EdgeConfig::from_mask(geometry, boundary, mask);
            let labels = label_clusters(&config);
            lambda.powi(mask.count_ones() as i32) * params.q.powi(labels.cluster_count as i32)
        })
        .collect();
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }
    Ok(probs)
}

/// Exact joint law of the statistic `(open edge count, cluster count)`.
pub fn exact_open_cluster_law(
    geometry: BoxGeometry,
    boundary: Boundary,
    params: RcParams,
) -> Result<std::collections::BTreeMap<(u32, u32), f64>, GibbsError> {
    let m = geometry.edge_count();
    if m > 28 {
        return Err(GibbsError::TooManyEdges(m));
    }
    let lambda = params.p / (1.0 - params.p);
    let maps = (0u64..1 << m.min(10))
        .into_par_iter()
        .map(|chunk| {
            let mut map = std::collections::BTreeMap::new();
            let per = (1u64 << m) >> m.min(10);
            for mask in chunk * per..(chunk + 1) * per {
                let config = EdgeConfig::from_mask(geometry, boundary, mask);
                let labels = label_clusters(&config);
                let w = lambda.powi(mask.count_ones() as i32)
                    * params.q.powi(labels.cluster_count as i32);
                *map.entry((mask.count_ones(), labels.cluster_count as u32)).or_insert(0.0) += w;
            }
            map
        })
        .reduce(std::collections::BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0.0) += v;
            }
            a
        });
    let total: f64 = maps.values().sum();
    Ok(maps.into_iter().map(|(k, v)| (k, v / total)).collect())
}

/// Monte-Carlo estimate of the covariance of two events, with a batch-means
/// standard error. For increasing events positive association predicts a
/// non-negative covariance.
pub fn fkg_check<A, B>(
    geometry: BoxGeometry,
    boundary: Boundary,
    params: RcParams,
    samples: usize,
    options: SampleOptions,
    seed: u64,
    event_a: A,
    event_b: B,
) -> (f64, f64)
where
    A: Fn(&EdgeConfig, &ClusterLabeling) -> bool,
    B: Fn(&EdgeConfig, &ClusterLabeling) -> bool,
{
    let configs = sample_fk(geometry, boundary, params, samples, options, seed);
    let batches = 20.min(samples);
    let per = samples / batches;
    let mut covs = Vec::with_capacity(batches);
    for b in 0..batches {
        let mut pa = 0.0;
        let mut pb = 0.0;
        let mut pab = 0.0;
        for config in &configs[b * per..(b + 1) * per] {
            let labels = label_clusters(config);
            let a = event_a(config, &labels);
            let bb = event_b(config, &labels);
            pa += a as u8 as f64;
            pb += bb as u8 as f64;
            pab += (a && bb) as u8 as f64;
        }
        let m = per as f64;
        covs.push(pab / m - (pa / m) * (pb / m));
    }
    crate::stats::mean_stderr(&covs)
}

/// Builds a configuration realizing `Con` and `NI` for the given endpoints:
/// one monotone lattice path per index, pairwise disjoint, everything else
/// closed. Errs when the constructed paths collide (possible for steep
/// endpoint displacements on short boxes).
pub fn initial_con_ni_config(
    geometry: BoxGeometry,
    boundary: Boundary,
    x: &[i64],
    y: &[i64],
) -> Result<EdgeConfig, GibbsError> {
    check_endpoints(&geometry, x)?;
    check_endpoints(&geometry, y)?;
    if x.len() != y.len() {
        return Err(GibbsError::Lattice(LatticeError::BadEndpoints));
    }
    let g = geometry;
    let n = g.n as i64;
    let mut config = EdgeConfig::all_closed(g, boundary);
    for (&xi, &yi) in x.iter().zip(y) {
        let z = |c: i64| -> i64 {
            if yi >= xi {
                (xi + c).min(yi)
            } else {
                (xi - c).max(yi)
            }
        };
        if z(n) != yi {
            return Err(GibbsError::NoInitialConfig);
        }
        for c in 0..n {
            let (a, b) = (z(c), z(c + 1));
            let (lo, hi) = (a.min(b), a.max(b));
            for r in lo..hi {
                let e = g.horizontal_edge_count()
                    + c as usize * (g.height() - 1)
                    + (r - g.h_lo) as usize;
                config.set(e, true);
            }
            let e = c as usize * g.height() + (b - g.h_lo) as usize;
            config.set(e, true);
        }
    }
    let labels = label_clusters(&config);
    let status = crate::lattice::check_con_ni(&g, &labels, x, y)?;
    if !status.holds() {
        return Err(GibbsError::NoInitialConfig);
    }
    Ok(config)
}

/// Heat-bath sampler for the measure conditioned on `Con` and `NI`: a move
/// is drawn from the single-edge conditional law restricted to values that
/// keep the configuration inside the event.
pub struct ConditionedChain {
    pub config: EdgeConfig,
    pub params: RcParams,
    pub seed: u64,
    pub chain_id: u64,
    pub sweeps_done: u64,
    x: Vec<i64>,
    y: Vec<i64>,
    labels: ClusterLabeling,
}

impl ConditionedChain {
    pub fn new(
        geometry: BoxGeometry,
        boundary: Boundary,
        params: RcParams,
        x: &[i64],
        y: &[i64],
        seed: u64,
        chain_id: u64,
    ) -> Result<Self, GibbsError> {
        let config = initial_con_ni_config(geometry, boundary, x, y)?;
        let labels = label_clusters(&config);
        Ok(ConditionedChain {
            config,
            params,
            seed,
            chain_id,
            sweeps_done: 0,
            x: x.to_vec(),
            y: y.to_vec(),
            labels,
        })
    }

    fn source_roots(&self) -> Vec<u32> {
        let g = self.config.geometry;
        self.x.iter().map(|&xi| self.labels.root(g.vertex_index(0, xi))).collect()
    }

    fn con_holds(&self, labels: &ClusterLabeling) -> bool {
        let g = self.config.geometry;
        self.x.iter().zip(&self.y).all(|(&xi, &yi)| {
            labels.same_cluster(g.vertex_index(0, xi), g.vertex_index(g.n as i64, yi))
        })
    }

    pub fn sweep(&mut self) {
        let g = self.config.geometry;
        let q_is_one = self.params.q == 1.0;
        for e in 0..g.edge_count() {
            let (u, v) = g.edge_endpoints(e);
            let open_now = self.config.is_open(e);
            let source_roots = self.source_roots();

            let mut labels_off: Option<ClusterLabeling> = None;
            let (allow_open, allow_closed, conn_off) = if !open_now {
                let (ru, rv) = (self.labels.root(u), self.labels.root(v));
                let merges_sources =
                    ru != rv && source_roots.contains(&ru) && source_roots.contains(&rv);
                (!merges_sources, true, ru == rv)
            } else {
                let in_source = source_roots.contains(&self.labels.root(u));
                if q_is_one && !in_source {
                    // Closing an edge outside every source cluster cannot
                    // break Con, and closing never breaks NI.
                    (true, true, true)
                } else {
                    let mut off = self.config.clone();
                    off.set(e, false);
                    let lo = label_clusters(&off);
                    let ok = if in_source { self.con_holds(&lo) } else { true };
                    let conn = lo.same_cluster(u, v);
                    labels_off = Some(lo);
                    (true, ok, conn)
                }
            };

            let p = self.params.p;
            let p_open = if q_is_one || conn_off {
                p
            } else {
                p / (p + (1.0 - p) * self.params.q)
            };
            let want_open = match (allow_open, allow_closed) {
                (true, true) => {
                    keyed_uniform(&[self.seed, self.chain_id, self.sweeps_done, e as u64])
                        < p_open
                }
                (true, false) => true,
                (false, true) => false,
                (false, false) => unreachable!("current value is always allowed"),
            };
            if want_open != open_now {
                self.config.set(e, want_open);
                self.labels = match (want_open, labels_off) {
                    (false, Some(lo)) => lo,
                    _ => label_clusters(&self.config),
                };
            }
        }
        self.sweeps_done += 1;
    }

    pub fn status(&self) -> crate::lattice::ConNiStatus {
        crate::lattice::check_con_ni(&self.config.geometry, &self.labels, &self.x, &self.y)
            .expect("endpoints validated at construction")
    }
}

/// Draws configurations from the measure conditioned on `Con` and `NI`,
/// running `chains` independent chains in parallel and concatenating their
/// thinned outputs.
pub fn sample_fk_conditioned(
    geometry: BoxGeometry,
    boundary: Boundary,
    params: RcParams,
    x: &[i64],
    y: &[i64],
    count: usize,
    chains: usize,
    options: SampleOptions,
    seed: u64,
) -> Result<Vec<EdgeConfig>, GibbsError> {
    let chains = chains.max(1);
    let per = count.div_ceil(chains);
    let results: Result<Vec<Vec<EdgeConfig>>, GibbsError> = (0..chains as u64)
        .into_par_iter()
        .map(|chain_id| {
            let mut chain =
                ConditionedChain::new(geometry, boundary, params, x, y, seed, chain_id)?;
            for _ in 0..options.burn_in {
                chain.sweep();
            }
            let mut out = Vec::with_capacity(per);
            for _ in 0..per {
                for _ in 0..options.thinning.max(1) {
                    chain.sweep();
                }
                debug_assert!(chain.status().holds());
                out.push(chain.config.clone());
            }
            Ok(out)
        })
        .collect();
    let mut all: Vec<EdgeConfig> = results?.into_iter().flatten().collect();
    all.truncate(count);
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::check_con_ni;

    #[test]
    fn dual_parameter_matches_known_value() {
        // q = 2, p = 1/4 has dual 6/7.
        let d = dual_parameter(0.25, 2.0);
        assert!((d - 6.0 / 7.0).abs() < 1e-12, "dual {d}");
    }

    #[test]
    fn dual_parameter_is_an_involution() {
        for &q in &[1.0, 1.5, 2.0, 3.0] {
            for &p in &[0.1, 0.3, 0.5, 0.7, 0.9] {
                let pp = dual_parameter(dual_parameter(p, q), q);
                assert!((pp - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn self_dual_point_is_fixed() {
        for &q in &[1.0, 2.0, 4.0] {
            let p = self_dual_point(q);
            assert!((dual_parameter(p, q) - p).abs() < 1e-12);
            // Equivalent form of the fixed-point equation.
            assert!((p / (1.0 - p) - q.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn heat_bath_prob_disconnected_case() {
        let g = BoxGeometry::new(1, 0, 1).unwrap();
        let config = EdgeConfig::all_closed(g, Boundary::Free);
        let params = RcParams::new(0.4, 2.0).unwrap();
        let p = heat_bath_open_prob(&config, params, 0);
        assert!((p - 0.25).abs() < 1e-12, "expected 0.4/(0.4+0.6*2), got {p}");
    }

    #[test]
    fn heat_bath_prob_connected_case() {
        let g = BoxGeometry::new(1, 0, 1).unwrap();
        let mut config = EdgeConfig::all_closed(g, Boundary::Free);
        // Open the other three edges of the unit square: endpoints of edge 0
        // are connected off the edge.
        for e in 1..g.edge_count() {
            config.set(e, true);
        }
        let params = RcParams::new(0.4, 2.0).unwrap();
        assert!((heat_bath_open_prob(&config, params, 0) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn wired_boundary_connects_far_vertices() {
        let g = BoxGeometry::new(4, -2, 2).unwrap();
        // Edge between (2,-2) and (2,-1): with all edges closed, under wired
        // bc the endpoint on the boundary is connected to everything on the
        // boundary but not to the interior endpoint.
        let e = g.horizontal_edge_count() + 2 * (g.height() - 1);
        let config = EdgeConfig::all_closed(g, Boundary::Wired);
        assert!(!connected_off_edge(&config, e));
        // Open a path from (2,-1) to the boundary elsewhere: now connected.
        let mut config = config;
        config.set(g.horizontal_edge_count() + 2 * (g.height() - 1) + 1, true); // (2,-1)-(2,0)
        config.set(g.horizontal_edge_count() + 2 * (g.height() - 1) + 2, true); // (2,0)-(2,1)
        config.set(g.horizontal_edge_count() + 2 * (g.height() - 1) + 3, true); // (2,1)-(2,2)
        assert!(connected_off_edge(&config, e));
    }

    #[test]
    fn exact_enumeration_matches_bernoulli_for_q1() {
        // For q = 1 the measure is product Bernoulli(p); the probability that
        // a fixed edge is open must be exactly p.
        let g = BoxGeometry::new(2, 0, 1).unwrap();
        let params = RcParams::new(0.37, 1.0).unwrap();
        let prob =
            exact_enumerate(g, Boundary::Free, params, |c, _| c.is_open(3)).unwrap();
        assert!((prob - 0.37).abs() < 1e-12);
    }

    #[test]
    fn exact_enumeration_single_edge_q2() {
        // One isolated edge with free bc: P[open] = p q / (p q + (1-p) q^2)
        // since opening merges two clusters into one.
        let g = BoxGeometry::new(1, 0, 0).unwrap();
        let params = RcParams::new(0.4, 2.0).unwrap();
        let prob = exact_enumerate(g, Boundary::Free, params, |c, _| c.is_open(0)).unwrap();
        assert!((prob - 0.25).abs() < 1e-12, "got {prob}");
    }

    #[test]
    fn chain_marginal_matches_exact_on_tiny_box() {
        let g = BoxGeometry::new(2, 0, 1).unwrap();
        let params = RcParams::new(0.45, 2.0).unwrap();
        for boundary in [Boundary::Free, Boundary::Wired] {
            let exact = exact_enumerate(g, boundary, params, |c, _| c.is_open(2)).unwrap();
            let mut chain = ChainState::new(g, boundary, params, 77, 0);
            for _ in 0..100 {
                chain.sweep();
            }
            let mut hits = 0u64;
            let total = 40_000u64;
            for _ in 0..total {
                chain.sweep();
                hits += chain.config.is_open(2) as u64;
            }
            let (freq, se) = crate::stats::freq_stderr(hits, total);
            assert!(
                (freq - exact).abs() < 5.0 * se.max(1e-3),
                "{boundary:?}: chain {freq} vs exact {exact}"
            );
        }
    }

    #[test]
    fn fkg_covariance_nonnegative_for_edge_events() {
        let g = BoxGeometry::new(2, 0, 1).unwrap();
        let params = RcParams::new(0.5, 2.0).unwrap();
        let (cov, se) = fkg_check(
            g,
            Boundary::Free,
            params,
            20_000,
            SampleOptions { burn_in: 100, thinning: 2 },
            5,
            |c, _| c.is_open(0),
            |c, _| c.is_open(1),
        );
        assert!(cov > -3.0 * se, "cov {cov} se {se}");
        // Cross-check the sign against exact enumeration.
        let pa = exact_enumerate(g, Boundary::Free, params, |c, _| c.is_open(0)).unwrap();
        let pb = exact_enumerate(g, Boundary::Free, params, |c, _| c.is_open(1)).unwrap();
        let pab = exact_enumerate(g, Boundary::Free, params, |c, _| {
            c.is_open(0) && c.is_open(1)
        })
        .unwrap();
        assert!(pab - pa * pb >= -1e-12);
    }

    #[test]
    fn initial_config_realizes_event() {
        let g = BoxGeometry::new(6, -4, 4).unwrap();
        for (x, y) in [
            (vec![-2, 2], vec![-2, 2]),
            (vec![-3, 0, 3], vec![-3, 0, 3]),
            (vec![-2, 2], vec![0, 4]),
            (vec![-4, -1], vec![-2, 3]),
        ] {
            let config = initial_con_ni_config(g, Boundary::Free, &x, &y).unwrap();
            let labels = label_clusters(&config);
            assert!(check_con_ni(&g, &labels, &x, &y).unwrap().holds(), "x={x:?} y={y:?}");
        }
    }

    #[test]
    fn conditioned_chain_stays_in_event() {
        let g = BoxGeometry::new(6, -4, 4).unwrap();
        let params = RcParams::new(0.45, 1.0).unwrap();
        let mut chain =
            ConditionedChain::new(g, Boundary::Free, params, &[-2, 2], &[-2, 2], 3, 0).unwrap();
        for _ in 0..50 {
            chain.sweep();
            assert!(chain.status().holds());
        }
    }

    #[test]
    fn conditioned_chain_matches_exact_conditional_law() {
        // Tiny box, r = 1: compare a per-edge marginal of the conditioned
        // chain against exact enumeration of the conditional measure.
        let g = BoxGeometry::new(2, 0, 1).unwrap();
        let params = RcParams::new(0.5, 1.5).unwrap();
        let x = [0i64];
        let y = [0i64];
        let joint = exact_enumerate(g, Boundary::Free, params, |c, l| {
            check_con_ni(&g, l, &x, &y).unwrap().holds() && c.is_open(1)
        })
        .unwrap();
        let event = exact_enumerate(g, Boundary::Free, params, |_, l| {
            check_con_ni(&g, l, &x, &y).unwrap().holds()
        })
        .unwrap();
        let exact = joint / event;

        let mut chain =
            ConditionedChain::new(g, Boundary::Free, params, &x, &y, 11, 0).unwrap();
        for _ in 0..200 {
            chain.sweep();
        }
        let total = 60_000u64;
        let mut hits = 0u64;
        for _ in 0..total {
            chain.sweep();
            hits += chain.config.is_open(1) as u64;
        }
        let (freq, se) = crate::stats::freq_stderr(hits, total);
        assert!(
            (freq - exact).abs() < 5.0 * se.max(1e-3),
            "chain {freq} vs exact {exact}"
        );
    }
}
