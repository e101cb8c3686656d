//! Systems of directed random walks conditioned to stay in the Weyl chamber
//! `W = {z_1 < z_2 < ... < z_r}`.
//!
//! Increments are pairs `(theta, x)` with `theta >= 1` a time advance and
//! `x` a centered (given `theta`) spatial displacement with finite support.
//! A synchronized r-walk system draws one common `theta` per step and r
//! conditionally independent spatial displacements.
//!
//! The module provides exact path counting (Karlin-McGregor determinants and
//! dynamic programming over the chamber), the restricted transition kernel
//! `q_n(x, y)`, an exact conditioned-bridge sampler driven by backward DP
//! tables, a positive-harmonic-function estimator, and the repulsion and
//! diamond-disjointness statistics used by the experiment harness.

use crate::geometry::ConeParams;
use crate::rng::StreamRng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WalkError {
    #[error("increment distribution invalid: {0}")]
    BadDist(String),
    #[error("start vector must lie strictly inside the Weyl chamber")]
    NotInChamber,
    #[error("endpoints must have matching coordinate parities (all x_i alike, all y_i alike, y - x reachable in n steps)")]
    ParityMismatch,
    #[error("rank mismatch between endpoint vectors")]
    RankMismatch,
    #[error("target unreachable: the kernel value is zero")]
    Unreachable,
}

/// Finite-support law of one directed increment `(theta, x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementDist {
    entries: Vec<(u32, i64, f64)>,
}

impl IncrementDist {
    /// Validates support, normalization, and conditional centering of the
    /// spatial part given each time advance.
    pub fn new(entries: Vec<(u32, i64, f64)>) -> Result<Self, WalkError> {
        if entries.is_empty() {
            return Err(WalkError::BadDist("empty support".into()));
        }
        let mut total = 0.0;
        let mut by_theta: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
        for &(theta, x, p) in &entries {
            if theta < 1 {
                return Err(WalkError::BadDist("time advance must be >= 1".into()));
            }
            if !(p > 0.0) {
                return Err(WalkError::BadDist("probabilities must be positive".into()));
            }
            total += p;
            let e = by_theta.entry(theta).or_insert((0.0, 0.0));
            e.0 += p;
            e.1 += p * x as f64;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(WalkError::BadDist(format!("probabilities sum to {total}")));
        }
        for (theta, (mass, mean)) in &by_theta {
            if (mean / mass).abs() > 1e-9 {
                return Err(WalkError::BadDist(format!(
                    "spatial part not centered given theta = {theta}"
                )));
            }
        }
        let mut entries = entries;
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        Ok(IncrementDist { entries })
    }

    /// The simple directed walk: one time unit, spatial step +-1.
    pub fn simple() -> Self {
        IncrementDist::new(vec![(1, 1, 0.5), (1, -1, 0.5)]).expect("valid")
    }

    /// Lazy variant: holds with probability `hold`, else +-1.
    pub fn lazy(hold: f64) -> Result<Self, WalkError> {
        if !(hold > 0.0 && hold < 1.0) {
            return Err(WalkError::BadDist("hold probability must be in (0,1)".into()));
        }
        IncrementDist::new(vec![
            (1, -1, (1.0 - hold) / 2.0),
            (1, 0, hold),
            (1, 1, (1.0 - hold) / 2.0),
        ])
    }

    pub fn entries(&self) -> &[(u32, i64, f64)] {
        &self.entries
    }

    /// Marginal law of the time advance.
    pub fn theta_law(&self) -> Vec<(u32, f64)> {
        let mut map: BTreeMap<u32, f64> = BTreeMap::new();
        for &(theta, _, p) in &self.entries {
            *map.entry(theta).or_insert(0.0) += p;
        }
        map.into_iter().collect()
    }

    /// Conditional law of the spatial step given the time advance.
    pub fn cond_steps(&self, theta: u32) -> Vec<(i64, f64)> {
        let mass: f64 =
            self.entries.iter().filter(|e| e.0 == theta).map(|e| e.2).sum();
        self.entries
            .iter()
            .filter(|e| e.0 == theta)
            .map(|&(_, x, p)| (x, p / mass))
            .collect()
    }

    pub fn max_theta(&self) -> u32 {
        self.entries.iter().map(|e| e.0).max().unwrap()
    }

    pub fn max_step(&self) -> i64 {
        self.entries.iter().map(|e| e.1.abs()).max().unwrap()
    }

    /// Whether every increment lies in the closed forward cone of aperture
    /// `delta`: `|x| <= delta * theta`.
    pub fn in_forward_cone(&self, delta: f64) -> bool {
        self.entries.iter().all(|&(theta, x, _)| (x.abs() as f64) <= delta * theta as f64)
    }

    pub fn mean_theta(&self) -> f64 {
        self.entries.iter().map(|&(t, _, p)| p * t as f64).sum()
    }

    /// Marginal variance of the spatial step.
    pub fn step_variance(&self) -> f64 {
        self.entries.iter().map(|&(_, x, p)| p * (x * x) as f64).sum()
    }

    fn draw(&self, rng: &mut StreamRng) -> (u32, i64) {
        let mut u = rng.uniform();
        for &(theta, x, p) in &self.entries {
            if u < p {
                return (theta, x);
            }
            u -= p;
        }
        let last = *self.entries.last().unwrap();
        (last.0, last.1)
    }

    fn draw_from(table: &[(i64, f64)], rng: &mut StreamRng) -> i64 {
        let mut u = rng.uniform();
        for &(x, p) in table {
            if u < p {
                return x;
            }
            u -= p;
        }
        table.last().unwrap().0
    }
}

/// A sampled r-walk system: per-walk piecewise-linear trajectories through
/// the integer points `(t, z)` they visit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkSystem {
    pub synchronized: bool,
    /// `trajectories[i]` lists the visited points of walk `i`, starting at
    /// time 0, with strictly increasing times.
    pub trajectories: Vec<Vec<(i64, i64)>>,
}

impl WalkSystem {
    pub fn rank(&self) -> usize {
        self.trajectories.len()
    }

    /// For a synchronized system: the common step times with the r heights
    /// at each.
    pub fn synchronized_heights(&self) -> Vec<(i64, Vec<i64>)> {
        assert!(self.synchronized);
        let steps = self.trajectories[0].len();
        (0..steps)
            .map(|k| {
                let t = self.trajectories[0][k].0;
                let hs = self.trajectories.iter().map(|w| w[k].1).collect();
                (t, hs)
            })
            .collect()
    }

    /// Strict vertical order at every synchronized step time.
    pub fn in_chamber(&self) -> bool {
        self.synchronized_heights()
            .iter()
            .all(|(_, h)| h.windows(2).all(|w| w[0] < w[1]))
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("walk system serializes")
    }
}

fn check_chamber(x: &[i64]) -> Result<(), WalkError> {
    if x.is_empty() || x.windows(2).any(|w| w[0] >= w[1]) {
        return Err(WalkError::NotInChamber);
    }
    Ok(())
}

/// Samples an unconditioned r-walk system of `steps` increments started at
/// `start`. Synchronized systems share the time advance across walks; free
/// systems draw fully independent increments per walk.
pub fn sample_system(
    dist: &IncrementDist,
    start: &[i64],
    steps: usize,
    synchronized: bool,
    seed: u64,
    index: u64,
) -> Result<WalkSystem, WalkError> {
    check_chamber(start)?;
    let mut trajectories: Vec<Vec<(i64, i64)>> =
        start.iter().map(|&z| vec![(0, z)]).collect();
    if synchronized {
        let mut rng = StreamRng::from_key(&[seed, index, 0x73796e63]);
        let theta_law = dist.theta_law();
        let mut t = 0i64;
        for _ in 0..steps {
            let mut u = rng.uniform();
            let mut theta = theta_law.last().unwrap().0;
            for &(th, p) in &theta_law {
                if u < p {
                    theta = th;
                    break;
                }
                u -= p;
            }
            let table = dist.cond_steps(theta);
            t += theta as i64;
            for w in trajectories.iter_mut() {
                let x = IncrementDist::draw_from(&table, &mut rng);
                let z = w.last().unwrap().1 + x;
                w.push((t, z));
            }
        }
    } else {
        for (i, w) in trajectories.iter_mut().enumerate() {
            let mut rng = StreamRng::from_key(&[seed, index, i as u64]);
            for _ in 0..steps {
                let (theta, x) = dist.draw(&mut rng);
                let (t, z) = *w.last().unwrap();
                w.push((t + theta as i64, z + x));
            }
        }
    }
    Ok(WalkSystem { synchronized, trajectories: trajectories.to_vec() })
}

fn binomial(n: u32, k: u32) -> i128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    acc
}

/// Simple-walk path count from height `a` to height `b` in `n` steps.
fn simple_walk_count(a: i64, b: i64, n: usize) -> i128 {
    let d = b - a;
    if (d + n as i64) % 2 != 0 || d.abs() > n as i64 {
        return 0;
    }
    binomial(n as u32, ((n as i64 + d) / 2) as u32)
}

fn det_i128(m: &[Vec<i128>]) -> i128 {
    let r = m.len();
    if r == 1 {
        return m[0][0];
    }
    let mut det = 0i128;
    for j in 0..r {
        let minor: Vec<Vec<i128>> = m[1..]
            .iter()
            .map(|row| {
                row.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, &v)| v).collect()
            })
            .collect();
        let term = m[0][j] * det_i128(&minor);
        if j % 2 == 0 {
            det += term;
        } else {
            det -= term;
        }
    }
    det
}

/// Karlin-McGregor count of simple-walk systems from `x` to `y` in `n` steps
/// that stay strictly ordered at every step: `det[N(x_i -> y_j)]`.
///
/// The determinant identity needs crossings to force collisions, which for
/// +-1 steps holds when all coordinates of `x` share one parity and all
/// coordinates of `y` share the parity reachable in `n` steps.
pub fn km_bridge_count(x: &[i64], y: &[i64], n: usize) -> Result<i128, WalkError> {
    check_chamber(x)?;
    check_chamber(y)?;
    if x.len() != y.len() {
        return Err(WalkError::RankMismatch);
    }
    let same_parity = |v: &[i64]| v.iter().all(|z| (z - v[0]) % 2 == 0);
    if !same_parity(x) || !same_parity(y) || (y[0] - x[0] + n as i64) % 2 != 0 {
        return Err(WalkError::ParityMismatch);
    }
    let r = x.len();
    let m: Vec<Vec<i128>> = (0..r)
        .map(|i| (0..r).map(|j| simple_walk_count(x[i], y[j], n)).collect())
        .collect();
    Ok(det_i128(&m))
}

fn encode(z: &[i64]) -> u64 {
    let mut key = 0u64;
    for (i, &zi) in z.iter().enumerate() {
        key |= ((zi + 32768) as u64 & 0xffff) << (16 * i);
    }
    key
}

fn decode(key: u64, r: usize) -> Vec<i64> {
    (0..r).map(|i| ((key >> (16 * i)) & 0xffff) as i64 - 32768).collect()
}

fn in_chamber_encoded(z: &[i64]) -> bool {
    z.windows(2).all(|w| w[0] < w[1])
}

/// Exact count of simple-walk systems from `x` to `y` staying strictly
/// ordered at every step, by dynamic programming over the chamber. Pure
/// integer arithmetic; comparable bit for bit with [`km_bridge_count`].
pub fn dp_weyl_count(x: &[i64], y: &[i64], n: usize) -> Result<i128, WalkError> {
    check_chamber(x)?;
    check_chamber(y)?;
    if x.len() != y.len() {
        return Err(WalkError::RankMismatch);
    }
    let r = x.len();
    let mut cur: BTreeMap<u64, i128> = BTreeMap::new();
    cur.insert(encode(x), 1);
    for _ in 0..n {
        let mut next: BTreeMap<u64, i128> = BTreeMap::new();
        for (&key, &count) in &cur {
            let z = decode(key, r);
            for signs in 0u32..1 << r {
                let zz: Vec<i64> = z
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| v + if signs >> i & 1 == 1 { 1 } else { -1 })
                    .collect();
                if in_chamber_encoded(&zz) {
                    *next.entry(encode(&zz)).or_insert(0) += count;
                }
            }
        }
        cur = next;
    }
    Ok(cur.get(&encode(y)).copied().unwrap_or(0))
}

/// Weyl-restricted kernel value with a record of the probability mass
/// clipped by the height cap.
#[derive(Clone, Copy, Debug)]
pub struct DpKernel {
    pub prob: f64,
    pub leaked: f64,
}

/// Recommended height cap: six standard deviations of horizontal drift plus
/// the endpoint span.
pub fn default_cap(dist: &IncrementDist, x: &[i64], y: &[i64], n: usize) -> i64 {
    let steps = n as f64 / dist.mean_theta();
    let sd = (dist.step_variance() * steps).sqrt();
    let span = x.iter().chain(y).map(|z| z.abs()).max().unwrap_or(0);
    (6.0 * sd).ceil() as i64 + span + dist.max_step()
}

fn vector_moves(dist: &IncrementDist, r: usize) -> Vec<(u32, Vec<i64>, f64)> {
    let mut moves = Vec::new();
    for (theta, p_theta) in dist.theta_law() {
        let table = dist.cond_steps(theta);
        let mut combos: Vec<(Vec<i64>, f64)> = vec![(Vec::new(), p_theta)];
        for _ in 0..r {
            combos = combos
                .iter()
                .flat_map(|(prefix, p)| {
                    table.iter().map(move |&(x, px)| {
                        let mut v = prefix.clone();
                        v.push(x);
                        (v, p * px)
                    })
                })
                .collect();
        }
        for (v, p) in combos {
            moves.push((theta, v, p));
        }
    }
    moves
}

/// Probability that a synchronized system started at `x` stays in the
/// chamber at every step time up to `n` and sits exactly at `y` at time `n`.
pub fn dp_weyl_kernel(
    dist: &IncrementDist,
    x: &[i64],
    y: &[i64],
    n: usize,
    h_cap: i64,
) -> Result<DpKernel, WalkError> {
    check_chamber(x)?;
    check_chamber(y)?;
    if x.len() != y.len() {
        return Err(WalkError::RankMismatch);
    }
    let r = x.len();
    let moves = vector_moves(dist, r);
    // Slices indexed by time; only times reachable by theta sums are filled.
    let mut slices: Vec<BTreeMap<u64, f64>> = vec![BTreeMap::new(); n + 1];
    slices[0].insert(encode(x), 1.0);
    let mut leaked = 0.0;
    for t in 0..n {
        if slices[t].is_empty() {
            continue;
        }
        let cur = std::mem::take(&mut slices[t]);
        for (&key, &mass) in &cur {
            let z = decode(key, r);
            for (theta, v, p) in &moves {
                let tt = t + *theta as usize;
                if tt > n {
                    continue;
                }
                let zz: Vec<i64> = z.iter().zip(v).map(|(a, b)| a + b).collect();
                if !in_chamber_encoded(&zz) {
                    continue;
                }
                if zz.iter().any(|&h| h.abs() > h_cap) {
                    leaked += mass * p;
                    continue;
                }
                *slices[tt].entry(encode(&zz)).or_insert(0.0) += mass * p;
            }
        }
    }
    Ok(DpKernel { prob: slices[n].get(&encode(y)).copied().unwrap_or(0.0), leaked })
}

/// Backward tables `g_t(z) = P[(t,z) -> (n,y) staying in the chamber]`,
/// checkpointed every `block` slices so memory stays proportional to
/// `sqrt`-style blocks rather than the full horizon.
struct BackwardTables {
    r: usize,
    n: usize,
    h_cap: i64,
    moves: Vec<(u32, Vec<i64>, f64)>,
    checkpoints: BTreeMap<usize, BTreeMap<u64, f64>>,
}

impl BackwardTables {
    fn build(dist: &IncrementDist, y: &[i64], n: usize, h_cap: i64, block: usize) -> Self {
        let r = y.len();
        let moves = vector_moves(dist, r);
        let mut tables =
            BackwardTables { r, n, h_cap, moves, checkpoints: BTreeMap::new() };
        let max_theta = tables.max_theta() as usize;
        let mut live: BTreeMap<usize, BTreeMap<u64, f64>> = BTreeMap::new();
        let mut terminal = BTreeMap::new();
        terminal.insert(encode(y), 1.0);
        tables.checkpoints.insert(n, terminal.clone());
        live.insert(n, terminal);
        for t in (0..n).rev() {
            let slice = tables.pull_back(&live, t);
            live.insert(t, slice);
            // Only the last max_theta slices feed further recursion.
            live.retain(|&s, _| s <= t + max_theta);
            if t % block == 0 {
                // Store the whole live run: recomputing slice t-1 later
                // needs every slice up to t - 1 + max_theta.
                for (&s, sl) in &live {
                    tables.checkpoints.entry(s).or_insert_with(|| sl.clone());
                }
            }
        }
        tables
    }

    fn max_theta(&self) -> u32 {
        self.moves.iter().map(|m| m.0).max().unwrap()
    }

    /// One backward step: `g_t` from the already-computed later slices.
    fn pull_back(
        &self,
        slices: &BTreeMap<usize, BTreeMap<u64, f64>>,
        t: usize,
    ) -> BTreeMap<u64, f64> {
        let mut out: BTreeMap<u64, f64> = BTreeMap::new();
        // Candidate states are exactly the predecessors of supported states.
        for (theta, v, p) in &self.moves {
            let tt = t + *theta as usize;
            if tt > self.n {
                continue;
            }
            let Some(later) = slices.get(&tt) else { continue };
            for (&key, &mass) in later {
                let zz = decode(key, self.r);
                let z: Vec<i64> = zz.iter().zip(v).map(|(a, b)| a - b).collect();
                if !in_chamber_encoded(&z) || z.iter().any(|&h| h.abs() > self.h_cap) {
                    continue;
                }
                *out.entry(encode(&z)).or_insert(0.0) += mass * p;
            }
        }
        out
    }

    /// Recomputes the contiguous slices `[lo, hi]` from the nearest stored
    /// checkpoint at or beyond `hi`.
    fn window(&self, lo: usize, hi: usize) -> Vec<BTreeMap<u64, f64>> {
        let max_theta = self.max_theta() as usize;
        // Base: smallest checkpointed time at or beyond hi whose whole
        // successor run (capped at n) is also checkpointed.
        let c0 = self
            .checkpoints
            .range(hi..)
            .map(|(&k, _)| k)
            .find(|&k| {
                (k..=(k + max_theta - 1).min(self.n))
                    .all(|s| self.checkpoints.contains_key(&s))
            })
            .expect("checkpoint run exists at or beyond hi");
        let mut live: BTreeMap<usize, BTreeMap<u64, f64>> = BTreeMap::new();
        for s in c0..=(c0 + max_theta - 1).min(self.n) {
            live.insert(s, self.checkpoints[&s].clone());
        }
        for t in (lo..c0).rev() {
            let slice = match self.checkpoints.get(&t) {
                Some(cp) => cp.clone(),
                None => self.pull_back(&live, t),
            };
            live.insert(t, slice);
        }
        (lo..=hi).map(|t| live.remove(&t).unwrap_or_default()).collect()
    }
}

/// Conditioned-bridge sampling strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BridgeMethod {
    /// Resample unconditioned systems until one realizes the bridge event.
    Rejection,
    /// Exact forward sampling against backward DP tables.
    DpBackward,
}

/// Draws synchronized systems from the law conditioned on staying in the
/// chamber at every step time on `[0, n]` and hitting `(n, y)`.
pub fn sample_conditioned_bridge(
    dist: &IncrementDist,
    x: &[i64],
    y: &[i64],
    n: usize,
    count: usize,
    method: BridgeMethod,
    h_cap: i64,
    seed: u64,
) -> Result<Vec<WalkSystem>, WalkError> {
    check_chamber(x)?;
    check_chamber(y)?;
    if x.len() != y.len() {
        return Err(WalkError::RankMismatch);
    }
    match method {
        BridgeMethod::Rejection => sample_bridge_rejection(dist, x, y, n, count, seed),
        BridgeMethod::DpBackward => sample_bridge_dp(dist, x, y, n, count, h_cap, seed),
    }
}

fn sample_bridge_rejection(
    dist: &IncrementDist,
    x: &[i64],
    y: &[i64],
    n: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<WalkSystem>, WalkError> {
    let theta_law = dist.theta_law();
    let mut out = Vec::with_capacity(count);
    let mut rng = StreamRng::from_key(&[seed, 0x72656a]);
    let mut attempts: u64 = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 200_000_000 {
            return Err(WalkError::Unreachable);
        }
        let mut t = 0i64;
        let mut z = x.to_vec();
        let mut trajectories: Vec<Vec<(i64, i64)>> =
            x.iter().map(|&v| vec![(0, v)]).collect();
        let mut ok = true;
        while (t as usize) < n {
            let mut u = rng.uniform();
            let mut theta = theta_law.last().unwrap().0;
            for &(th, p) in &theta_law {
                if u < p {
                    theta = th;
                    break;
                }
                u -= p;
            }
            t += theta as i64;
            if t as usize > n {
                ok = false;
                break;
            }
            let table = dist.cond_steps(theta);
            for (i, zi) in z.iter_mut().enumerate() {
                *zi += IncrementDist::draw_from(&table, &mut rng);
                trajectories[i].push((t, *zi));
            }
            if !in_chamber_encoded(&z) {
                ok = false;
                break;
            }
        }
        if ok && t as usize == n && z == y {
            out.push(WalkSystem { synchronized: true, trajectories });
        }
    }
    Ok(out)
}

fn sample_bridge_dp(
    dist: &IncrementDist,
    x: &[i64],
    y: &[i64],
    n: usize,
    count: usize,
    h_cap: i64,
    seed: u64,
) -> Result<Vec<WalkSystem>, WalkError> {
    let block = ((n as f64).sqrt().ceil() as usize).clamp(8, 128);
    let tables = BackwardTables::build(dist, y, n, h_cap, block);
    let start = tables
        .checkpoints
        .get(&0)
        .and_then(|s| s.get(&encode(x)))
        .copied()
        .unwrap_or(0.0);
    if start <= 0.0 {
        return Err(WalkError::Unreachable);
    }
    let max_theta = tables.max_theta() as usize;

    struct Walker {
        t: usize,
        z: Vec<i64>,
        trajectories: Vec<Vec<(i64, i64)>>,
        rng: StreamRng,
    }
    let mut walkers: Vec<Walker> = (0..count)
        .map(|i| Walker {
            t: 0,
            z: x.to_vec(),
            trajectories: x.iter().map(|&v| vec![(0, v)]).collect(),
            rng: StreamRng::from_key(&[seed, 0x6470, i as u64]),
        })
        .collect();

    let mut lo = 0usize;
    while lo < n {
        let hi = (lo + block - 1 + max_theta).min(n);
        let window = tables.window(lo, hi);
        let g = |t: usize, key: u64| -> f64 {
            window[t - lo].get(&key).copied().unwrap_or(0.0)
        };
        let block_end = (lo + block).min(n);
        for w in walkers.iter_mut() {
            while w.t < block_end && w.t < n {
                let g_here = g(w.t, encode(&w.z));
                debug_assert!(g_here > 0.0);
                let mut u = w.rng.uniform() * g_here;
                let mut chosen: Option<(u32, Vec<i64>)> = None;
                for (theta, v, p) in &tables.moves {
                    let tt = w.t + *theta as usize;
                    if tt > n {
                        continue;
                    }
                    let zz: Vec<i64> = w.z.iter().zip(v).map(|(a, b)| a + b).collect();
                    if !in_chamber_encoded(&zz) || zz.iter().any(|&h| h.abs() > h_cap) {
                        continue;
                    }
                    let weight = p * g(tt, encode(&zz));
                    if u < weight {
                        chosen = Some((*theta, zz));
                        break;
                    }
                    u -= weight;
                }
                let (theta, zz) = chosen.expect("total move weight equals g(t, z)");
                w.t += theta as usize;
                for (i, traj) in w.trajectories.iter_mut().enumerate() {
                    traj.push((w.t as i64, zz[i]));
                }
                w.z = zz;
            }
        }
        lo = block_end;
    }
    Ok(walkers
        .into_iter()
        .map(|w| {
            debug_assert!(w.t == n && w.z == y);
            WalkSystem { synchronized: true, trajectories: w.trajectories }
        })
        .collect())
}

/// Exact marginal of the conditioned bridge at time `t`: the law of the
/// height vector, from forward times backward tables. Requires `t` to be a
/// reachable step time (always true when every `theta` equals 1).
pub fn bridge_marginal(
    dist: &IncrementDist,
    x: &[i64],
    y: &[i64],
    n: usize,
    t: usize,
    h_cap: i64,
) -> Result<BTreeMap<Vec<i64>, f64>, WalkError> {
    let r = x.len();
    let moves = vector_moves(dist, r);
    let mut forward: Vec<BTreeMap<u64, f64>> = vec![BTreeMap::new(); t + 1];
    forward[0].insert(encode(x), 1.0);
    for s in 0..t {
        let cur = std::mem::take(&mut forward[s]);
        for (&key, &mass) in &cur {
            let z = decode(key, r);
            for (theta, v, p) in &moves {
                let tt = s + *theta as usize;
                if tt > t {
                    continue;
                }
                let zz: Vec<i64> = z.iter().zip(v).map(|(a, b)| a + b).collect();
                if in_chamber_encoded(&zz) && zz.iter().all(|&h| h.abs() <= h_cap) {
                    *forward[tt].entry(encode(&zz)).or_insert(0.0) += mass * p;
                }
            }
        }
    }
    let tables = BackwardTables::build(dist, y, n, h_cap, n.max(1));
    let back = tables.window(t, t).remove(0);
    let mut out: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    let mut total = 0.0;
    for (&key, &f) in &forward[t] {
        let gb = back.get(&key).copied().unwrap_or(0.0);
        if f * gb > 0.0 {
            out.insert(decode(key, r), f * gb);
            total += f * gb;
        }
    }
    if total <= 0.0 {
        return Err(WalkError::Unreachable);
    }
    for v in out.values_mut() {
        *v /= total;
    }
    Ok(out)
}

/// Positive harmonic function estimate on a grid of chamber points, via
/// power iteration of the chamber-restricted kernel: the survival mass
/// `u_N(x) = P_x[chamber for N steps]`, normalized so the value at the
/// widest grid point matches the Vandermonde determinant there.
#[derive(Clone, Debug)]
pub struct HarmonicEstimate {
    pub points: Vec<(Vec<i64>, f64)>,
    pub iterations: usize,
    /// Largest relative drift of the normalized values between `N/2` and `N`
    /// iterations; a convergence indicator.
    pub residual: f64,
}

impl HarmonicEstimate {
    pub fn value(&self, x: &[i64]) -> Option<f64> {
        self.points.iter().find(|(p, _)| p == x).map(|&(_, v)| v)
    }
}

fn min_gap_of(x: &[i64]) -> i64 {
    x.windows(2).map(|w| w[1] - w[0]).min().unwrap_or(i64::MAX)
}

/// Survival of the synchronized system in the chamber for `iterations`
/// steps, computed for every start in `grid` at once by backward recursion
/// on a dense two-walk domain or a sparse map for other ranks.
pub fn estimate_v(
    dist: &IncrementDist,
    grid: &[Vec<i64>],
    iterations: usize,
) -> Result<HarmonicEstimate, WalkError> {
    if grid.is_empty() {
        return Err(WalkError::NotInChamber);
    }
    let r = grid[0].len();
    for x in grid {
        check_chamber(x)?;
        if x.len() != r {
            return Err(WalkError::RankMismatch);
        }
    }
    let span = grid.iter().flatten().map(|z| z.abs()).max().unwrap();
    let steps = iterations as f64 / dist.mean_theta();
    let reach = (4.0 * (dist.step_variance() * steps).sqrt()).ceil() as i64
        + span
        + dist.max_step();

    let survival = |n_iter: usize| -> Vec<f64> {
        if r == 2 {
            survival_two_dense(dist, grid, n_iter, reach)
        } else {
            survival_sparse(dist, grid, n_iter, reach)
        }
    };
    let full = survival(iterations);
    let half = survival(iterations / 2);

    let widest = grid
        .iter()
        .enumerate()
        .max_by_key(|(_, x)| min_gap_of(x))
        .map(|(i, _)| i)
        .unwrap();
    let delta_widest = crate::watermelon::vandermonde_i(&grid[widest]);
    let norm_full = delta_widest / full[widest];
    let norm_half = delta_widest / half[widest];
    let residual = grid
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let a = full[i] * norm_full;
            let b = half[i] * norm_half;
            ((a - b) / a).abs()
        })
        .fold(0.0, f64::max);
    let points = grid
        .iter()
        .enumerate()
        .map(|(i, x)| (x.clone(), full[i] * norm_full))
        .collect();
    Ok(HarmonicEstimate { points, iterations, residual })
}

fn survival_two_dense(
    dist: &IncrementDist,
    grid: &[Vec<i64>],
    iterations: usize,
    reach: i64,
) -> Vec<f64> {
    let lo = -reach;
    let w = (2 * reach + 1) as usize;
    let idx = |z1: i64, z2: i64| -> usize { ((z1 - lo) * (2 * reach + 1) + (z2 - lo)) as usize };
    let moves = vector_moves(dist, 2);
    // Time advances are irrelevant for survival counting by iteration count:
    // each vector move is one synchronized step whatever its theta.
    let mut cur = vec![0.0f64; w * w];
    for z1 in lo..=reach {
        for z2 in z1 + 1..=reach {
            cur[idx(z1, z2)] = 1.0;
        }
    }
    let mut next = vec![0.0f64; w * w];
    for _ in 0..iterations {
        next.iter_mut().for_each(|v| *v = 0.0);
        for z1 in lo..=reach {
            for z2 in z1 + 1..=reach {
                let mut acc = 0.0;
                for (_, v, p) in &moves {
                    let (a, b) = (z1 + v[0], z2 + v[1]);
                    if a < b && a >= lo && b <= reach {
                        acc += p * cur[idx(a, b)];
                    }
                }
                next[idx(z1, z2)] = acc;
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    grid.iter().map(|x| cur[idx(x[0], x[1])]).collect()
}

fn survival_sparse(
    dist: &IncrementDist,
    grid: &[Vec<i64>],
    iterations: usize,
    reach: i64,
) -> Vec<f64> {
    let r = grid[0].len();
    let moves = vector_moves(dist, r);
    // Backward recursion from the all-ones function, restricted to states
    // reachable from the grid (forward closure).
    let mut states: std::collections::BTreeSet<u64> = grid.iter().map(|x| encode(x)).collect();
    let mut frontier: Vec<u64> = states.iter().copied().collect();
    for _ in 0..iterations {
        let mut newf = Vec::new();
        for &key in &frontier {
            let z = decode(key, r);
            for (_, v, _) in &moves {
                let zz: Vec<i64> = z.iter().zip(v).map(|(a, b)| a + b).collect();
                if in_chamber_encoded(&zz) && zz.iter().all(|&h| h.abs() <= reach) {
                    let k = encode(&zz);
                    if states.insert(k) {
                        newf.push(k);
                    }
                }
            }
        }
        if newf.is_empty() {
            break;
        }
        frontier = newf;
    }
    let mut cur: BTreeMap<u64, f64> = states.iter().map(|&k| (k, 1.0)).collect();
    for _ in 0..iterations {
        let mut next: BTreeMap<u64, f64> = BTreeMap::new();
        for &key in &states {
            let z = decode(key, r);
            let mut acc = 0.0;
            for (_, v, p) in &moves {
                let zz: Vec<i64> = z.iter().zip(v).map(|(a, b)| a + b).collect();
                if in_chamber_encoded(&zz) && zz.iter().all(|&h| h.abs() <= reach) {
                    acc += p * cur.get(&encode(&zz)).copied().unwrap_or(0.0);
                }
            }
            next.insert(key, acc);
        }
        cur = next;
    }
    grid.iter().map(|x| cur[&encode(x)]).collect()
}

/// Whether the diamond chains of the walks are pairwise disjoint: for each
/// walk, take the union of the diamonds spanned by its consecutive visited
/// points; require the r unions to be pairwise disjoint closed sets.
pub fn nonintdiam_check(system: &WalkSystem, cone: ConeParams) -> bool {
    let d = cone.delta;
    // In sheared coordinates (d t + z, d t - z) each diamond is an axis
    // rectangle and both corner coordinates advance monotonically along the
    // trajectory, so chains can be intersected with a linear sweep.
    let rects: Vec<Vec<[f64; 4]>> = system
        .trajectories
        .iter()
        .map(|w| {
            w.windows(2)
                .map(|seg| {
                    let (a, b) = (seg[0], seg[1]);
                    [
                        d * a.0 as f64 + a.1 as f64,
                        d * b.0 as f64 + b.1 as f64,
                        d * a.0 as f64 - a.1 as f64,
                        d * b.0 as f64 - b.1 as f64,
                    ]
                })
                .collect()
        })
        .collect();
    for i in 0..rects.len() {
        for j in i + 1..rects.len() {
            let (ri, rj) = (&rects[i], &rects[j]);
            let (mut ki, mut kj) = (0usize, 0usize);
            while ki < ri.len() && kj < rj.len() {
                let a = &ri[ki];
                let b = &rj[kj];
                let overlap_1 = a[0] <= b[1] && b[0] <= a[1];
                let overlap_2 = a[2] <= b[3] && b[2] <= a[3];
                if overlap_1 && overlap_2 {
                    return false;
                }
                if a[1] < b[1] {
                    ki += 1;
                } else {
                    kj += 1;
                }
            }
        }
    }
    true
}

/// Repulsion summary of a batch of synchronized systems on `[0, n]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepulsionStats {
    pub n: usize,
    pub epsilon: f64,
    /// Per sample: first step time at which all gaps exceed `n^epsilon`
    /// (n + 1 when never).
    pub eta_first: Vec<f64>,
    /// Per sample: last step time at which all gaps exceed `n^epsilon`
    /// (-1 when never).
    pub eta_last: Vec<f64>,
    /// Per sample: smallest gap over step times in `[n^eps, n - n^eps]`.
    pub bulk_min_gap: Vec<f64>,
}

impl RepulsionStats {
    pub fn freq_eta_exceeds(&self, threshold: f64) -> f64 {
        let hits = self.eta_first.iter().filter(|&&t| t > threshold).count();
        hits as f64 / self.eta_first.len() as f64
    }

    pub fn freq_bulk_gap_at_most(&self, threshold: f64) -> f64 {
        let hits = self.bulk_min_gap.iter().filter(|&&g| g <= threshold).count();
        hits as f64 / self.bulk_min_gap.len() as f64
    }
}

/// Computes first/last wide-gap times and the bulk minimal gap for each
/// synchronized system.
pub fn repulsion_stats(samples: &[WalkSystem], n: usize, epsilon: f64) -> RepulsionStats {
    let gap_threshold = (n as f64).powf(epsilon);
    let bulk_lo = (n as f64).powf(epsilon);
    let bulk_hi = n as f64 - bulk_lo;
    let mut eta_first = Vec::with_capacity(samples.len());
    let mut eta_last = Vec::with_capacity(samples.len());
    let mut bulk_min_gap = Vec::with_capacity(samples.len());
    for sys in samples {
        let heights = sys.synchronized_heights();
        let gap_at = |h: &Vec<i64>| -> f64 { crate::geometry::gap(h) };
        let mut first = n as f64 + 1.0;
        let mut last = -1.0;
        let mut bulk = f64::INFINITY;
        for (t, h) in &heights {
            let g = gap_at(h);
            let tf = *t as f64;
            if g > gap_threshold {
                if tf < first {
                    first = tf;
                }
                if tf > last {
                    last = tf;
                }
            }
            if tf >= bulk_lo && tf <= bulk_hi && g < bulk {
                bulk = g;
            }
        }
        eta_first.push(first);
        eta_last.push(last);
        bulk_min_gap.push(bulk);
    }
    RepulsionStats { n, epsilon, eta_first, eta_last, bulk_min_gap }
}

/// Number of step times `t <= horizon` at which the walk sits within
/// `tube` of the reference function.
pub fn non_confinement_count<F: Fn(i64) -> f64>(
    trajectory: &[(i64, i64)],
    reference: F,
    tube: f64,
    horizon: i64,
) -> usize {
    trajectory
        .iter()
        .filter(|&&(t, z)| t <= horizon && ((z as f64) - reference(t)).abs() < tube)
        .count()
}
