//! Brownian watermelons: r Brownian bridges on [0, 1] conditioned never to
//! intersect, their fixed-time marginal density, and two samplers.
//!
//! The time-t marginal has density proportional to
//! `(t(1-t))^{-r^2/2} D(z)^2 exp(-|z|^2 / (2 t(1-t)))` on the Weyl chamber,
//! with `D` the Vandermonde determinant. The matrix-bridge sampler reads the
//! ordered eigenvalues of a Hermitian matrix of Gaussian bridges; the
//! epsilon-rejection sampler conditions slightly offset independent bridges
//! on staying ordered. Both are gated by a Kolmogorov-Smirnov test of the
//! midpoint marginal against the density.

use crate::rng::StreamRng;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WatermelonError {
    #[error("need 0 < t < 1")]
    BadTime,
    #[error("grid resolution too coarse: need m >= 16")]
    CoarseGrid,
    #[error("rejection budget exhausted; acceptance rate about {0:.2e}")]
    RejectionBudget(f64),
    #[error("rank must be between 1 and 4")]
    BadRank,
}

/// Vandermonde product over pairs, empty product = 1.
pub fn vandermonde(z: &[f64]) -> f64 {
    let mut acc = 1.0;
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            acc *= z[j] - z[i];
        }
    }
    acc
}

/// Integer-vector convenience wrapper.
pub fn vandermonde_i(z: &[i64]) -> f64 {
    let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
    vandermonde(&zf)
}

/// Normalized fixed-time marginal of the r-watermelon.
#[derive(Clone, Debug)]
pub struct MarginalDensity {
    pub r: usize,
    pub t: f64,
    norm: f64,
}

impl MarginalDensity {
    /// Builds the density, computing the normalization by product-grid
    /// quadrature over the symmetrized integrand (the chamber restriction
    /// contributes a 1/r! factor because the integrand is symmetric).
    pub fn new(r: usize, t: f64) -> Result<Self, WatermelonError> {
        if !(t > 0.0 && t < 1.0) {
            return Err(WatermelonError::BadTime);
        }
        if r == 0 || r > 4 {
            return Err(WatermelonError::BadRank);
        }
        let m = match r {
            1 => 4000,
            2 => 700,
            3 => 160,
            _ => 60,
        };
        let norm = Self::quadrature_norm(r, t, m);
        Ok(MarginalDensity { r, t, norm })
    }

    /// Closed-form normalization from the Gaussian Selberg integral:
    /// `s^{r^2/2} (2 pi)^{r/2} prod_{j<=r} j! / r!` with `s = t(1-t)`.
    pub fn closed_form_norm(r: usize, t: f64) -> f64 {
        let s = t * (1.0 - t);
        let mut fact_prod = 1.0f64;
        let mut fact = 1.0f64;
        for j in 1..=r {
            fact *= j as f64;
            fact_prod *= fact;
        }
        let r_fact = (1..=r).map(|j| j as f64).product::<f64>();
        s.powf((r * r) as f64 / 2.0)
            * (2.0 * std::f64::consts::PI).powf(r as f64 / 2.0)
            * fact_prod
            / r_fact
    }

    /// Trapezoid-grid integral of `D^2(z) exp(-|z|^2/(2s))` over `[-L, L]^r`
    /// divided by `r!`.
    pub fn quadrature_norm(r: usize, t: f64, m: usize) -> f64 {
        let s = t * (1.0 - t);
        let l = 8.0 * s.sqrt() * (1.0 + (r as f64).sqrt());
        let h = 2.0 * l / m as f64;
        let mut z = vec![0.0f64; r];
        let mut idx = vec![0usize; r];
        let mut total = 0.0f64;
        loop {
            let mut weight = 1.0;
            for d in 0..r {
                z[d] = -l + idx[d] as f64 * h;
                if idx[d] == 0 || idx[d] == m {
                    weight *= 0.5;
                }
            }
            let v = vandermonde(&z);
            let norm2: f64 = z.iter().map(|x| x * x).sum();
            total += weight * v * v * (-norm2 / (2.0 * s)).exp();
            // Odometer over the grid.
            let mut d = 0;
            loop {
                if d == r {
                    let r_fact = (1..=r).map(|j| j as f64).product::<f64>();
                    return total * h.powi(r as i32) / r_fact;
                }
                idx[d] += 1;
                if idx[d] <= m {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }

    /// Normalization constant in use.
    pub fn normalization(&self) -> f64 {
        self.norm
    }

    /// Density at an ordered point; 0 outside the chamber.
    pub fn density(&self, z: &[f64]) -> f64 {
        assert_eq!(z.len(), self.r);
        if z.windows(2).any(|w| w[0] >= w[1]) {
            return 0.0;
        }
        let s = self.t * (1.0 - self.t);
        let v = vandermonde(z);
        let norm2: f64 = z.iter().map(|x| x * x).sum();
        v * v * (-norm2 / (2.0 * s)).exp() / self.norm
    }

    /// Cumulative distribution of coordinate `j` (0 = lowest path) as an
    /// interpolation table built by grid integration.
    pub fn coordinate_cdf(&self, j: usize) -> CdfTable {
        assert!(j < self.r);
        let s = self.t * (1.0 - self.t);
        let l = 6.0 * s.sqrt() * (1.0 + (self.r as f64).sqrt());
        let bins = 600usize;
        let h = 2.0 * l / bins as f64;
        let mut mass = vec![0.0f64; bins + 1];
        match self.r {
            1 => {
                for (k, slot) in mass.iter_mut().enumerate() {
                    let z = -l + k as f64 * h;
                    *slot = self.density(&[z]);
                }
            }
            2 => {
                let m2 = 600usize;
                let h2 = 2.0 * l / m2 as f64;
                for k in 0..=bins {
                    let zj = -l + k as f64 * h;
                    let mut acc = 0.0;
                    for k2 in 0..=m2 {
                        let zo = -l + k2 as f64 * h2;
                        let z = if j == 0 { [zj, zo] } else { [zo, zj] };
                        acc += self.density(&z);
                    }
                    mass[k] = acc * h2;
                }
            }
            _ => {
                // Low-resolution nested integration for r = 3 or 4.
                let m2 = 120usize;
                let h2 = 2.0 * l / m2 as f64;
                for k in 0..=bins {
                    let zj = -l + k as f64 * h;
                    let mut acc = 0.0;
                    let others = self.r - 1;
                    let mut idx = vec![0usize; others];
                    loop {
                        let mut z: Vec<f64> = Vec::with_capacity(self.r);
                        let mut oi = 0;
                        for pos in 0..self.r {
                            if pos == j {
                                z.push(zj);
                            } else {
                                z.push(-l + idx[oi] as f64 * h2);
                                oi += 1;
                            }
                        }
                        acc += self.density(&z);
                        let mut d = 0;
                        loop {
                            if d == others {
                                break;
                            }
                            idx[d] += 1;
                            if idx[d] <= m2 {
                                break;
                            }
                            idx[d] = 0;
                            d += 1;
                        }
                        if d == others {
                            break;
                        }
                    }
                    mass[k] = acc * h2.powi(others as i32);
                }
            }
        }
        let mut cum = vec![0.0f64; bins + 1];
        for k in 1..=bins {
            cum[k] = cum[k - 1] + 0.5 * (mass[k - 1] + mass[k]) * h;
        }
        let total = cum[bins];
        for c in cum.iter_mut() {
            *c /= total;
        }
        CdfTable { lo: -l, step: h, values: cum }
    }
}

/// Piecewise-linear cumulative distribution table.
#[derive(Clone, Debug)]
pub struct CdfTable {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl CdfTable {
    pub fn eval(&self, x: f64) -> f64 {
        let pos = (x - self.lo) / self.step;
        if pos <= 0.0 {
            return 0.0;
        }
        let k = pos.floor() as usize;
        if k + 1 >= self.values.len() {
            return 1.0;
        }
        let frac = pos - k as f64;
        self.values[k] + frac * (self.values[k + 1] - self.values[k])
    }
}

/// One sampled watermelon: ordered height vectors on a uniform time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WatermelonSample {
    pub times: Vec<f64>,
    /// `heights[k]` is the ordered r-vector at `times[k]`.
    pub heights: Vec<Vec<f64>>,
}

impl WatermelonSample {
    pub fn rank(&self) -> usize {
        self.heights[0].len()
    }

    pub fn at_time(&self, t: f64) -> &[f64] {
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - t).abs().partial_cmp(&(b.1 - t).abs()).unwrap()
            })
            .unwrap()
            .0;
        &self.heights[k]
    }

    pub fn ordered_interior(&self) -> bool {
        self.heights[1..self.heights.len() - 1]
            .iter()
            .all(|h| h.windows(2).all(|w| w[0] < w[1]))
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("sample serializes")
    }
}

/// Sampling strategy for watermelons.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WatermelonMethod {
    MatrixBridge,
    /// Offset-rejection with the given start spacing epsilon.
    EpsilonRejection(u32),
}

/// Epsilon values (times 1e-2) supported by the rejection sampler reports.
pub const EPSILON_DEFAULT_CENTS: u32 = 5;

fn bridge_step(rng: &mut StreamRng, b: f64, t: f64, dt: f64) -> f64 {
    // Standard Brownian bridge to 0 at time 1.
    let mean = b * (1.0 - t - dt) / (1.0 - t);
    let var = dt * (1.0 - t - dt) / (1.0 - t);
    mean + var.max(0.0).sqrt() * rng.normal()
}

fn hermitian_bridge_sample(r: usize, m: usize, rng: &mut StreamRng) -> WatermelonSample {
    // Entry-wise independent standard bridges: r on the diagonal, r(r-1)/2
    // complex off-diagonal entries scaled by 1/sqrt(2). The time-t law of
    // the matrix then has density prop. to exp(-tr H^2 / (2 t(1-t))).
    let n_real = r * r;
    let mut states = vec![0.0f64; n_real];
    let dt = 1.0 / m as f64;
    let mut times = Vec::with_capacity(m + 1);
    let mut heights = Vec::with_capacity(m + 1);
    times.push(0.0);
    heights.push(vec![0.0; r]);
    for k in 0..m {
        let t = k as f64 * dt;
        for s in states.iter_mut() {
            *s = bridge_step(rng, *s, t, dt);
        }
        let tk = (k + 1) as f64 * dt;
        times.push(tk);
        if k + 1 == m {
            heights.push(vec![0.0; r]);
            break;
        }
        // Assemble the real-symmetric embedding [[A, -B], [B, A]] of A + iB.
        let mut a = DMatrix::<f64>::zeros(r, r);
        let mut b = DMatrix::<f64>::zeros(r, r);
        let mut s_iter = states.iter();
        for i in 0..r {
            a[(i, i)] = *s_iter.next().unwrap();
        }
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..r {
            for jj in i + 1..r {
                let re = *s_iter.next().unwrap() * inv_sqrt2;
                let im = *s_iter.next().unwrap() * inv_sqrt2;
                a[(i, jj)] = re;
                a[(jj, i)] = re;
                b[(i, jj)] = -im;
                b[(jj, i)] = im;
            }
        }
        let mut emb = DMatrix::<f64>::zeros(2 * r, 2 * r);
        for i in 0..r {
            for jj in 0..r {
                emb[(i, jj)] = a[(i, jj)];
                emb[(r + i, r + jj)] = a[(i, jj)];
                emb[(i, r + jj)] = -b[(i, jj)];
                emb[(r + i, jj)] = b[(i, jj)];
            }
        }
        let mut eig: Vec<f64> = emb
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        // Eigenvalues of the embedding are those of A + iB, doubled.
        let ordered: Vec<f64> = (0..r).map(|i| eig[2 * i]).collect();
        heights.push(ordered);
    }
    WatermelonSample { times, heights }
}

fn rejection_sample(
    r: usize,
    m: usize,
    epsilon: f64,
    rng: &mut StreamRng,
    budget: &mut u64,
) -> Option<WatermelonSample> {
    let dt = 1.0 / m as f64;
    'attempt: loop {
        if *budget == 0 {
            return None;
        }
        *budget -= 1;
        let mut states: Vec<f64> = (0..r).map(|i| i as f64 * epsilon).collect();
        let mut times = vec![0.0];
        let mut heights = vec![states.clone()];
        for k in 0..m {
            let t = k as f64 * dt;
            for (i, s) in states.iter_mut().enumerate() {
                let offset = i as f64 * epsilon;
                let b = *s - offset;
                *s = offset + bridge_step(rng, b, t, dt);
            }
            if k + 1 == m {
                states = (0..r).map(|i| i as f64 * epsilon).collect();
            }
            if states.windows(2).any(|w| w[0] >= w[1]) {
                continue 'attempt;
            }
            times.push((k + 1) as f64 * dt);
            heights.push(states.clone());
        }
        return Some(WatermelonSample { times, heights });
    }
}

/// Draws `count` watermelon samples on a uniform grid of `m` intervals.
pub fn sample_watermelon(
    r: usize,
    m: usize,
    count: usize,
    method: WatermelonMethod,
    seed: u64,
) -> Result<Vec<WatermelonSample>, WatermelonError> {
    if r == 0 || r > 4 {
        return Err(WatermelonError::BadRank);
    }
    if m < 16 {
        return Err(WatermelonError::CoarseGrid);
    }
    match method {
        WatermelonMethod::MatrixBridge => {
            let mut rng = StreamRng::from_key(&[seed, 0x6d74, r as u64, m as u64]);
            Ok((0..count).map(|_| hermitian_bridge_sample(r, m, &mut rng)).collect())
        }
        WatermelonMethod::EpsilonRejection(cents) => {
            let epsilon = cents as f64 / 100.0;
            let mut rng = StreamRng::from_key(&[seed, 0x6572, r as u64, m as u64]);
            let mut budget: u64 = (count as u64).saturating_mul(2_000_000).max(10_000_000);
            let initial_budget = budget;
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                match rejection_sample(r, m, epsilon, &mut rng, &mut budget) {
                    Some(s) => out.push(s),
                    None => {
                        let rate = out.len() as f64 / (initial_budget - budget) as f64;
                        return Err(WatermelonError::RejectionBudget(rate));
                    }
                }
            }
            Ok(out)
        }
    }
}

/// One-sample Kolmogorov-Smirnov statistic against an analytic CDF closure.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    assert!(!samples.is_empty());
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|u, v| u.partial_cmp(v).unwrap());
    xb.sort_by(|u, v| u.partial_cmp(v).unwrap());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while ia < xa.len() && ib < xb.len() {
        let (va, vb) = (xa[ia], xb[ib]);
        if va <= vb {
            ia += 1;
        }
        if vb <= va {
            ib += 1;
        }
        d = d.max((ia as f64 / na - ib as f64 / nb).abs());
    }
    // Once one sample is exhausted its ECDF sits at 1; the largest remaining
    // gap is attained immediately.
    d.max((ia as f64 / na - ib as f64 / nb).abs())
}

/// One-sample KS threshold at significance alpha = 0.01.
pub fn ks_threshold_one(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Two-sample KS threshold at significance alpha = 0.01.
pub fn ks_threshold_two(n: usize, m: usize) -> f64 {
    1.63 * (((n + m) as f64) / ((n * m) as f64)).sqrt()
}

/// KS gate of the midpoint marginal: bottom and top coordinates against
/// their grid-integrated reference CDFs. Returns the largest statistic.
pub fn midpoint_ks_gate(samples: &[WatermelonSample], density: &MarginalDensity) -> f64 {
    let r = density.r;
    let mut worst: f64 = 0.0;
    for j in [0, r - 1] {
        let cdf = density.coordinate_cdf(j);
        let xs: Vec<f64> = samples.iter().map(|s| s.at_time(density.t)[j]).collect();
        worst = worst.max(ks_statistic(&xs, |x| cdf.eval(x)));
        if r == 1 {
            break;
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vandermonde_examples() {
        assert_eq!(vandermonde(&[0.0, 1.0, 2.0]), 2.0);
        assert_eq!(vandermonde(&[3.5]), 1.0);
        assert_eq!(vandermonde(&[]), 1.0);
        assert_eq!(vandermonde(&[1.0, 1.0, 5.0]), 0.0);
        assert_eq!(vandermonde_i(&[0, 2]), 2.0);
    }

    #[test]
    fn quadrature_norm_matches_closed_form() {
        for (r, m) in [(1usize, 4000usize), (2, 700), (3, 160)] {
            for &t in &[0.3, 0.5] {
                let q = MarginalDensity::quadrature_norm(r, t, m);
                let c = MarginalDensity::closed_form_norm(r, t);
                assert!(
                    (q / c - 1.0).abs() < 1e-6,
                    "r={r} t={t}: quadrature {q} closed {c}"
                );
            }
        }
    }

    #[test]
    fn density_point_values_and_symmetry() {
        let d1 = MarginalDensity::new(1, 0.5).unwrap();
        let expect = 1.0 / (2.0 * std::f64::consts::PI * 0.25).sqrt();
        assert!((d1.density(&[0.0]) - expect).abs() < 1e-6);
        let d2 = MarginalDensity::new(2, 0.5).unwrap();
        assert_eq!(d2.density(&[1.0, -1.0]), 0.0);
        // Reflection symmetry z -> (-z_r, ..., -z_1).
        let a = d2.density(&[-0.3, 0.8]);
        let b = d2.density(&[-0.8, 0.3]);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn refined_quadrature_integrates_to_one() {
        // The normalization uses one grid; integrating the normalized
        // density with a finer grid must still give 1 within 1e-6.
        for r in 1..=3usize {
            let density = MarginalDensity::new(r, 0.5).unwrap();
            let m = match r {
                1 => 6000,
                2 => 1000,
                _ => 220,
            };
            let integral =
                MarginalDensity::quadrature_norm(r, 0.5, m) / density.normalization();
            assert!((integral - 1.0).abs() < 1e-6, "r={r}: {integral}");
        }
    }

    #[test]
    fn coordinate_cdf_is_monotone_and_normalized() {
        let d = MarginalDensity::new(2, 0.5).unwrap();
        let cdf = d.coordinate_cdf(0);
        assert!(cdf.eval(-10.0) < 1e-9);
        assert!((cdf.eval(10.0) - 1.0).abs() < 1e-9);
        let mut prev = 0.0;
        let mut x = -3.0;
        while x <= 3.0 {
            let v = cdf.eval(x);
            assert!(v >= prev - 1e-12);
            prev = v;
            x += 0.05;
        }
        // The two coordinates are reflections of each other at t = 1/2.
        let top = d.coordinate_cdf(1);
        for &x in &[-1.0, -0.3, 0.0, 0.4, 1.2] {
            assert!((cdf.eval(x) - (1.0 - top.eval(-x))).abs() < 1e-3);
        }
    }

    #[test]
    fn bridge_variance_at_midpoint() {
        let samples = sample_watermelon(1, 64, 10_000, WatermelonMethod::MatrixBridge, 3).unwrap();
        let mids: Vec<f64> = samples.iter().map(|s| s.at_time(0.5)[0]).collect();
        let mean = mids.iter().sum::<f64>() / mids.len() as f64;
        let var =
            mids.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (mids.len() - 1) as f64;
        let se = 0.25 * (2.0 / (mids.len() as f64 - 1.0)).sqrt();
        assert!((var - 0.25).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn samples_are_ordered_and_pinned() {
        for method in [WatermelonMethod::MatrixBridge, WatermelonMethod::EpsilonRejection(20)] {
            let samples = sample_watermelon(2, 32, 50, method, 7).unwrap();
            assert_eq!(samples.len(), 50);
            for s in &samples {
                assert!(s.ordered_interior(), "{method:?}");
                assert_eq!(s.times.len(), 33);
                // Endpoints at the sampler's start offsets.
                let last = s.heights.last().unwrap();
                assert_eq!(last, &s.heights[0]);
            }
        }
    }

    #[test]
    fn matrix_bridge_midpoint_passes_ks_gate() {
        let n = 10_000;
        let samples = sample_watermelon(2, 64, n, WatermelonMethod::MatrixBridge, 11).unwrap();
        let density = MarginalDensity::new(2, 0.5).unwrap();
        let ks = midpoint_ks_gate(&samples, &density);
        assert!(ks < ks_threshold_one(n), "ks {ks} vs {}", ks_threshold_one(n));
    }

    #[test]
    fn samplers_agree_on_midpoint_marginal() {
        let n = 4000;
        let a = sample_watermelon(2, 32, n, WatermelonMethod::MatrixBridge, 13).unwrap();
        let b = sample_watermelon(2, 32, n, WatermelonMethod::EpsilonRejection(5), 17).unwrap();
        let bottom = |s: &WatermelonSample| s.at_time(0.5)[0];
        let xa: Vec<f64> = a.iter().map(bottom).collect();
        let xb: Vec<f64> = b.iter().map(bottom).collect();
        let ks = ks_two_sample(&xa, &xb);
        // The rejection sampler carries an O(epsilon) bias; allow slack of
        // about epsilon on top of the two-sample threshold.
        assert!(ks < ks_threshold_two(n, n) + 0.05, "ks {ks}");
    }

    #[test]
    fn midpoint_second_moment_matches_quadrature() {
        let density = MarginalDensity::new(2, 0.5).unwrap();
        // E[z_0^2 + z_1^2] by quadrature.
        let l = 4.0f64;
        let m = 500;
        let h = 2.0 * l / m as f64;
        let mut expect = 0.0;
        for i in 0..=m {
            for j in 0..=m {
                let z = [-l + i as f64 * h, -l + j as f64 * h];
                let d = density.density(&z);
                expect += (z[0] * z[0] + z[1] * z[1]) * d;
            }
        }
        expect *= h * h;
        let n = 8000;
        let samples = sample_watermelon(2, 64, n, WatermelonMethod::MatrixBridge, 19).unwrap();
        let vals: Vec<f64> = samples
            .iter()
            .map(|s| {
                let z = s.at_time(0.5);
                z[0] * z[0] + z[1] * z[1]
            })
            .collect();
        let (mean, se) = crate::stats::mean_stderr(&vals);
        assert!((mean - expect).abs() < 3.0 * se, "mc {mean} quad {expect}");
    }

    #[test]
    fn ks_edge_cases() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        let d = ks_two_sample(&[0.0, 0.1, 0.2], &[5.0, 6.0, 7.0]);
        assert!((d - 1.0).abs() < 1e-12);
        let stat = ks_statistic(&[0.25, 0.5, 0.75], |x| x);
        assert!(stat <= 0.334 && stat > 0.0);
    }

    #[test]
    fn ks_self_consistency_calibration() {
        // Two draws of the same distribution stay below the alpha = 0.01
        // threshold in at least 95% of repetitions.
        let mut pass = 0;
        let reps = 40;
        for rep in 0..reps {
            let mut rng = StreamRng::from_key(&[881, rep]);
            let a: Vec<f64> = (0..2000).map(|_| rng.normal()).collect();
            let b: Vec<f64> = (0..2000).map(|_| rng.normal()).collect();
            if ks_two_sample(&a, &b) < ks_threshold_two(2000, 2000) {
                pass += 1;
            }
        }
        assert!(pass >= 38, "passes {pass}/{reps}");
    }
}
