//! Experiment harness: estimators for the inverse correlation length, the
//! joint connection/disjointness probability and its scaling fit, envelope
//! convergence diagnostics, global-repulsion diagnostics, and the
//! supercritical duality stretch check. All estimators are deterministic
//! given seed and parameters and report long-format rows
//! `n,estimate,stderr,samples,seconds`.

use crate::geometry::{maximal_decomposition, synchronized_skeleton, ConeParams, Skeleton};
use crate::gibbs::{
    dual_parameter, exact_enumerate, sample_bernoulli, sample_fk, sample_fk_conditioned,
    self_dual_point, RcParams, SampleOptions,
};
use crate::lattice::{check_con_ni, label_clusters, Boundary, BoxGeometry, EdgeConfig};
use crate::stats::{freq_stderr, weighted_least_squares};
use crate::watermelon::{
    ks_statistic, ks_threshold_one, ks_two_sample, sample_watermelon, WatermelonMethod,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("lattice error: {0}")]
    Lattice(#[from] crate::lattice::LatticeError),
    #[error("sampling error: {0}")]
    Gibbs(#[from] crate::gibbs::GibbsError),
    #[error("geometry error: {0}")]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("watermelon error: {0}")]
    Watermelon(#[from] crate::watermelon::WatermelonError),
    #[error("need at least {0} sizes, got {1}")]
    TooFewSizes(usize, usize),
    #[error("all sizes dropped: no connection events observed")]
    NothingObserved,
    #[error("p = {0} is not above the self-dual point {1}")]
    NotSupercritical(f64, f64),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Run description embedded into every artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub threads: usize,
    pub version: String,
    pub params: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, threads: usize) -> Self {
        RunManifest {
            command: command.to_string(),
            seed,
            threads,
            version: env!("CARGO_PKG_VERSION").to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn set(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }
}

/// One long-format result row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seconds: f64,
}

/// Generic experiment artifact: rows plus named fitted quantities and
/// boolean checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub manifest: RunManifest,
    pub rows: Vec<ReportRow>,
    pub fits: BTreeMap<String, f64>,
    pub checks: BTreeMap<String, bool>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn new(id: &str, manifest: RunManifest) -> Self {
        ExperimentReport {
            id: id.to_string(),
            manifest,
            rows: Vec::new(),
            fits: BTreeMap::new(),
            checks: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// CSV with the manifest on a `# manifest:` comment line.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# manifest: {}\n", self.manifest.to_json());
        out.push_str("n,estimate,stderr,samples,seconds\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{},{:.3}\n",
                row.n, row.estimate, row.stderr, row.samples, row.seconds
            ));
        }
        out
    }

    /// Writes atomically: a sibling temp file is renamed over the target.
    pub fn write_atomic(&self, path: &Path, csv: bool) -> Result<(), HarnessError> {
        let body = if csv { self.to_csv() } else { self.to_json() };
        write_atomic(path, body.as_bytes())
    }
}

/// Write-then-rename so readers never observe a partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let tmp = path.with_extension("tmp-write");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// One two-point frequency row in a strip of the given half height.
pub fn two_point_row(
    params: RcParams,
    boundary: Boundary,
    n: usize,
    half_height: i64,
    samples: usize,
    seed: u64,
    stream: u64,
) -> Option<ReportRow> {
    let start = Instant::now();
    let geometry = BoxGeometry::strip(n, half_height);
    let (hits, trials) = connection_freq(geometry, boundary, params, samples, seed, stream);
    if hits == 0 {
        return None;
    }
    let (p_hat, se) = freq_stderr(hits, trials);
    Some(ReportRow {
        n: n as u64,
        estimate: p_hat,
        stderr: se,
        samples: trials,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Fits the decay rate to already-computed two-point rows.
pub fn fit_tau_rows(rows: &[ReportRow], dropped: Vec<usize>) -> Result<TauEstimate, HarnessError> {
    if rows.len() < 2 {
        return Err(HarnessError::NothingObserved);
    }
    let design: Vec<Vec<f64>> = rows.iter().map(|r| vec![1.0, r.n as f64]).collect();
    let ys: Vec<f64> = rows.iter().map(|r| -r.estimate.ln()).collect();
    let ws: Vec<f64> = rows
        .iter()
        .map(|r| {
            let rel = r.stderr / r.estimate;
            1.0 / (rel * rel).max(1e-12)
        })
        .collect();
    let fit = weighted_least_squares(&design, &ys, &ws);
    let tau = fit.coeffs[1];
    // Subadditivity of -log phi gives phi(n) <= exp(-tau n) up to the
    // intercept; check each retained frequency against the fitted envelope
    // with three standard errors of slack.
    let subadditive_ok = rows.iter().all(|r| {
        let bound = (-tau * r.n as f64 - fit.coeffs[0]).exp();
        r.estimate <= bound * (1.0 + 3.0 * r.stderr / r.estimate) + 3.0 * r.stderr
    });
    Ok(TauEstimate {
        tau,
        tau_stderr: fit.stderrs[1],
        intercept: fit.coeffs[0],
        rows: rows.to_vec(),
        dropped,
        subadditive_ok,
    })
}

fn connection_freq(
    geometry: BoxGeometry,
    boundary: Boundary,
    params: RcParams,
    samples: usize,
    seed: u64,
    stream: u64,
) -> (u64, u64) {
    let a = geometry.vertex_index(0, 0);
    let b = geometry.vertex_index(geometry.n as i64, 0);
    if params.q == 1.0 {
        let hits = (0..samples as u64)
            .into_par_iter()
            .map(|i| {
                let config = sample_bernoulli(geometry, boundary, params.p, seed, stream << 32 | i);
                let labels = label_clusters(&config);
                u64::from(labels.same_cluster(a, b))
            })
            .sum();
        (hits, samples as u64)
    } else {
        let configs = sample_fk(
            geometry,
            boundary,
            params,
            samples,
            SampleOptions::default(),
            seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        );
        let hits = configs
            .par_iter()
            .map(|c| u64::from(label_clusters(c).same_cluster(a, b)))
            .sum();
        (hits, samples as u64)
    }
}

/// Inverse correlation length estimate from strip two-point frequencies.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TauEstimate {
    pub tau: f64,
    pub tau_stderr: f64,
    pub intercept: f64,
    pub rows: Vec<ReportRow>,
    pub dropped: Vec<usize>,
    pub subadditive_ok: bool,
}

/// Estimates the decay rate of `phi[0 <-> (n, 0)]` in strips of the given
/// half height by weighted regression of `-log phi_hat` on `n`. Sizes with
/// no observed connection are dropped with a warning entry.
pub fn estimate_tau(
    params: RcParams,
    boundary: Boundary,
    n_list: &[usize],
    half_height: i64,
    samples: usize,
    seed: u64,
) -> Result<TauEstimate, HarnessError> {
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for (k, &n) in n_list.iter().enumerate() {
        match two_point_row(params, boundary, n, half_height, samples, seed, k as u64) {
            Some(row) => rows.push(row),
            None => dropped.push(n),
        }
    }
    fit_tau_rows(&rows, dropped)
}

/// How to estimate the connection/disjointness probability.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConNiMethod {
    /// Exact transfer over all configurations; boxes up to 28 edges.
    Enumeration,
    /// Monte Carlo rejection from unconditioned samples.
    Rejection,
}

/// Estimate of `phi[Con and NI]` with a one-sided bound when nothing is
/// accepted.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConNiEstimate {
    pub prob: f64,
    pub stderr: f64,
    pub hits: u64,
    pub trials: u64,
    /// 95% upper confidence bound, set only when `hits == 0`.
    pub upper_bound: Option<f64>,
    pub seconds: f64,
}

/// Estimates the probability that every `x_i` connects to `y_i` while the
/// r clusters stay pairwise disjoint.
pub fn estimate_con_ni(
    geometry: BoxGeometry,
    boundary: Boundary,
    params: RcParams,
    x: &[i64],
    y: &[i64],
    samples: usize,
    method: ConNiMethod,
    seed: u64,
) -> Result<ConNiEstimate, HarnessError> {
    crate::lattice::check_endpoints(&geometry, x)?;
    crate::lattice::check_endpoints(&geometry, y)?;
    let start = Instant::now();
    match method {
        ConNiMethod::Enumeration => {
            let prob = exact_enumerate(geometry, boundary, params, |_, labels| {
                check_con_ni(&geometry, labels, x, y).map(|s| s.holds()).unwrap_or(false)
            })?;
            Ok(ConNiEstimate {
                prob,
                stderr: 0.0,
                hits: 0,
                trials: 0,
                upper_bound: None,
                seconds: start.elapsed().as_secs_f64(),
            })
        }
        ConNiMethod::Rejection => {
            let holds = |config: &EdgeConfig| {
                let labels = label_clusters(config);
                check_con_ni(&geometry, &labels, x, y).map(|s| s.holds()).unwrap_or(false)
            };
            let hits: u64 = if params.q == 1.0 {
                (0..samples as u64)
                    .into_par_iter()
                    .map(|i| {
                        u64::from(holds(&sample_bernoulli(geometry, boundary, params.p, seed, i)))
                    })
                    .sum()
            } else {
                sample_fk(geometry, boundary, params, samples, SampleOptions::default(), seed)
                    .par_iter()
                    .map(|c| u64::from(holds(c)))
                    .sum()
            };
            let trials = samples as u64;
            if hits == 0 {
                return Ok(ConNiEstimate {
                    prob: 0.0,
                    stderr: 0.0,
                    hits,
                    trials,
                    upper_bound: Some(3.0 / trials as f64),
                    seconds: start.elapsed().as_secs_f64(),
                });
            }
            let (prob, stderr) = freq_stderr(hits, trials);
            Ok(ConNiEstimate {
                prob,
                stderr,
                hits,
                trials,
                upper_bound: None,
                seconds: start.elapsed().as_secs_f64(),
            })
        }
    }
}

/// Three-parameter fit `log phi = a - tau r n - rho log n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingFit {
    pub intercept: f64,
    pub tau_fit: f64,
    pub tau_stderr: f64,
    pub rho: f64,
    pub rho_stderr: f64,
}

/// Fits the polynomial-times-exponential decay form to positive estimates
/// at four or more sizes. Zero stderr entries (exact values) get unit
/// weight relative to each other.
pub fn fit_con_ni_scaling(
    n_list: &[usize],
    probs: &[f64],
    stderrs: &[f64],
    r: usize,
) -> Result<ScalingFit, HarnessError> {
    assert_eq!(n_list.len(), probs.len());
    assert_eq!(n_list.len(), stderrs.len());
    if n_list.len() < 4 {
        return Err(HarnessError::TooFewSizes(4, n_list.len()));
    }
    let mut design = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for ((&n, &p), &se) in n_list.iter().zip(probs).zip(stderrs) {
        if p <= 0.0 {
            continue;
        }
        let nf = n as f64;
        design.push(vec![1.0, -(r as f64) * nf, -nf.ln()]);
        ys.push(p.ln());
        let rel = se / p;
        ws.push(if rel > 0.0 { 1.0 / (rel * rel) } else { 1.0 });
    }
    if design.len() < 4 {
        return Err(HarnessError::TooFewSizes(4, design.len()));
    }
    let fit = weighted_least_squares(&design, &ys, &ws);
    Ok(ScalingFit {
        intercept: fit.coeffs[0],
        tau_fit: fit.coeffs[1],
        tau_stderr: fit.stderrs[1],
        rho: fit.coeffs[2],
        rho_stderr: fit.stderrs[2],
    })
}

/// Evenly spaced endpoint heights `0, gap, ..., (r-1) gap`.
pub fn conditioned_endpoints(r: usize, gap: i64) -> Vec<i64> {
    (0..r as i64).map(|i| i * gap).collect()
}

/// Strip half height leaving room for diffusive fluctuations above the
/// endpoint span.
pub fn envelope_half_height(n: usize, r: usize, gap: i64) -> i64 {
    (2.0 * (n as f64).sqrt()).ceil() as i64 + gap * (r as i64 - 1) + 2
}

/// Chain options scaled with the box length: relaxation of the conditioned
/// heat-bath chain slows down in longer strips, so both the burn-in and the
/// spacing between retained samples grow with `n`.
fn scaled_options(n: usize) -> SampleOptions {
    SampleOptions { burn_in: 200 + 10 * n as u64, thinning: 5 + n as u64 / 2 }
}

/// Midpoint heights (envelope centers) per walk for one conditioned sample.
fn sample_midpoints(
    config: &EdgeConfig,
    x: &[i64],
    n: usize,
) -> Result<Vec<f64>, HarnessError> {
    let labels = label_clusters(config);
    let envelopes = crate::lattice::extract_envelopes(config, &labels, x)?;
    let mid = (n / 2) as i64;
    Ok(envelopes
        .iter()
        .map(|e| {
            let u = e.upper_at(mid).unwrap_or(0);
            let l = e.lower_at(mid).unwrap_or(0);
            (u + l) as f64 / 2.0
        })
        .collect())
}

/// Per-size convergence diagnostics of conditioned-cluster envelopes toward
/// the watermelon limit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub n: usize,
    pub ks: f64,
    pub median_scaled_width: f64,
    pub width_over_log: f64,
    pub samples: u64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub r: usize,
    pub sigma: f64,
    pub rows: Vec<EnvelopeRow>,
    pub ks_non_increasing: bool,
    pub width_decreasing: bool,
    pub width_log_ratio: f64,
    /// One-sample KS of the scaled midpoint against Normal(0, 0.25) at the
    /// largest size; only meaningful for r = 1.
    pub gaussian_ks: Option<f64>,
    pub gaussian_gate: Option<bool>,
}

/// Additive slack applied to the KS monotonicity comparison to absorb
/// two-sample statistical jitter.
pub const KS_MONOTONE_SLACK: f64 = 0.01;

/// Samples conditioned clusters at each size, extracts envelope midpoints,
/// scales by a diffusivity fitted once at the largest size, and compares to
/// watermelon midpoint marginals.
pub fn envelope_convergence_test(
    params: RcParams,
    boundary: Boundary,
    r: usize,
    gap: i64,
    n_list: &[usize],
    samples: usize,
    seed: u64,
) -> Result<EnvelopeReport, HarnessError> {
    assert!(!n_list.is_empty());
    let x = conditioned_endpoints(r, gap);
    let mut mids_by_n: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut widths_by_n: Vec<Vec<f64>> = Vec::new();
    let mut seconds = Vec::new();
    for (k, &n) in n_list.iter().enumerate() {
        let start = Instant::now();
        let geometry = BoxGeometry::strip(n, envelope_half_height(n, r, gap));
        let configs = sample_fk_conditioned(
            geometry,
            boundary,
            params,
            &x,
            &x,
            samples,
            8,
            scaled_options(n),
            seed.wrapping_add(k as u64),
        )?;
        let mut mids = Vec::with_capacity(configs.len());
        let mut widths = Vec::with_capacity(configs.len());
        for config in &configs {
            mids.push(sample_midpoints(config, &x, n)?);
            let labels = label_clusters(config);
            let envs = crate::lattice::extract_envelopes(config, &labels, &x)?;
            let w = envs.iter().map(|e| e.max_width()).max().unwrap_or(0);
            widths.push(w as f64);
        }
        mids_by_n.push(mids);
        widths_by_n.push(widths);
        seconds.push(start.elapsed().as_secs_f64());
    }
    // Diffusivity from the largest size: the sum of the r midpoints has the
    // law of a sum of independent bridges, variance r sigma^2 n / 4.
    let largest = n_list.len() - 1;
    let sums: Vec<f64> = mids_by_n[largest].iter().map(|m| m.iter().sum()).collect();
    let mean = sums.iter().sum::<f64>() / sums.len() as f64;
    let var = sums.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (sums.len() - 1) as f64;
    let sigma = (4.0 * var / (r as f64 * *n_list.last().unwrap() as f64)).sqrt();

    let melon = sample_watermelon(r, 32, 4000, WatermelonMethod::MatrixBridge, seed ^ 0x77)?;
    let melon_coord = |j: usize| -> Vec<f64> {
        melon.iter().map(|s| s.at_time(0.5)[j]).collect()
    };
    let reference: Vec<Vec<f64>> = if r == 1 {
        vec![melon_coord(0)]
    } else {
        vec![melon_coord(0), melon_coord(r - 1)]
    };
    let ref_idx: Vec<usize> = if r == 1 { vec![0] } else { vec![0, r - 1] };

    let mut rows = Vec::new();
    for (k, &n) in n_list.iter().enumerate() {
        let scale = sigma * (n as f64).sqrt();
        let mut ks: f64 = 0.0;
        for (pos, &j) in ref_idx.iter().enumerate() {
            let scaled: Vec<f64> =
                mids_by_n[k].iter().map(|m| (m[j] - x[j] as f64) / scale).collect();
            ks = ks.max(ks_two_sample(&scaled, &reference[pos]));
        }
        let scaled_widths: Vec<f64> =
            widths_by_n[k].iter().map(|w| w / (n as f64).sqrt()).collect();
        let med = crate::stats::median(&scaled_widths);
        let med_raw = crate::stats::median(&widths_by_n[k]);
        rows.push(EnvelopeRow {
            n,
            ks,
            median_scaled_width: med,
            width_over_log: med_raw / (n as f64).ln(),
            samples: samples as u64,
            seconds: seconds[k],
        });
    }
    let ks_non_increasing =
        rows.windows(2).all(|w| w[1].ks <= w[0].ks + KS_MONOTONE_SLACK);
    let width_decreasing =
        rows.windows(2).all(|w| w[1].median_scaled_width < w[0].median_scaled_width);
    let ratios: Vec<f64> = rows.iter().map(|r| r.width_over_log).collect();
    let width_log_ratio = ratios.iter().cloned().fold(0.0, f64::max)
        / ratios.iter().cloned().fold(f64::INFINITY, f64::min).max(1e-12);

    let (gaussian_ks, gaussian_gate) = if r == 1 {
        let n = *n_list.last().unwrap();
        let scale = sigma * (n as f64).sqrt();
        let scaled: Vec<f64> =
            mids_by_n[largest].iter().map(|m| (m[0] - x[0] as f64) / scale).collect();
        let normal = Normal::new(0.0, 0.5).expect("valid normal");
        let stat = ks_statistic(&scaled, |z| normal.cdf(z));
        let gate = stat < ks_threshold_one(scaled.len());
        (Some(stat), Some(gate))
    } else {
        (None, None)
    };

    Ok(EnvelopeReport {
        r,
        sigma,
        rows,
        ks_non_increasing,
        width_decreasing,
        width_log_ratio,
        gaussian_ks,
        gaussian_gate,
    })
}

/// Per-size frequencies of the three global-repulsion violations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GlobRepRow {
    pub n: usize,
    /// First synchronized cone column appears at or after `n^(1-eps)`.
    pub freq_first_late: f64,
    /// Last synchronized cone column appears at or before `n - n^(1-eps)`.
    pub freq_last_early: f64,
    /// Minimal inter-envelope distance in the bulk window at most the
    /// squared-log threshold.
    pub freq_bulk_close: f64,
    pub samples: u64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GlobRepReport {
    pub r: usize,
    pub epsilon: f64,
    /// Coefficient `c` of the bulk threshold `c (log n)^2`. The default is
    /// calibrated for desk-scale boxes where the plain squared natural log
    /// would exceed every attainable envelope separation.
    pub bulk_coeff: f64,
    pub rows: Vec<GlobRepRow>,
    pub all_decreasing: bool,
    /// Frequency of all three violations absent matches one minus the
    /// frequency of their union, sample by sample.
    pub inclusion_ok: bool,
}

/// Desk-scale default for the bulk separation threshold coefficient,
/// `(1/ln 10)^2`, i.e. a squared decimal log.
pub const BULK_COEFF_DEFAULT: f64 = 0.188_58;

/// Measures how often conditioned clusters violate each component of the
/// global repulsion event.
pub fn globrep_diagnostic(
    params: RcParams,
    boundary: Boundary,
    r: usize,
    gap: i64,
    n_list: &[usize],
    samples: usize,
    epsilon: f64,
    bulk_coeff: f64,
    seed: u64,
) -> Result<GlobRepReport, HarnessError> {
    let x = conditioned_endpoints(r, gap);
    let cone = ConeParams::default();
    let mut rows = Vec::new();
    let mut inclusion_ok = true;
    for (k, &n) in n_list.iter().enumerate() {
        let start = Instant::now();
        let geometry = BoxGeometry::strip(n, envelope_half_height(n, r, gap));
        let configs = sample_fk_conditioned(
            geometry,
            boundary,
            params,
            &x,
            &x,
            samples,
            8,
            scaled_options(n),
            seed.wrapping_add(0x1000 + k as u64),
        )?;
        let edge = (n as f64).powf(1.0 - epsilon);
        let threshold = bulk_coeff * (n as f64).ln().powi(2);
        let mut counts = [0u64; 3];
        let mut union = 0u64;
        for config in &configs {
            let labels = label_clusters(config);
            let skeletons: Vec<Skeleton> = x
                .iter()
                .map(|&xi| {
                    let v = geometry.vertex_index(0, xi);
                    let coords: Vec<(i64, i64)> = labels
                        .cluster_members(v)
                        .into_iter()
                        .map(|idx| geometry.vertex_coords(idx))
                        .collect();
                    maximal_decomposition(&coords, cone)
                })
                .collect();
            let sync = synchronized_skeleton(&skeletons)?;
            let first_late = sync.columns.first().map_or(true, |&c| c as f64 >= edge);
            let last_early =
                sync.columns.last().map_or(true, |&c| c as f64 <= n as f64 - edge);
            let envs = crate::lattice::extract_envelopes(config, &labels, &x)?;
            let mut bulk_close = false;
            if r >= 2 {
                let lo = edge.ceil() as i64;
                let hi = (n as f64 - edge).floor() as i64;
                for c in lo..=hi {
                    for i in 0..r - 1 {
                        if let (Some(u), Some(l)) = (envs[i].upper_at(c), envs[i + 1].lower_at(c))
                        {
                            if (l - u) as f64 <= threshold {
                                bulk_close = true;
                            }
                        }
                    }
                }
            }
            counts[0] += u64::from(first_late);
            counts[1] += u64::from(last_early);
            counts[2] += u64::from(bulk_close);
            union += u64::from(first_late || last_early || bulk_close);
        }
        // Union consistency: the union count never exceeds the sum and is
        // at least each component.
        let sum: u64 = counts.iter().sum();
        if union > sum || counts.iter().any(|&c| c > union) {
            inclusion_ok = false;
        }
        let m = configs.len() as f64;
        rows.push(GlobRepRow {
            n,
            freq_first_late: counts[0] as f64 / m,
            freq_last_early: counts[1] as f64 / m,
            freq_bulk_close: counts[2] as f64 / m,
            samples: configs.len() as u64,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let all_decreasing = rows.windows(2).all(|w| {
        w[1].freq_first_late <= w[0].freq_first_late
            && w[1].freq_last_early <= w[0].freq_last_early
            && w[1].freq_bulk_close <= w[0].freq_bulk_close
    });
    Ok(GlobRepReport {
        r,
        epsilon,
        bulk_coeff,
        rows,
        all_decreasing,
        inclusion_ok,
    })
}

/// Supercritical duality check: the truncated two-point function decays at
/// about twice the subcritical rate of the dual parameter.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualityReport {
    pub p: f64,
    pub q: f64,
    pub dual_p: f64,
    pub tau_dual: f64,
    pub tau_dual_stderr: f64,
    pub rate: f64,
    pub rate_stderr: f64,
    pub ratio: f64,
    pub ratio_ok: bool,
    pub involution_ok: bool,
    /// Relative change of the fitted rate when the box height is doubled.
    pub height_sensitivity: f64,
    pub rows: Vec<ReportRow>,
}

fn truncated_two_point_rate(
    params: RcParams,
    n_list: &[usize],
    half_height: i64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64, Vec<ReportRow>), HarnessError> {
    let pad = half_height;
    let mut rows = Vec::new();
    for (k, &n) in n_list.iter().enumerate() {
        let start = Instant::now();
        let geometry = BoxGeometry::strip(n + 2 * pad as usize, half_height);
        let a = geometry.vertex_index(pad, 0);
        let b = geometry.vertex_index(pad + n as i64, 0);
        let boundary_set = geometry.boundary_vertices();
        let event = |config: &EdgeConfig| {
            let labels = label_clusters(config);
            labels.same_cluster(a, b)
                && boundary_set.iter().all(|&v| !labels.same_cluster(a, v))
        };
        let hits: u64 = if params.q == 1.0 {
            (0..samples as u64)
                .into_par_iter()
                .map(|i| {
                    u64::from(event(&sample_bernoulli(
                        geometry,
                        Boundary::Free,
                        params.p,
                        seed,
                        (k as u64) << 40 | i,
                    )))
                })
                .sum()
        } else {
            sample_fk(
                geometry,
                Boundary::Free,
                params,
                samples,
                SampleOptions::default(),
                seed.wrapping_add(0x2000 + k as u64),
            )
            .par_iter()
            .map(|c| u64::from(event(c)))
            .sum()
        };
        if hits == 0 {
            continue;
        }
        let (p_hat, se) = freq_stderr(hits, samples as u64);
        rows.push(ReportRow {
            n: n as u64,
            estimate: p_hat,
            stderr: se,
            samples: samples as u64,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    if rows.len() < 2 {
        return Err(HarnessError::NothingObserved);
    }
    let design: Vec<Vec<f64>> = rows.iter().map(|r| vec![1.0, r.n as f64]).collect();
    let ys: Vec<f64> = rows.iter().map(|r| -r.estimate.ln()).collect();
    let ws: Vec<f64> = rows
        .iter()
        .map(|r| {
            let rel = r.stderr / r.estimate;
            1.0 / (rel * rel).max(1e-12)
        })
        .collect();
    let fit = weighted_least_squares(&design, &ys, &ws);
    Ok((fit.coeffs[1], fit.stderrs[1], rows))
}

/// Runs the stretch duality check at a supercritical `p`.
pub fn duality_stretch_check(
    p: f64,
    q: f64,
    n_list: &[usize],
    half_height: i64,
    samples: usize,
    seed: u64,
) -> Result<DualityReport, HarnessError> {
    let sd = self_dual_point(q);
    if p <= sd {
        return Err(HarnessError::NotSupercritical(p, sd));
    }
    let dual_p = dual_parameter(p, q);
    let involution_ok = (dual_parameter(dual_p, q) - p).abs() < 1e-12;
    let dual_params = RcParams::new(dual_p, q)?;
    let tau = estimate_tau(dual_params, Boundary::Free, n_list, half_height, samples, seed)?;
    let params = RcParams::new(p, q)?;
    let (rate, rate_stderr, rows) =
        truncated_two_point_rate(params, n_list, half_height, samples, seed ^ 0x51)?;
    let (rate2, _, _) =
        truncated_two_point_rate(params, n_list, 2 * half_height, samples, seed ^ 0x52)?;
    let ratio = rate / tau.tau;
    Ok(DualityReport {
        p,
        q,
        dual_p,
        tau_dual: tau.tau,
        tau_dual_stderr: tau.tau_stderr,
        rate,
        rate_stderr,
        ratio,
        ratio_ok: (1.6..=2.4).contains(&ratio),
        involution_ok,
        height_sensitivity: (rate2 - rate).abs() / rate,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walks::{dp_weyl_kernel, IncrementDist};

    #[test]
    fn tau_on_line_matches_minus_log_p() {
        // Height-zero strip: the two-point function is exactly p^n.
        let params = RcParams::new(0.5, 1.0).unwrap();
        let est = estimate_tau(params, Boundary::Free, &[2, 4, 6, 8], 0, 40_000, 9).unwrap();
        let expect = -(0.5f64).ln();
        assert!(
            (est.tau - expect).abs() < 3.0 * est.tau_stderr.max(0.01),
            "tau {} vs {}",
            est.tau,
            expect
        );
        assert!(est.subadditive_ok);
        assert!(est.dropped.is_empty());
    }

    #[test]
    fn strip_frequencies_match_enumeration() {
        let params = RcParams::new(0.3, 1.0).unwrap();
        for n in [4usize, 8] {
            let geometry = BoxGeometry::new(n, 0, 1).unwrap();
            let a = geometry.vertex_index(0, 0);
            let b = geometry.vertex_index(n as i64, 0);
            let exact = exact_enumerate(geometry, Boundary::Free, params, |_, labels| {
                labels.same_cluster(a, b)
            })
            .unwrap();
            let (hits, trials) =
                connection_freq(geometry, Boundary::Free, params, 60_000, 21, 0);
            let (p_hat, se) = freq_stderr(hits, trials);
            assert!(
                (p_hat - exact).abs() < 3.5 * se,
                "n={n}: mc {p_hat} exact {exact}"
            );
        }
    }

    #[test]
    fn tau_decreases_in_p() {
        let est_a = estimate_tau(
            RcParams::new(0.2, 1.0).unwrap(),
            Boundary::Free,
            &[2, 4, 6],
            2,
            30_000,
            5,
        )
        .unwrap();
        let est_b = estimate_tau(
            RcParams::new(0.3, 1.0).unwrap(),
            Boundary::Free,
            &[2, 4, 6],
            2,
            30_000,
            5,
        )
        .unwrap();
        assert!(est_a.tau > est_b.tau, "{} vs {}", est_a.tau, est_b.tau);
    }

    #[test]
    fn con_ni_enumeration_matches_rejection() {
        let geometry = BoxGeometry::new(2, 0, 3).unwrap();
        let params = RcParams::new(0.5, 1.0).unwrap();
        let x = [0i64, 2];
        let exact = estimate_con_ni(
            geometry,
            Boundary::Free,
            params,
            &x,
            &x,
            0,
            ConNiMethod::Enumeration,
            0,
        )
        .unwrap();
        assert!(exact.prob > 0.0 && exact.prob < 1.0);
        let mc = estimate_con_ni(
            geometry,
            Boundary::Free,
            params,
            &x,
            &x,
            60_000,
            ConNiMethod::Rejection,
            31,
        )
        .unwrap();
        assert!(
            (mc.prob - exact.prob).abs() < 3.5 * mc.stderr,
            "mc {} exact {}",
            mc.prob,
            exact.prob
        );
    }

    #[test]
    fn single_path_con_ni_is_two_point() {
        let geometry = BoxGeometry::new(3, -1, 1).unwrap();
        let params = RcParams::new(0.4, 1.5).unwrap();
        let a = geometry.vertex_index(0, 0);
        let b = geometry.vertex_index(3, 0);
        let two_point = exact_enumerate(geometry, Boundary::Free, params, |_, labels| {
            labels.same_cluster(a, b)
        })
        .unwrap();
        let con_ni = estimate_con_ni(
            geometry,
            Boundary::Free,
            params,
            &[0],
            &[0],
            0,
            ConNiMethod::Enumeration,
            0,
        )
        .unwrap();
        assert!((con_ni.prob - two_point).abs() < 1e-12);
    }

    #[test]
    fn zero_hits_give_one_sided_bound() {
        // Impossible-level rarity: p tiny, long line.
        let geometry = BoxGeometry::new(20, 0, 0).unwrap();
        let params = RcParams::new(0.01, 1.0).unwrap();
        let est = estimate_con_ni(
            geometry,
            Boundary::Free,
            params,
            &[0],
            &[0],
            2_000,
            ConNiMethod::Rejection,
            7,
        )
        .unwrap();
        assert_eq!(est.prob, 0.0);
        assert_eq!(est.upper_bound, Some(3.0 / 2000.0));
    }

    #[test]
    fn scaling_fit_recovers_walk_exponents() {
        // Exact Weyl kernel values for two simple walks decay like n^-2
        // with no exponential factor.
        let dist = IncrementDist::simple();
        let ns = [32usize, 64, 128, 256];
        let mut probs = Vec::new();
        for &n in &ns {
            let cap = crate::walks::default_cap(&dist, &[0, 2], &[0, 2], n);
            let kernel = dp_weyl_kernel(&dist, &[0, 2], &[0, 2], n, cap).unwrap();
            probs.push(kernel.prob);
        }
        let fit = fit_con_ni_scaling(&ns, &probs, &[0.0; 4], 2).unwrap();
        assert!((fit.rho - 2.0).abs() < 0.15, "rho {}", fit.rho);
        assert!(fit.tau_fit.abs() < 0.01, "tau {}", fit.tau_fit);
    }

    #[test]
    fn scaling_fit_single_walk_exponent_half() {
        let dist = IncrementDist::simple();
        let ns = [32usize, 64, 128, 256];
        let mut probs = Vec::new();
        for &n in &ns {
            let cap = crate::walks::default_cap(&dist, &[0], &[0], n);
            let kernel = dp_weyl_kernel(&dist, &[0], &[0], n, cap).unwrap();
            probs.push(kernel.prob);
        }
        let fit = fit_con_ni_scaling(&ns, &probs, &[0.0; 4], 1).unwrap();
        assert!((fit.rho - 0.5).abs() < 0.2, "rho {}", fit.rho);
    }

    #[test]
    fn scaling_fit_needs_four_sizes() {
        let err = fit_con_ni_scaling(&[8, 16, 32], &[0.1, 0.05, 0.02], &[0.0; 3], 1);
        assert!(matches!(err, Err(HarnessError::TooFewSizes(4, 3))));
    }

    #[test]
    fn envelope_report_smoke() {
        let params = RcParams::new(0.4, 1.0).unwrap();
        let report = envelope_convergence_test(
            params,
            Boundary::Free,
            1,
            2,
            &[8, 16],
            300,
            77,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.sigma > 0.0);
        assert!(report.rows.iter().all(|r| r.ks.is_finite() && r.ks <= 1.0));
        assert!(report.gaussian_ks.is_some());
    }

    #[test]
    fn globrep_single_path_violations_vanish() {
        // One thin cluster: the bulk condition is vacuous and the cone
        // columns appear essentially immediately. The endpoint conditions
        // are asymptotic, so allow a stray hit at the smaller size.
        let params = RcParams::new(0.08, 1.0).unwrap();
        let report = globrep_diagnostic(
            params,
            Boundary::Free,
            1,
            2,
            &[16, 32],
            200,
            0.2,
            BULK_COEFF_DEFAULT,
            13,
        )
        .unwrap();
        for row in &report.rows {
            assert_eq!(row.freq_bulk_close, 0.0, "bulk vacuous for one path");
            assert!(row.freq_first_late <= 0.01, "n={}: {}", row.n, row.freq_first_late);
            assert!(row.freq_last_early <= 0.01, "n={}: {}", row.n, row.freq_last_early);
        }
        assert!(report.inclusion_ok);
    }

    #[test]
    fn duality_rejects_subcritical_p() {
        let err = duality_stretch_check(0.3, 2.0, &[4, 6], 3, 100, 1);
        assert!(matches!(err, Err(HarnessError::NotSupercritical(_, _))));
    }

    #[test]
    fn report_roundtrip_and_csv_header() {
        let manifest = RunManifest::new("estimate-tau", 42, 4).set("p", 0.3).set("q", 1.0);
        let mut report = ExperimentReport::new("tau", manifest);
        report.rows.push(ReportRow {
            n: 8,
            estimate: 0.125,
            stderr: 0.001,
            samples: 1000,
            seconds: 0.5,
        });
        report.fits.insert("tau".into(), 0.26);
        report.checks.insert("subadditive".into(), true);
        let json = report.to_json();
        let back = ExperimentReport::from_json(&json).unwrap();
        assert_eq!(back, report);
        let csv = report.to_csv();
        let mut lines = csv.lines();
        let head = lines.next().unwrap();
        assert!(head.starts_with("# manifest: {"));
        let manifest_back: RunManifest =
            serde_json::from_str(head.trim_start_matches("# manifest: ")).unwrap();
        assert_eq!(manifest_back, report.manifest);
        assert_eq!(lines.next().unwrap(), "n,estimate,stderr,samples,seconds");
        assert!(lines.next().unwrap().starts_with("8,1.25"));
    }

    #[test]
    fn atomic_write_creates_file() {
        let dir = std::env::temp_dir().join("fkmelon-harness-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("report.json");
        let manifest = RunManifest::new("dual", 1, 1);
        let report = ExperimentReport::new("dual", manifest);
        report.write_atomic(&path, false).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(ExperimentReport::from_json(&text).unwrap(), report);
        assert!(!path.with_extension("tmp-write").exists());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
