//! Command line front end. Every artifact embeds the run manifest; list
//! commands stop at the time budget and exit with code 3 when results are
//! partial.

use clap::{Args, Parser, Subcommand};
use fkmelon::gibbs::{self, RcParams, SampleOptions};
use fkmelon::harness::{
    self, ConNiMethod, ExperimentReport, ReportRow, RunManifest,
};
use fkmelon::lattice::{label_clusters, Boundary, BoxGeometry, EdgeConfig};
use fkmelon::walks::{self, BridgeMethod, IncrementDist};
use fkmelon::watermelon::{
    self, MarginalDensity, WatermelonMethod,
};
use fkmelon::geometry::{maximal_decomposition, synchronized_skeleton, ConeParams, Skeleton};
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "fkmelon", version, about = "Non-intersecting cluster laboratory")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalOpts {
    /// Base seed for all randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path; stdout when absent. Files are written atomically.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// key=value file supplying defaults for the global flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Wall-clock budget; long commands emit partial results and exit 3.
    #[arg(long, global = true)]
    budget_seconds: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw random-cluster configurations in a box.
    SampleFk {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        height: i64,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value = "free")]
        boundary: String,
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// Draw configurations conditioned on r disjoint connections.
    SampleConditioned {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        height: i64,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value = "free")]
        boundary: String,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        chains: usize,
    },
    /// Extract synchronized cone-point skeletons from stored configurations.
    Skeleton {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
    },
    /// Sample non-intersecting walk bridges.
    WalkBridge {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value = "dp")]
        method: String,
        #[arg(long, default_value = "simple")]
        dist: String,
    },
    /// Karlin-McGregor bridge count and probability for simple walks.
    KmProb {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        n: usize,
    },
    /// Exact Weyl-chamber transition kernel value.
    DpKernel {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        cap: i64,
        #[arg(long, default_value = "simple")]
        dist: String,
    },
    /// Harmonic function estimate on a gap grid.
    EstimateV {
        #[arg(long, default_value_t = 2)]
        r: usize,
        #[arg(long, default_value_t = 20)]
        max_gap: i64,
        #[arg(long, default_value_t = 2000)]
        iterations: usize,
        #[arg(long, default_value = "simple")]
        dist: String,
    },
    /// Sample Brownian watermelons, gated by a midpoint KS test.
    Watermelon {
        #[arg(long, default_value_t = 2)]
        r: usize,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value = "matrix")]
        method: String,
        #[arg(long, default_value_t = 5)]
        epsilon_cents: u32,
        /// Report offset sensitivity over epsilon in {0.20, 0.10, 0.05}.
        #[arg(long)]
        extrapolate: bool,
    },
    /// Inverse correlation length from strip two-point frequencies.
    EstimateTau {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value = "free")]
        boundary: String,
        #[arg(long, default_value = "4,8,12,16")]
        n_list: String,
        #[arg(long, default_value_t = 4)]
        height: i64,
        #[arg(long, default_value_t = 20000)]
        samples: usize,
    },
    /// Joint connection/disjointness probabilities and the scaling fit.
    Scaling {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value = "free")]
        boundary: String,
        #[arg(long, default_value_t = 2)]
        r: usize,
        #[arg(long, default_value_t = 2)]
        gap: i64,
        #[arg(long, default_value = "8,16,24,32")]
        n_list: String,
        #[arg(long, default_value_t = 20000)]
        samples: usize,
    },
    /// Envelope midpoint convergence toward the watermelon.
    Convergence {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value = "free")]
        boundary: String,
        #[arg(long, default_value_t = 2)]
        r: usize,
        #[arg(long, default_value_t = 2)]
        gap: i64,
        #[arg(long, default_value = "8,16,32")]
        n_list: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Entropic repulsion diagnostics for walks or conditioned clusters.
    Repulsion {
        #[arg(long, default_value = "walks")]
        mode: String,
        #[arg(long, default_value_t = 2)]
        r: usize,
        #[arg(long, default_value_t = 2)]
        gap: i64,
        #[arg(long, default_value = "64,256")]
        n_list: String,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.4)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
    },
    /// Supercritical stretch check against twice the dual rate.
    Duality {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value = "4,6,8,10")]
        n_list: String,
        #[arg(long, default_value_t = 4)]
        height: i64,
        #[arg(long, default_value_t = 20000)]
        samples: usize,
    },
    /// Convert a stored JSON report to CSV (or echo it).
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        csv: bool,
    },
    /// Planar dual of an edge parameter.
    Dual {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
    },
}

struct Budget {
    deadline: Option<Instant>,
}

impl Budget {
    fn new(seconds: Option<f64>) -> Self {
        Budget {
            deadline: seconds.map(|s| Instant::now() + std::time::Duration::from_secs_f64(s)),
        }
    }

    fn exhausted(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

fn parse_i64_list(text: &str) -> Result<Vec<i64>, String> {
    text.split(',')
        .map(|t| t.trim().parse::<i64>().map_err(|e| format!("bad list entry {t:?}: {e}")))
        .collect()
}

fn parse_usize_list(text: &str) -> Result<Vec<usize>, String> {
    text.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("bad list entry {t:?}: {e}")))
        .collect()
}

fn parse_boundary(text: &str) -> Result<Boundary, String> {
    match text {
        "free" => Ok(Boundary::Free),
        "wired" => Ok(Boundary::Wired),
        other => Err(format!("boundary must be free or wired, got {other:?}")),
    }
}

fn parse_dist(text: &str) -> Result<IncrementDist, String> {
    if text == "simple" {
        return Ok(IncrementDist::simple());
    }
    if let Some(hold) = text.strip_prefix("lazy:") {
        let h: f64 = hold.parse().map_err(|e| format!("bad hold: {e}"))?;
        return IncrementDist::lazy(h).map_err(|e| e.to_string());
    }
    Err(format!("dist must be simple or lazy:<hold>, got {text:?}"))
}

/// Usage-level failure: exit code 2.
struct UsageError(String);

fn load_config(opts: &mut GlobalOpts) -> Result<(), UsageError> {
    let Some(path) = &opts.config else { return Ok(()) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(UsageError(format!(
                "config line {}: expected key=value, got {line:?}",
                lineno + 1
            )));
        };
        let (key, value) = (key.trim(), value.trim());
        let parse_err =
            |e: String| UsageError(format!("config line {}: {e}", lineno + 1));
        match key {
            "seed" => {
                if opts.seed.is_none() {
                    opts.seed =
                        Some(value.parse().map_err(|e| parse_err(format!("{e}")))?);
                }
            }
            "threads" => {
                if opts.threads.is_none() {
                    opts.threads =
                        Some(value.parse().map_err(|e| parse_err(format!("{e}")))?);
                }
            }
            "out" => {
                if opts.out.is_none() {
                    opts.out = Some(PathBuf::from(value));
                }
            }
            "budget-seconds" => {
                if opts.budget_seconds.is_none() {
                    opts.budget_seconds =
                        Some(value.parse().map_err(|e| parse_err(format!("{e}")))?);
                }
            }
            other => {
                return Err(UsageError(format!(
                    "config line {}: unknown key {other:?}",
                    lineno + 1
                )))
            }
        }
    }
    Ok(())
}

fn emit(opts: &GlobalOpts, body: &str) -> i32 {
    match &opts.out {
        Some(path) => match harness::write_atomic(path, body.as_bytes()) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: cannot write {}: {e}", path.display());
                1
            }
        },
        None => {
            print!("{body}");
            if !body.ends_with('\n') {
                println!();
            }
            0
        }
    }
}

fn manifest_for(opts: &GlobalOpts, command: &str, params: &[(&str, String)]) -> RunManifest {
    let mut m = RunManifest::new(command, opts.seed.unwrap_or(1), effective_threads(opts));
    for (k, v) in params {
        m = m.set(k, v.clone());
    }
    m
}

fn effective_threads(opts: &GlobalOpts) -> usize {
    opts.threads.unwrap_or_else(|| {
        std::thread::available_parallelism().map(|v| v.get()).unwrap_or(1)
    })
}

fn run(cli: Cli) -> Result<i32, String> {
    let mut opts = cli.global;
    load_config(&mut opts).map_err(|UsageError(msg)| msg)?;
    let threads = effective_threads(&opts);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("thread pool: {e}"))?;
    let seed = opts.seed.unwrap_or(1);
    let budget = Budget::new(opts.budget_seconds);

    match cli.command {
        Command::Dual { p, q } => {
            if !(0.0 < p && p < 1.0 && q > 0.0) {
                return Err("dual requires 0 < p < 1 and q > 0".into());
            }
            Ok(emit(&opts, &format!("{:.6}\n", gibbs::dual_parameter(p, q))))
        }
        Command::KmProb { x, y, n } => {
            let x = parse_i64_list(&x)?;
            let y = parse_i64_list(&y)?;
            let count = walks::km_bridge_count(&x, &y, n).map_err(|e| e.to_string())?;
            let prob = count as f64 / 2f64.powi((x.len() * n) as i32);
            Ok(emit(&opts, &format!("count: {count}\nprobability: {prob:.6}\n")))
        }
        Command::DpKernel { x, y, n, cap, dist } => {
            let x = parse_i64_list(&x)?;
            let y = parse_i64_list(&y)?;
            let dist = parse_dist(&dist)?;
            let cap = if cap > 0 { cap } else { walks::default_cap(&dist, &x, &y, n) };
            let kernel =
                walks::dp_weyl_kernel(&dist, &x, &y, n, cap).map_err(|e| e.to_string())?;
            Ok(emit(
                &opts,
                &format!("probability: {:.12e}\nleaked: {:.3e}\ncap: {cap}\n", kernel.prob, kernel.leaked),
            ))
        }
        Command::SampleFk { n, height, p, q, boundary, count } => {
            let boundary = parse_boundary(&boundary)?;
            let params = RcParams::new(p, q).map_err(|e| e.to_string())?;
            let geometry = BoxGeometry::strip(n, height);
            let manifest = manifest_for(
                &opts,
                "sample-fk",
                &[
                    ("n", n.to_string()),
                    ("height", height.to_string()),
                    ("p", p.to_string()),
                    ("q", q.to_string()),
                    ("boundary", boundary.as_str().to_string()),
                    ("count", count.to_string()),
                ],
            );
            let configs =
                gibbs::sample_fk(geometry, boundary, params, count, SampleOptions::default(), seed);
            let mut body = format!("# manifest: {}\n", manifest.to_json());
            for c in &configs {
                body.push_str(&c.to_line());
                body.push('\n');
            }
            Ok(emit(&opts, &body))
        }
        Command::SampleConditioned { n, height, p, q, boundary, x, y, count, chains } => {
            let boundary = parse_boundary(&boundary)?;
            let params = RcParams::new(p, q).map_err(|e| e.to_string())?;
            let x = parse_i64_list(&x)?;
            let y = parse_i64_list(&y)?;
            let height = if height > 0 {
                height
            } else {
                harness::envelope_half_height(n, x.len(), x.last().copied().unwrap_or(0).max(2))
            };
            let geometry = BoxGeometry::strip(n, height);
            let manifest = manifest_for(
                &opts,
                "sample-conditioned",
                &[
                    ("n", n.to_string()),
                    ("height", height.to_string()),
                    ("p", p.to_string()),
                    ("q", q.to_string()),
                    ("boundary", boundary.as_str().to_string()),
                    ("x", format!("{x:?}")),
                    ("y", format!("{y:?}")),
                    ("count", count.to_string()),
                ],
            );
            let configs = gibbs::sample_fk_conditioned(
                geometry,
                boundary,
                params,
                &x,
                &y,
                count,
                chains,
                SampleOptions::default(),
                seed,
            )
            .map_err(|e| e.to_string())?;
            let mut body = format!("# manifest: {}\n", manifest.to_json());
            for c in &configs {
                body.push_str(&c.to_line());
                body.push('\n');
            }
            Ok(emit(&opts, &body))
        }
        Command::Skeleton { input, x, delta } => {
            let x = parse_i64_list(&x)?;
            let cone = ConeParams::new(delta).map_err(|e| e.to_string())?;
            let text = std::fs::read_to_string(&input)
                .map_err(|e| format!("cannot read {}: {e}", input.display()))?;
            let mut body = String::new();
            for line in text.lines() {
                if line.trim().is_empty() || line.starts_with('#') {
                    continue;
                }
                let config = EdgeConfig::from_line(line).map_err(|e| e.to_string())?;
                let labels = label_clusters(&config);
                let g = config.geometry;
                let skeletons: Vec<Skeleton> = x
                    .iter()
                    .map(|&xi| {
                        let coords: Vec<(i64, i64)> = labels
                            .cluster_members(g.vertex_index(0, xi))
                            .into_iter()
                            .map(|idx| g.vertex_coords(idx))
                            .collect();
                        maximal_decomposition(&coords, cone)
                    })
                    .collect();
                let sync = synchronized_skeleton(&skeletons).map_err(|e| e.to_string())?;
                body.push_str(&sync.to_json_line());
                body.push('\n');
            }
            Ok(emit(&opts, &body))
        }
        Command::WalkBridge { x, y, n, count, method, dist } => {
            let x = parse_i64_list(&x)?;
            let y = parse_i64_list(&y)?;
            let dist = parse_dist(&dist)?;
            let method = match method.as_str() {
                "rejection" => BridgeMethod::Rejection,
                "dp" => BridgeMethod::DpBackward,
                other => return Err(format!("method must be rejection or dp, got {other:?}")),
            };
            let cap = walks::default_cap(&dist, &x, &y, n);
            let systems =
                walks::sample_conditioned_bridge(&dist, &x, &y, n, count, method, cap, seed)
                    .map_err(|e| e.to_string())?;
            let manifest = manifest_for(
                &opts,
                "walk-bridge",
                &[("x", format!("{x:?}")), ("y", format!("{y:?}")), ("n", n.to_string())],
            );
            let mut body = format!("# manifest: {}\n", manifest.to_json());
            for s in &systems {
                body.push_str(&s.to_json_line());
                body.push('\n');
            }
            Ok(emit(&opts, &body))
        }
        Command::EstimateV { r, max_gap, iterations, dist } => {
            let dist = parse_dist(&dist)?;
            if r < 2 {
                return Err("estimate-v needs r >= 2".into());
            }
            let mut grid: Vec<Vec<i64>> = Vec::new();
            for g in 1..=max_gap {
                grid.push((0..r as i64).map(|i| i * g).collect());
            }
            let est =
                walks::estimate_v(&dist, &grid, iterations).map_err(|e| e.to_string())?;
            let manifest = manifest_for(
                &opts,
                "estimate-v",
                &[("r", r.to_string()), ("max_gap", max_gap.to_string())],
            );
            let mut report = ExperimentReport::new("estimate-v", manifest);
            for (point, value) in &est.points {
                let delta = watermelon::vandermonde_i(point);
                report.rows.push(ReportRow {
                    n: point.last().copied().unwrap_or(0) as u64,
                    estimate: *value,
                    stderr: 0.0,
                    samples: iterations as u64,
                    seconds: 0.0,
                });
                report
                    .fits
                    .insert(format!("ratio_gap_{}", point.last().unwrap()), value / delta);
            }
            report.fits.insert("residual".into(), est.residual);
            Ok(emit(&opts, &report.to_json()))
        }
        Command::Watermelon { r, grid, count, method, epsilon_cents, extrapolate } => {
            let manifest = manifest_for(
                &opts,
                "watermelon",
                &[
                    ("r", r.to_string()),
                    ("grid", grid.to_string()),
                    ("count", count.to_string()),
                    ("method", method.clone()),
                ],
            );
            let density = MarginalDensity::new(r, 0.5).map_err(|e| e.to_string())?;
            if extrapolate {
                let mut report = ExperimentReport::new("watermelon-extrapolation", manifest);
                for cents in [20u32, 10, 5] {
                    if budget.exhausted() {
                        report.warnings.push("budget exhausted; partial".into());
                        emit(&opts, &report.to_json());
                        return Ok(3);
                    }
                    let start = Instant::now();
                    let samples = watermelon::sample_watermelon(
                        r,
                        grid,
                        count,
                        WatermelonMethod::EpsilonRejection(cents),
                        seed,
                    )
                    .map_err(|e| e.to_string())?;
                    let ks = watermelon::midpoint_ks_gate(&samples, &density);
                    report.rows.push(ReportRow {
                        n: cents as u64,
                        estimate: ks,
                        stderr: 0.0,
                        samples: count as u64,
                        seconds: start.elapsed().as_secs_f64(),
                    });
                }
                return Ok(emit(&opts, &report.to_json()));
            }
            let method = match method.as_str() {
                "matrix" => WatermelonMethod::MatrixBridge,
                "rejection" => WatermelonMethod::EpsilonRejection(epsilon_cents),
                other => return Err(format!("method must be matrix or rejection, got {other:?}")),
            };
            // Gate the sampler on a pilot draw before emitting samples.
            let pilot = watermelon::sample_watermelon(r, grid, 2000.max(count), method, seed ^ 1)
                .map_err(|e| e.to_string())?;
            let ks = watermelon::midpoint_ks_gate(&pilot, &density);
            let threshold = watermelon::ks_threshold_one(pilot.len()) + 0.02;
            if ks > threshold {
                return Err(format!("sampler failed KS gate: {ks:.4} > {threshold:.4}"));
            }
            let samples = watermelon::sample_watermelon(r, grid, count, method, seed)
                .map_err(|e| e.to_string())?;
            let mut body = format!("# manifest: {}\n# ks_gate: {ks:.4}\n", manifest.to_json());
            for s in &samples {
                body.push_str(&s.to_json_line());
                body.push('\n');
            }
            Ok(emit(&opts, &body))
        }
        Command::EstimateTau { p, q, boundary, n_list, height, samples } => {
            let boundary = parse_boundary(&boundary)?;
            let params = RcParams::new(p, q).map_err(|e| e.to_string())?;
            let n_list = parse_usize_list(&n_list)?;
            let manifest = manifest_for(
                &opts,
                "estimate-tau",
                &[
                    ("p", p.to_string()),
                    ("q", q.to_string()),
                    ("boundary", boundary.as_str().to_string()),
                    ("height", height.to_string()),
                    ("samples", samples.to_string()),
                ],
            );
            let mut report = ExperimentReport::new("estimate-tau", manifest);
            let mut dropped = Vec::new();
            let mut partial = false;
            for (k, &n) in n_list.iter().enumerate() {
                if budget.exhausted() {
                    partial = true;
                    report.warnings.push(format!("budget exhausted before n = {n}"));
                    break;
                }
                match harness::two_point_row(
                    params, boundary, n, height, samples, seed, k as u64,
                ) {
                    Some(row) => report.rows.push(row),
                    None => {
                        dropped.push(n);
                        report.warnings.push(format!("no connections at n = {n}; dropped"));
                    }
                }
            }
            if let Ok(tau) = harness::fit_tau_rows(&report.rows, dropped) {
                report.fits.insert("tau".into(), tau.tau);
                report.fits.insert("tau_stderr".into(), tau.tau_stderr);
                report.fits.insert("intercept".into(), tau.intercept);
                report.checks.insert("subadditive_bound".into(), tau.subadditive_ok);
            }
            let code = emit(&opts, &report.to_json());
            Ok(if partial && code == 0 { 3 } else { code })
        }
        Command::Scaling { p, q, boundary, r, gap, n_list, samples } => {
            let boundary = parse_boundary(&boundary)?;
            let params = RcParams::new(p, q).map_err(|e| e.to_string())?;
            let n_list = parse_usize_list(&n_list)?;
            let x = harness::conditioned_endpoints(r, gap);
            let manifest = manifest_for(
                &opts,
                "scaling",
                &[
                    ("p", p.to_string()),
                    ("q", q.to_string()),
                    ("r", r.to_string()),
                    ("gap", gap.to_string()),
                    ("samples", samples.to_string()),
                ],
            );
            let mut report = ExperimentReport::new("scaling", manifest);
            let mut partial = false;
            let mut kept: Vec<(usize, f64, f64)> = Vec::new();
            for (k, &n) in n_list.iter().enumerate() {
                if budget.exhausted() {
                    partial = true;
                    report.warnings.push(format!("budget exhausted before n = {n}"));
                    break;
                }
                let geometry =
                    BoxGeometry::strip(n, harness::envelope_half_height(n, r, gap));
                let est = harness::estimate_con_ni(
                    geometry,
                    boundary,
                    params,
                    &x,
                    &x,
                    samples,
                    ConNiMethod::Rejection,
                    seed.wrapping_add(k as u64),
                )
                .map_err(|e| e.to_string())?;
                report.rows.push(ReportRow {
                    n: n as u64,
                    estimate: est.prob,
                    stderr: est.stderr,
                    samples: est.trials,
                    seconds: est.seconds,
                });
                if let Some(bound) = est.upper_bound {
                    report
                        .warnings
                        .push(format!("n = {n}: no acceptances; P <= {bound:.2e} at 95%"));
                } else {
                    kept.push((n, est.prob, est.stderr));
                }
            }
            if kept.len() >= 4 {
                let ns: Vec<usize> = kept.iter().map(|k| k.0).collect();
                let ps: Vec<f64> = kept.iter().map(|k| k.1).collect();
                let ses: Vec<f64> = kept.iter().map(|k| k.2).collect();
                if let Ok(fit) = harness::fit_con_ni_scaling(&ns, &ps, &ses, r) {
                    report.fits.insert("tau_fit".into(), fit.tau_fit);
                    report.fits.insert("tau_fit_stderr".into(), fit.tau_stderr);
                    report.fits.insert("rho".into(), fit.rho);
                    report.fits.insert("rho_stderr".into(), fit.rho_stderr);
                    report.fits.insert("intercept".into(), fit.intercept);
                }
            }
            let code = emit(&opts, &report.to_json());
            Ok(if partial && code == 0 { 3 } else { code })
        }
        Command::Convergence { p, q, boundary, r, gap, n_list, samples } => {
            let boundary = parse_boundary(&boundary)?;
            let params = RcParams::new(p, q).map_err(|e| e.to_string())?;
            let n_list = parse_usize_list(&n_list)?;
            if budget.exhausted() {
                return Ok(3);
            }
            let result = harness::envelope_convergence_test(
                params, boundary, r, gap, &n_list, samples, seed,
            )
            .map_err(|e| e.to_string())?;
            let manifest = manifest_for(
                &opts,
                "convergence",
                &[
                    ("p", p.to_string()),
                    ("q", q.to_string()),
                    ("r", r.to_string()),
                    ("gap", gap.to_string()),
                    ("samples", samples.to_string()),
                ],
            );
            let mut report = ExperimentReport::new("convergence", manifest);
            for row in &result.rows {
                report.rows.push(ReportRow {
                    n: row.n as u64,
                    estimate: row.ks,
                    stderr: 0.0,
                    samples: row.samples,
                    seconds: row.seconds,
                });
                report
                    .fits
                    .insert(format!("scaled_width_{}", row.n), row.median_scaled_width);
                report.fits.insert(format!("width_over_log_{}", row.n), row.width_over_log);
            }
            report.fits.insert("sigma".into(), result.sigma);
            report.fits.insert("width_log_ratio".into(), result.width_log_ratio);
            report.checks.insert("ks_non_increasing".into(), result.ks_non_increasing);
            report.checks.insert("width_decreasing".into(), result.width_decreasing);
            if let (Some(ks), Some(gate)) = (result.gaussian_ks, result.gaussian_gate) {
                report.fits.insert("gaussian_ks".into(), ks);
                report.checks.insert("gaussian_gate".into(), gate);
            }
            Ok(emit(&opts, &report.to_json()))
        }
        Command::Repulsion { mode, r, gap, n_list, samples, epsilon, p, q } => {
            let n_list = parse_usize_list(&n_list)?;
            let manifest = manifest_for(
                &opts,
                "repulsion",
                &[
                    ("mode", mode.clone()),
                    ("r", r.to_string()),
                    ("gap", gap.to_string()),
                    ("epsilon", epsilon.to_string()),
                ],
            );
            let mut report = ExperimentReport::new("repulsion", manifest);
            let mut partial = false;
            match mode.as_str() {
                "walks" => {
                    let dist = IncrementDist::simple();
                    let x = harness::conditioned_endpoints(r, gap);
                    for &n in &n_list {
                        if budget.exhausted() {
                            partial = true;
                            break;
                        }
                        let start = Instant::now();
                        let cap = walks::default_cap(&dist, &x, &x, n);
                        let systems = walks::sample_conditioned_bridge(
                            &dist,
                            &x,
                            &x,
                            n,
                            samples,
                            BridgeMethod::DpBackward,
                            cap,
                            seed.wrapping_add(n as u64),
                        )
                        .map_err(|e| e.to_string())?;
                        let stats = walks::repulsion_stats(&systems, n, epsilon);
                        let late = stats.freq_eta_exceeds((n as f64).powf(1.0 - epsilon));
                        let close = stats.freq_bulk_gap_at_most((n as f64).powf(0.15));
                        report.rows.push(ReportRow {
                            n: n as u64,
                            estimate: late,
                            stderr: 0.0,
                            samples: samples as u64,
                            seconds: start.elapsed().as_secs_f64(),
                        });
                        report.fits.insert(format!("bulk_close_{n}"), close);
                    }
                }
                "percolation" => {
                    let params = RcParams::new(p, q).map_err(|e| e.to_string())?;
                    if budget.exhausted() {
                        return Ok(3);
                    }
                    let result = harness::globrep_diagnostic(
                        params,
                        Boundary::Free,
                        r,
                        gap,
                        &n_list,
                        samples,
                        epsilon,
                        harness::BULK_COEFF_DEFAULT,
                        seed,
                    )
                    .map_err(|e| e.to_string())?;
                    for row in &result.rows {
                        report.rows.push(ReportRow {
                            n: row.n as u64,
                            estimate: row.freq_first_late,
                            stderr: 0.0,
                            samples: row.samples,
                            seconds: row.seconds,
                        });
                        report.fits.insert(format!("last_early_{}", row.n), row.freq_last_early);
                        report.fits.insert(format!("bulk_close_{}", row.n), row.freq_bulk_close);
                    }
                    report.checks.insert("all_decreasing".into(), result.all_decreasing);
                    report.checks.insert("inclusion_ok".into(), result.inclusion_ok);
                }
                other => return Err(format!("mode must be walks or percolation, got {other:?}")),
            }
            let code = emit(&opts, &report.to_json());
            Ok(if partial && code == 0 { 3 } else { code })
        }
        Command::Duality { p, q, n_list, height, samples } => {
            let n_list = parse_usize_list(&n_list)?;
            if budget.exhausted() {
                return Ok(3);
            }
            let result = harness::duality_stretch_check(p, q, &n_list, height, samples, seed)
                .map_err(|e| e.to_string())?;
            let manifest = manifest_for(
                &opts,
                "duality",
                &[("p", p.to_string()), ("q", q.to_string()), ("samples", samples.to_string())],
            );
            let mut report = ExperimentReport::new("duality", manifest);
            report.rows = result.rows.clone();
            report.fits.insert("dual_p".into(), result.dual_p);
            report.fits.insert("tau_dual".into(), result.tau_dual);
            report.fits.insert("rate".into(), result.rate);
            report.fits.insert("ratio".into(), result.ratio);
            report.fits.insert("height_sensitivity".into(), result.height_sensitivity);
            report.checks.insert("ratio_in_window".into(), result.ratio_ok);
            report.checks.insert("involution".into(), result.involution_ok);
            Ok(emit(&opts, &report.to_json()))
        }
        Command::Report { input, csv } => {
            let text = std::fs::read_to_string(&input)
                .map_err(|e| format!("cannot read {}: {e}", input.display()))?;
            let report = ExperimentReport::from_json(&text)
                .map_err(|e| format!("bad report file: {e}"))?;
            let body = if csv { report.to_csv() } else { report.to_json() };
            Ok(emit(&opts, &body))
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
    }
}
