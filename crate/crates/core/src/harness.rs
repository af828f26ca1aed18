//! Problem generation and experiment orchestration for matrix completion.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{check_gradient, check_hessian, duality_check, orbit_check, projection_defects, DiagnosticsReport};
use crate::error::{Error, Result};
use crate::io::save_checkpoint;
use crate::geometry::{BMode, Embedded, FullRank, Metric, PointGh, Polar, Subspace};
use crate::manifold::{first_order, TangentVector};
use crate::matcomp::{init_spectral, linearized_step, tr_radius_seed, CompletionModel, CompletionProblem};
use crate::point::{Factored, FactoredPoint, GeometryKind};
use crate::rng;
use crate::solvers::{gradient_descent, trust_region, GdConfig, SolverKind, SolverTrace, StopReason, Stopping, TrConfig};
use crate::sparse::SampledMatrix;

pub const THREADS_ENV: &str = "FIXRANK_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d1: usize,
    pub d2: usize,
    pub rank: usize,
    pub oversampling: f64,
    pub seed: u64,
    pub instances: usize,
    pub geometries: Vec<GeometryKind>,
    pub solvers: Vec<SolverKind>,
    /// Hold out a disjoint test set of the same size as the training set.
    pub test_set: bool,
    /// Start GH runs from `(G/c, H c)` instead of the balanced spectral point.
    pub unbalance: Option<f64>,
    pub gd_max_iters: usize,
    pub tr_max_outer: usize,
    pub tr_max_inner: usize,
    pub cost_stop: f64,
    pub grad_norm_stop: f64,
    /// Off writes zero times, making traces bit-reproducible.
    pub record_time: bool,
    pub threads: Option<usize>,
    /// Save the final factors of every run under `checkpoints/<trace stem>/`.
    pub checkpoints: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            d1: 100,
            d2: 120,
            rank: 3,
            oversampling: 6.0,
            seed: 1,
            instances: 5,
            geometries: GeometryKind::MAIN.to_vec(),
            solvers: SolverKind::ALL.to_vec(),
            test_set: true,
            unbalance: None,
            gd_max_iters: 200,
            tr_max_outer: 100,
            tr_max_inner: 100,
            cost_stop: 1e-20,
            grad_norm_stop: 1e-12,
            record_time: true,
            threads: None,
            checkpoints: false,
        }
    }
}

impl ExperimentConfig {
    /// `round(OS · (d1 + d2 − r) · r)`
    pub fn sample_count(&self) -> usize {
        (self.oversampling * ((self.d1 + self.d2 - self.rank) * self.rank) as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 || self.rank > self.d1.min(self.d2) {
            return Err(Error::Config(format!("rank {} invalid for {}×{}", self.rank, self.d1, self.d2)));
        }
        if !(self.oversampling > 0.0) {
            return Err(Error::Config("oversampling must be positive".into()));
        }
        let total = self.d1 as u128 * self.d2 as u128;
        let need = self.sample_count() as u128 * if self.test_set { 2 } else { 1 };
        if need > total {
            return Err(Error::Config(format!("{need} samples requested from a {}×{} matrix", self.d1, self.d2)));
        }
        if self.sample_count() == 0 {
            return Err(Error::Config("no samples requested".into()));
        }
        if let Some(c) = self.unbalance {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("unbalance factor {c} must be positive")));
            }
        }
        if self.geometries.is_empty() || self.solvers.is_empty() {
            return Err(Error::Config("need at least one geometry and one solver".into()));
        }
        Ok(())
    }

    pub fn stopping(&self) -> Stopping {
        Stopping { cost: self.cost_stop, grad_norm: self.grad_norm_stop }
    }

    pub fn gd_config(&self) -> GdConfig {
        GdConfig { max_iters: self.gd_max_iters, stop: self.stopping(), record_time: self.record_time, ..Default::default() }
    }

    pub fn tr_config(&self) -> TrConfig {
        TrConfig {
            max_outer: self.tr_max_outer,
            max_inner: self.tr_max_inner,
            stop: self.stopping(),
            record_time: self.record_time,
            ..Default::default()
        }
    }
}

/// `m` distinct integers from `0..n`, sorted, by Floyd's algorithm.
pub fn floyd_sample(rng: &mut rng::Rng, n: u64, m: usize) -> Vec<u64> {
    assert!(m as u64 <= n, "cannot draw {m} from {n}");
    let mut set = HashSet::with_capacity(m);
    for j in (n - m as u64)..n {
        let t = rng.random_range(0..=j);
        if !set.insert(t) {
            set.insert(j);
        }
    }
    let mut out: Vec<u64> = set.into_iter().collect();
    out.sort_unstable();
    out
}

/// Ground-truth factors and the sampled problem for one instance.
#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub problem: CompletionProblem,
    /// `W★ = A Bᵀ`
    pub a: nalgebra::DMatrix<f64>,
    pub b: nalgebra::DMatrix<f64>,
}

fn sample_truth(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>, idx: &[u64], d2: usize) -> Result<SampledMatrix> {
    let entries = idx.iter().map(|&k| ((k / d2 as u64) as usize, (k % d2 as u64) as usize, 0.0)).collect();
    let pattern = SampledMatrix::from_triplets(a.nrows(), d2, entries)?;
    let vals = pattern.pattern().sample_product(a, b);
    Ok(SampledMatrix::with_values(pattern.pattern().clone(), vals))
}

/// Gaussian rank-r `W★` observed on uniformly drawn entries.
///
/// Instance `k` draws factors from stream `2k` and indices from stream
/// `2k + 1` of the configured seed.
pub fn generate_problem(cfg: &ExperimentConfig, instance: usize) -> Result<GeneratedProblem> {
    cfg.validate()?;
    let (d1, d2, r) = (cfg.d1, cfg.d2, cfg.rank);
    let mut fg = rng::stream(cfg.seed, 2 * instance as u64);
    let a = rng::gaussian(&mut fg, d1, r);
    let b = rng::gaussian(&mut fg, d2, r);
    let mut sg = rng::stream(cfg.seed, 2 * instance as u64 + 1);
    let m = cfg.sample_count();
    let n = d1 as u64 * d2 as u64;
    let (train_idx, test_idx) = if cfg.test_set {
        let mut all = floyd_sample(&mut sg, n, 2 * m);
        all.shuffle(&mut sg);
        let mut test = all.split_off(m);
        all.sort_unstable();
        test.sort_unstable();
        (all, Some(test))
    } else {
        (floyd_sample(&mut sg, n, m), None)
    };
    let train = sample_truth(&a, &b, &train_idx, d2)?;
    let test = test_idx.map(|t| sample_truth(&a, &b, &t, d2)).transpose()?;
    Ok(GeneratedProblem { problem: CompletionProblem::new(train, test, r)?, a, b })
}

/// Moves scale along the GH fiber: `(G/c, H c)`. Other forms are returned unchanged.
pub fn unbalance(x: FactoredPoint, c: f64) -> Result<FactoredPoint> {
    match x {
        FactoredPoint::Gh(p) => {
            let (g, h) = p.into_factors();
            Ok(FactoredPoint::Gh(PointGh::new(g / c, h * c)?))
        }
        other => Ok(other),
    }
}

/// Outcome of one (geometry, solver) run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub instance: usize,
    pub geometry: GeometryKind,
    pub solver: SolverKind,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub final_grad_norm: f64,
    pub test_rmse: Option<f64>,
    pub iterations: usize,
    pub stop: Option<StopReason>,
    pub error: Option<String>,
    pub wall_time_s: f64,
    /// Linearized step along the negative gradient at the start.
    pub s0: f64,
    pub trace_file: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trace: SolverTrace,
    pub point: Option<FactoredPoint>,
}

/// Solver settings for [`solve`]; initial step and radii are filled in per run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub gd: GdConfig,
    pub tr: TrConfig,
    pub unbalance: Option<f64>,
}

impl RunOptions {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        RunOptions { gd: cfg.gd_config(), tr: cfg.tr_config(), unbalance: cfg.unbalance }
    }
}

fn solve_with<G: CompletionModel + Factored>(
    geom: &G,
    kind: GeometryKind,
    solver: SolverKind,
    problem: &CompletionProblem,
    opts: &RunOptions,
    start: FactoredPoint,
) -> Result<RunOutput> {
    let x0 = geom.unwrap(start)?;
    let fo = first_order(geom, problem, &x0);
    let s0 = match linearized_step(geom, problem, &x0, &fo.grad.scaled(-1.0)) {
        Ok(s) => s,
        Err(Error::ZeroDirection) => 1.0,
        Err(e) => return Err(e),
    };
    let clock = Instant::now();
    let result = match solver {
        SolverKind::Gd => {
            let cfg = GdConfig { initial_step: s0, ..opts.gd };
            gradient_descent(geom, problem, x0, &cfg)
        }
        SolverKind::Tr => {
            let mut cfg = opts.tr;
            if let Ok((d0, dmax)) = tr_radius_seed(s0, fo.grad_norm) {
                cfg.delta0 = d0;
                cfg.delta_max = dmax;
            }
            trust_region(geom, problem, x0, &cfg)
        }
    };
    let wall_time_s = clock.elapsed().as_secs_f64();
    let (trace, point, stop, error) = match result {
        Ok(out) => (out.trace, Some(out.point), Some(out.stop), None),
        Err(e) => (e.trace, None, None, Some(e.error.to_string())),
    };
    let last = trace.last().copied();
    let summary = RunSummary {
        instance: 0,
        geometry: kind,
        solver,
        initial_cost: fo.cost,
        final_cost: last.map_or(fo.cost, |r| r.cost),
        final_grad_norm: last.map_or(fo.grad_norm, |r| r.grad_norm),
        test_rmse: point.as_ref().and_then(|p| problem.test_rmse(geom, p)),
        iterations: trace.iterations(),
        stop,
        error,
        wall_time_s,
        s0,
        trace_file: None,
    };
    Ok(RunOutput { summary, trace, point: point.map(|p| geom.wrap(p)) })
}

/// Geometry object for a tag, as a closure over the generic runner.
macro_rules! dispatch {
    ($kind:expr, |$g:ident| $body:expr) => {
        match $kind {
            GeometryKind::Gh => { let $g = &FullRank::new(Metric::ScaleInvariant); $body }
            GeometryKind::GhEuclidean => { let $g = &FullRank::new(Metric::Euclidean); $body }
            GeometryKind::Ubv => { let $g = &Polar::new(BMode::Spd); $body }
            GeometryKind::UbvDiag => { let $g = &Polar::new(BMode::Diagonal); $body }
            GeometryKind::Uy => { let $g = &Subspace::new(Metric::ScaleInvariant); $body }
            GeometryKind::UyEuclidean => { let $g = &Subspace::new(Metric::Euclidean); $body }
            GeometryKind::Embedded => { let $g = &Embedded; $body }
        }
    };
}

/// Spectral start for `kind`, unbalanced along the GH fiber when requested.
pub fn initial_point(problem: &CompletionProblem, kind: GeometryKind, unbalance_by: Option<f64>) -> Result<FactoredPoint> {
    let x = init_spectral(problem, kind)?;
    match unbalance_by {
        Some(c) => unbalance(x, c),
        None => Ok(x),
    }
}

/// Spectral initialization, step seeding and one solver run.
pub fn solve(kind: GeometryKind, solver: SolverKind, problem: &CompletionProblem, opts: &RunOptions) -> Result<RunOutput> {
    let start = initial_point(problem, kind, opts.unbalance)?;
    solve_from(kind, solver, problem, opts, start)
}

/// As [`solve`] from a given starting point.
pub fn solve_from(
    kind: GeometryKind,
    solver: SolverKind,
    problem: &CompletionProblem,
    opts: &RunOptions,
    start: FactoredPoint,
) -> Result<RunOutput> {
    dispatch!(kind, |g| solve_with(g, kind, solver, problem, opts, start))
}

fn diagnose_with<G: CompletionModel + Factored>(
    geom: &G,
    kind: GeometryKind,
    problem: &CompletionProblem,
    seed: u64,
) -> Result<DiagnosticsReport> {
    let x0 = geom.unwrap(initial_point(problem, kind, None)?)?;
    let mut g = rng::stream(seed, 2);
    let mut report = DiagnosticsReport::new(kind.as_str());
    report.gradient = Some(check_gradient(geom, problem, &x0, seed)?);
    report.projection = Some(projection_defects(geom, &x0, &mut g, 4)?);
    report.duality = Some(duality_check(geom, problem, &x0, &mut g, 4)?);
    report.orbit = orbit_check(geom, problem, &x0, &mut g)?;
    let out = solve_from(kind, SolverKind::Tr, problem, &RunOptions::default(), geom.wrap(x0))?;
    if let Some(xs) = out.point {
        report.hessian = Some(check_hessian(geom, problem, &geom.unwrap(xs)?, seed)?);
    }
    let solved = report.hessian.is_some();
    let mut report = report.finish();
    report.passed &= solved;
    Ok(report)
}

/// Derivative, projection, duality and orbit checks at the spectral start,
/// and the Hessian check at a trust-region solution.
///
/// Fails the report when the trust-region run does not return a point.
pub fn diagnose(kind: GeometryKind, problem: &CompletionProblem, seed: u64) -> Result<DiagnosticsReport> {
    dispatch!(kind, |g| diagnose_with(g, kind, problem, seed))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub runs: Vec<RunSummary>,
}

pub fn trace_file_name(instance: usize, kind: GeometryKind, solver: SolverKind) -> String {
    format!("i{instance}_{kind}_{solver}.csv")
}

fn parse_trace_name(name: &str) -> Option<(usize, GeometryKind, SolverKind)> {
    let stem = name.strip_suffix(".csv")?.strip_prefix('i')?;
    let mut parts = stem.split('_');
    let inst = parts.next()?.parse().ok()?;
    let kind = parts.next()?.parse().ok()?;
    let solver = parts.next()?.parse().ok()?;
    parts.next().is_none().then_some((inst, kind, solver))
}

/// Worker count: explicit setting, then `FIXRANK_THREADS`, then rayon's default.
pub fn thread_count(cfg: &ExperimentConfig) -> Result<Option<usize>> {
    if let Some(n) = cfg.threads {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|e| Error::Config(format!("{THREADS_ENV}=`{v}`: {e}"))),
        Err(_) => Ok(None),
    }
}

/// Runs every (instance, geometry, solver) combination, writing one CSV
/// trace per run and `summary.json` into `out_dir`.
///
/// A failing run is recorded in the summary and does not stop the others.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cfg)? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let opts = RunOptions::from_config(cfg);
    let runs = pool.install(|| -> Result<Vec<RunSummary>> {
        let problems: Vec<CompletionProblem> = (0..cfg.instances)
            .into_par_iter()
            .map(|i| generate_problem(cfg, i).map(|g| g.problem))
            .collect::<Result<_>>()?;
        let jobs: Vec<(usize, GeometryKind, SolverKind)> = (0..cfg.instances)
            .flat_map(|i| cfg.geometries.iter().flat_map(move |&k| cfg.solvers.iter().map(move |&s| (i, k, s))))
            .collect();
        jobs.par_iter()
            .map(|&(i, kind, solver)| {
                let file = trace_file_name(i, kind, solver);
                let mut summary = match solve(kind, solver, &problems[i], &opts) {
                    Ok(out) => {
                        out.trace.write_csv(&out_dir.join(&file))?;
                        if let (true, Some(x)) = (cfg.checkpoints, &out.point) {
                            let stem = file.trim_end_matches(".csv");
                            save_checkpoint(&out_dir.join("checkpoints").join(stem), kind, x)?;
                        }
                        let mut s = out.summary;
                        s.trace_file = Some(file);
                        s
                    }
                    Err(e) => RunSummary {
                        instance: i,
                        geometry: kind,
                        solver,
                        initial_cost: f64::NAN,
                        final_cost: f64::NAN,
                        final_grad_norm: f64::NAN,
                        test_rmse: None,
                        iterations: 0,
                        stop: None,
                        error: Some(e.to_string()),
                        wall_time_s: 0.0,
                        s0: f64::NAN,
                        trace_file: None,
                    },
                };
                summary.instance = i;
                Ok(summary)
            })
            .collect()
    })?;
    let summary = ExperimentSummary { config: cfg.clone(), runs };
    std::fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// One line of [`compare_geometries`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub geometry: GeometryKind,
    pub solver: SolverKind,
    pub instance: usize,
    pub present: bool,
    pub iterations_to_level: Option<usize>,
    pub iterations: Option<usize>,
    pub final_cost: Option<f64>,
    pub time_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub level: f64,
    pub rows: Vec<ComparisonRow>,
}

/// Tabulates iterations to `level` for every trace in `dir`.
///
/// The expected runs come from `summary.json` when present, otherwise from
/// the product of the instances, geometries and solvers seen in file names;
/// expected traces that are missing are listed as absent.
pub fn compare_geometries(dir: &Path, level: f64) -> Result<Comparison> {
    let mut found: BTreeMap<(GeometryKind, SolverKind, usize), PathBuf> = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if let Some((i, k, s)) = path.file_name().and_then(|n| n.to_str()).and_then(parse_trace_name) {
            found.insert((k, s, i), path);
        }
    }
    let summary_path = dir.join("summary.json");
    let expected: BTreeSet<(GeometryKind, SolverKind, usize)> = if summary_path.exists() {
        let s: ExperimentSummary = serde_json::from_str(&std::fs::read_to_string(&summary_path)?)?;
        s.runs.iter().map(|r| (r.geometry, r.solver, r.instance)).collect()
    } else {
        let kinds: BTreeSet<_> = found.keys().map(|k| k.0).collect();
        let solvers: BTreeSet<_> = found.keys().map(|k| k.1).collect();
        let insts: BTreeSet<_> = found.keys().map(|k| k.2).collect();
        let mut all = BTreeSet::new();
        for &k in &kinds {
            for &s in &solvers {
                all.extend(insts.iter().map(|&i| (k, s, i)));
            }
        }
        all
    };
    let keys: BTreeSet<_> = expected.into_iter().chain(found.keys().copied()).collect();
    let mut rows = Vec::with_capacity(keys.len());
    for (geometry, solver, instance) in keys {
        let row = match found.get(&(geometry, solver, instance)) {
            Some(path) => {
                let t = SolverTrace::read_csv(path)?;
                let last = t.last();
                ComparisonRow {
                    geometry,
                    solver,
                    instance,
                    present: true,
                    iterations_to_level: t.iterations_to(level),
                    iterations: Some(t.iterations()),
                    final_cost: last.map(|r| r.cost),
                    time_s: last.map(|r| r.time_s),
                }
            }
            None => ComparisonRow {
                geometry,
                solver,
                instance,
                present: false,
                iterations_to_level: None,
                iterations: None,
                final_cost: None,
                time_s: None,
            },
        };
        rows.push(row);
    }
    Ok(Comparison { level, rows })
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

impl Comparison {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<14} {:<6} {:>8} {:>12} {:>10} {:>12} {:>10}",
            "geometry",
            "solver",
            "instance",
            format!("iters<={:.0e}", self.level),
            "iters",
            "final_cost",
            "time_s"
        )
        .expect("string write");
        for r in &self.rows {
            if !r.present {
                writeln!(out, "{:<14} {:<6} {:>8} absent", r.geometry, r.solver, r.instance).expect("string write");
                continue;
            }
            writeln!(
                out,
                "{:<14} {:<6} {:>8} {:>12} {:>10} {:>12} {:>10}",
                r.geometry,
                r.solver,
                r.instance,
                opt(r.iterations_to_level),
                opt(r.iterations),
                r.final_cost.map_or("-".into(), |c| format!("{c:.3e}")),
                r.time_s.map_or("-".into(), |t| format!("{t:.3}")),
            )
            .expect("string write");
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("geometry,solver,instance,present,iterations_to_level,iterations,final_cost,time_s\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.geometry,
                r.solver,
                r.instance,
                r.present,
                r.iterations_to_level.map_or(String::new(), |v| v.to_string()),
                r.iterations.map_or(String::new(), |v| v.to_string()),
                r.final_cost.map_or(String::new(), |v| format!("{v:e}")),
                r.time_s.map_or(String::new(), |v| format!("{v:e}")),
            )
            .expect("string write");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_counts() {
        let cfg = ExperimentConfig { d1: 1000, d2: 1000, rank: 5, oversampling: 8.0, ..Default::default() };
        assert_eq!(cfg.sample_count(), 79_800);
        let big = ExperimentConfig { d1: 32000, d2: 32000, rank: 5, oversampling: 8.0, test_set: false, ..Default::default() };
        assert_eq!(big.sample_count(), 2_559_800);
        assert!(big.validate().is_ok());
        let frac = big.sample_count() as f64 / (32000.0 * 32000.0);
        assert!((frac - 0.0025).abs() < 1e-4);
    }

    #[test]
    fn oversized_requests_are_rejected() {
        let cfg = ExperimentConfig { d1: 10, d2: 10, rank: 3, oversampling: 3.0, test_set: false, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { d1: 10, d2: 10, rank: 3, oversampling: 1.5, test_set: true, ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig { unbalance: Some(0.0), ..Default::default() }.validate().is_err());
    }

    #[test]
    fn floyd_draws_distinct_sorted_indices() {
        let mut g = rng::stream(1, 0);
        let s = floyd_sample(&mut g, 50, 50);
        assert_eq!(s, (0..50).collect::<Vec<_>>());
        let s = floyd_sample(&mut g, 1_000_000, 2000);
        assert_eq!(s.len(), 2000);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn generation_is_reproducible_and_disjoint() {
        let cfg = ExperimentConfig { d1: 40, d2: 30, rank: 2, oversampling: 4.0, ..Default::default() };
        let a = generate_problem(&cfg, 0).unwrap();
        let b = generate_problem(&cfg, 0).unwrap();
        assert_eq!(a.problem.train(), b.problem.train());
        assert_eq!(a.problem.test(), b.problem.test());
        assert_eq!(a.problem.train().nnz(), cfg.sample_count());
        assert_eq!(a.problem.test().unwrap().nnz(), cfg.sample_count());
        let w = &a.a * a.b.transpose();
        assert!(a.problem.train().iter().all(|(i, j, v)| (w[(i, j)] - v).abs() < 1e-12));
        let c = generate_problem(&cfg, 1).unwrap();
        assert_ne!(a.problem.train(), c.problem.train());
    }

    #[test]
    fn unbalance_moves_along_the_fiber() {
        let cfg = ExperimentConfig { d1: 30, d2: 20, rank: 2, oversampling: 2.0, ..Default::default() };
        let p = generate_problem(&cfg, 0).unwrap().problem;
        let x = init_spectral(&p, GeometryKind::Gh).unwrap();
        let y = unbalance(x.clone(), 2f64.sqrt()).unwrap();
        assert!((x.to_dense() - y.to_dense()).amax() < 1e-12);
        let FactoredPoint::Gh(y) = y else { panic!() };
        let ratio = y.h().norm() / y.g().norm();
        assert!((ratio - 2.0).abs() < 1e-10, "{ratio}");
    }

    #[test]
    fn trace_names_round_trip() {
        let n = trace_file_name(3, GeometryKind::GhEuclidean, SolverKind::Tr);
        assert_eq!(parse_trace_name(&n), Some((3, GeometryKind::GhEuclidean, SolverKind::Tr)));
        assert_eq!(parse_trace_name("summary.json"), None);
        assert_eq!(parse_trace_name("i0_gh_tr_x.csv"), None);
    }

    #[test]
    fn config_json_uses_defaults_for_missing_fields() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"d1": 50, "geometries": ["gh", "ubv-diag"]}"#).unwrap();
        assert_eq!(cfg.d1, 50);
        assert_eq!(cfg.instances, 5);
        assert_eq!(cfg.geometries, vec![GeometryKind::Gh, GeometryKind::UbvDiag]);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"d3": 1}"#).is_err());
    }

    #[test]
    fn diagnose_passes_for_every_geometry() {
        let cfg = ExperimentConfig { d1: 40, d2: 35, rank: 3, oversampling: 3.0, seed: 5, ..Default::default() };
        let p = generate_problem(&cfg, 0).unwrap().problem;
        for kind in GeometryKind::ALL {
            let r = diagnose(kind, &p, 3).unwrap();
            assert!(r.gradient.as_ref().unwrap().passed && r.hessian.as_ref().unwrap().passed, "{}", r.to_json());
            assert!(r.projection.as_ref().unwrap().passed() && r.duality.as_ref().unwrap().passed(), "{}", r.to_json());
            assert_eq!(r.orbit.is_none(), matches!(kind, GeometryKind::Embedded | GeometryKind::UbvDiag), "{kind}");
            // the Euclidean GH metric is not invariant under the GL(r) action
            assert_eq!(r.passed, kind != GeometryKind::GhEuclidean, "{}", r.to_json());
        }
    }

    #[test]
    fn checkpoints_hold_the_final_point() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            d1: 30,
            d2: 25,
            rank: 2,
            oversampling: 3.0,
            instances: 1,
            geometries: vec![GeometryKind::Ubv],
            solvers: vec![SolverKind::Tr],
            checkpoints: true,
            ..Default::default()
        };
        run_experiment(&cfg, dir.path()).unwrap();
        let (kind, x) = crate::io::load_checkpoint(&dir.path().join("checkpoints/i0_ubv_tr")).unwrap();
        assert_eq!(kind, GeometryKind::Ubv);
        let out = solve(kind, SolverKind::Tr, &generate_problem(&cfg, 0).unwrap().problem, &RunOptions::from_config(&cfg)).unwrap();
        assert_eq!(x.to_dense(), out.point.unwrap().to_dense());
    }
}
