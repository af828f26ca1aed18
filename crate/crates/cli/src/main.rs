use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fixrank::harness::{compare_geometries, diagnose, generate_problem, run_experiment, ExperimentConfig, THREADS_ENV};
use fixrank::io::{dense_to_string, write_sampled};
use fixrank::solvers::SolverKind;
use fixrank::{Error, GeometryKind, Result};

#[derive(Parser)]
#[command(name = "fixrank", version, about = "Fixed-rank matrix completion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the sampled training and test sets and the true factors as MatrixMarket files.
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "problems")]
        out: PathBuf,
    },
    /// Run every instance × geometry × solver and write CSV traces and summary.json.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Derivative, projection and invariance diagnostics on one generated instance.
    Check {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        instance: usize,
        /// Write the JSON reports here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate iterations to a cost level across the traces in a run directory.
    Compare {
        dir: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        level: f64,
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Args)]
#[command(after_help = format!("The worker count defaults to ${THREADS_ENV} when --threads is not given."))]
struct ConfigArgs {
    /// JSON file with any subset of the fields below; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d1: Option<usize>,
    #[arg(long)]
    d2: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    oversampling: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    instances: Option<usize>,
    /// Comma-separated: gh, ubv, uy, embedded, gh-euclidean, uy-euclidean, ubv-diag.
    #[arg(long, value_delimiter = ',')]
    geometries: Option<Vec<GeometryKind>>,
    /// Comma-separated: gd, tr.
    #[arg(long, value_delimiter = ',')]
    solvers: Option<Vec<SolverKind>>,
    #[arg(long)]
    no_test_set: bool,
    /// Start GH runs from (G/c, H c).
    #[arg(long)]
    unbalance: Option<f64>,
    #[arg(long)]
    gd_max_iters: Option<usize>,
    #[arg(long)]
    tr_max_outer: Option<usize>,
    #[arg(long)]
    tr_max_inner: Option<usize>,
    #[arg(long)]
    cost_stop: Option<f64>,
    #[arg(long)]
    grad_norm_stop: Option<f64>,
    /// Record zero times so traces are bit-reproducible.
    #[arg(long)]
    no_time: bool,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    checkpoints: bool,
}

macro_rules! set {
    ($cfg:ident, $args:ident, $($f:ident),*) => {
        $(if let Some(v) = $args.$f.clone() { $cfg.$f = v; })*
    };
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
            None => ExperimentConfig::default(),
        };
        set!(cfg, self, d1, d2, rank, oversampling, seed, instances, geometries, solvers);
        set!(cfg, self, gd_max_iters, tr_max_outer, tr_max_inner, cost_stop, grad_norm_stop);
        if self.unbalance.is_some() {
            cfg.unbalance = self.unbalance;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        cfg.test_set &= !self.no_test_set;
        cfg.record_time &= !self.no_time;
        cfg.checkpoints |= self.checkpoints;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn generate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    for i in 0..cfg.instances {
        let g = generate_problem(cfg, i)?;
        write_sampled(&out.join(format!("i{i}_train.mtx")), g.problem.train())?;
        if let Some(test) = g.problem.test() {
            write_sampled(&out.join(format!("i{i}_test.mtx")), test)?;
        }
        fs::write(out.join(format!("i{i}_a.mtx")), dense_to_string(&g.a))?;
        fs::write(out.join(format!("i{i}_b.mtx")), dense_to_string(&g.b))?;
    }
    println!("wrote {} instance(s) to {}", cfg.instances, out.display());
    Ok(())
}

fn run(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let summary = run_experiment(cfg, out)?;
    println!("{:>4} {:<13} {:<3} {:>6} {:>12} {:>12} {:>10}  stop", "inst", "geometry", "alg", "iters", "cost", "test rmse", "time s");
    for r in &summary.runs {
        let rmse = r.test_rmse.map_or("-".to_string(), |v| format!("{v:.3e}"));
        let stop = match (&r.stop, &r.error) {
            (_, Some(e)) => format!("error: {e}"),
            (Some(s), None) => format!("{s:?}"),
            (None, None) => "-".to_string(),
        };
        println!(
            "{:>4} {:<13} {:<3} {:>6} {:>12.3e} {:>12} {:>10.3}  {stop}",
            r.instance, r.geometry, r.solver, r.iterations, r.final_cost, rmse, r.wall_time_s
        );
    }
    println!("traces and summary.json in {}", out.display());
    Ok(())
}

fn check(cfg: &ExperimentConfig, instance: usize, out: Option<&Path>) -> Result<bool> {
    let problem = generate_problem(cfg, instance)?.problem;
    let reports = cfg.geometries.iter().map(|&k| diagnose(k, &problem, cfg.seed)).collect::<Result<Vec<_>>>()?;
    for r in &reports {
        eprintln!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.geometry);
    }
    let json = serde_json::to_string_pretty(&reports)?;
    match out {
        Some(p) => fs::write(p, json)?,
        None => println!("{json}"),
    }
    Ok(reports.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { config, out } => config.resolve().and_then(|c| generate(&c, &out)).map(|_| true),
        Command::Run { config, out } => config.resolve().and_then(|c| run(&c, &out)).map(|_| true),
        Command::Check { config, instance, out } => config.resolve().and_then(|c| {
            if instance >= c.instances {
                return Err(Error::Config(format!("instance {instance} out of range for {} instances", c.instances)));
            }
            check(&c, instance, out.as_deref())
        }),
        Command::Compare { dir, level, csv } => compare_geometries(&dir, level).map(|c| {
            print!("{}", if csv { c.to_csv() } else { c.to_text() });
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
