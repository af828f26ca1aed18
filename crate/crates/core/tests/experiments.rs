use std::time::Instant;

use fixrank::harness::{compare_geometries, generate_problem, run_experiment, solve, trace_file_name, ExperimentConfig, ExperimentSummary, RunOptions};
use fixrank::solvers::{SolverKind, SolverTrace, StopReason, CSV_HEADER};
use fixrank::GeometryKind;

fn smoke() -> ExperimentConfig {
    ExperimentConfig { d1: 100, d2: 120, rank: 3, oversampling: 6.0, seed: 5, instances: 1, record_time: false, ..Default::default() }
}

#[test]
fn smoke_config_runs_every_pair() {
    let dir = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let summary = run_experiment(&smoke(), dir.path()).unwrap();
    assert!(t.elapsed().as_secs() < 30);
    assert_eq!(summary.runs.len(), 8);
    for run in &summary.runs {
        assert!(run.error.is_none(), "{run:?}");
        assert!(run.final_cost <= run.initial_cost);
        let file = run.trace_file.as_ref().unwrap();
        let text = std::fs::read_to_string(dir.path().join(file)).unwrap();
        assert_eq!(text.lines().next(), Some(CSV_HEADER));
        let trace = SolverTrace::read_csv(&dir.path().join(file)).unwrap();
        assert_eq!(trace.iterations(), run.iterations);
        if run.solver == SolverKind::Tr {
            assert!(run.final_cost < 1e-16, "{run:?}");
        }
    }
    let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let back: ExperimentSummary = serde_json::from_str(&text).unwrap();
    assert_eq!(back.runs.len(), 8);
    assert_eq!(back.config, smoke());
}

#[test]
fn reruns_reproduce_final_costs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = ExperimentConfig { geometries: vec![GeometryKind::Gh, GeometryKind::Embedded], ..smoke() };
    let sa = run_experiment(&cfg, a.path()).unwrap();
    let sb = run_experiment(&cfg, b.path()).unwrap();
    for (x, y) in sa.runs.iter().zip(&sb.runs) {
        assert_eq!(x.final_cost.to_bits(), y.final_cost.to_bits());
        let file = x.trace_file.as_ref().unwrap();
        assert_eq!(std::fs::read(a.path().join(file)).unwrap(), std::fs::read(b.path().join(file)).unwrap());
    }
}

#[test]
fn comparison_lists_missing_traces_as_absent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { geometries: vec![GeometryKind::Uy, GeometryKind::Gh], solvers: vec![SolverKind::Tr], instances: 2, ..smoke() };
    run_experiment(&cfg, dir.path()).unwrap();
    std::fs::remove_file(dir.path().join(trace_file_name(1, GeometryKind::Uy, SolverKind::Tr))).unwrap();
    let c = compare_geometries(dir.path(), 1e-6).unwrap();
    let keys: Vec<_> = c.rows.iter().map(|r| (r.geometry, r.instance, r.present)).collect();
    assert_eq!(
        keys,
        vec![(GeometryKind::Gh, 0, true), (GeometryKind::Gh, 1, true), (GeometryKind::Uy, 0, true), (GeometryKind::Uy, 1, false)]
    );
    assert!(c.rows.iter().filter(|r| r.present).all(|r| r.iterations_to_level.is_some()));
    assert!(c.to_text().contains("absent"));
    assert_eq!(c.to_csv().lines().count(), 5);
    // same table from the traces alone
    std::fs::remove_file(dir.path().join("summary.json")).unwrap();
    let again = compare_geometries(dir.path(), 1e-6).unwrap();
    assert_eq!(again.to_csv(), c.to_csv());
}

#[test]
fn comparison_of_two_traces() {
    let dir = tempfile::tempdir().unwrap();
    let p = generate_problem(&smoke(), 0).unwrap().problem;
    let opts = RunOptions::from_config(&smoke());
    for kind in [GeometryKind::Gh, GeometryKind::Ubv] {
        let out = solve(kind, SolverKind::Gd, &p, &opts).unwrap();
        out.trace.write_csv(&dir.path().join(trace_file_name(0, kind, SolverKind::Gd))).unwrap();
    }
    let c = compare_geometries(dir.path(), 1e-6).unwrap();
    assert_eq!(c.rows.len(), 2);
    assert!(c.rows.iter().all(|r| r.present && r.iterations_to_level.is_some()));
}

#[test]
fn solvers_decrease_the_completion_cost_monotonically() {
    let p = generate_problem(&smoke(), 0).unwrap().problem;
    let opts = RunOptions::from_config(&smoke());
    for kind in GeometryKind::ALL {
        for solver in SolverKind::ALL {
            let out = solve(kind, solver, &p, &opts).unwrap();
            let costs: Vec<f64> = out.trace.rows.iter().map(|r| r.cost).collect();
            assert!(costs.windows(2).all(|w| w[1] <= w[0]), "{kind} {solver}");
            assert!(out.summary.error.is_none());
            if solver == SolverKind::Tr && !matches!(kind, GeometryKind::UbvDiag) {
                assert_ne!(out.summary.stop, Some(StopReason::MaxIterations), "{kind}");
            }
        }
    }
}

#[test]
fn unbalanced_gh_start_follows_the_same_iterates() {
    let p = generate_problem(&smoke(), 0).unwrap().problem;
    let base = RunOptions::from_config(&smoke());
    let unb = RunOptions { unbalance: Some(2f64.sqrt()), ..base.clone() };
    let a = solve(GeometryKind::Gh, SolverKind::Gd, &p, &base).unwrap();
    let b = solve(GeometryKind::Gh, SolverKind::Gd, &p, &unb).unwrap();
    assert_eq!(a.trace.iterations(), b.trace.iterations());
    // rounding grows relative to the starting cost, not the current one
    let scale = a.trace.rows[0].cost;
    for (x, y) in a.trace.rows.iter().zip(&b.trace.rows) {
        assert!((x.cost - y.cost).abs() <= 1e-12 * scale, "{} {:e} {:e}", x.iter, x.cost, y.cost);
    }
}

#[test]
fn bad_configs_are_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { d1: 10, d2: 10, rank: 4, oversampling: 8.0, ..Default::default() };
    assert!(run_experiment(&cfg, dir.path()).is_err());
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}
