use std::fs;

use uqbench_core::harness::{read_convergence, run_benchmark, BenchmarkPlan};

const PLAN: &str = r#"
cells = 20
output = "out"

[scenario]
simulation_time = 10.0

[samples]
n = 120
seed = 5

[[methods]]
kind = "apc"
variant = "pcm"
orders = [1, 2]

[[methods]]
kind = "sparsegrid"
variant = "modified"
budgets = [10, 40]

[[methods]]
kind = "vkoga"
deltas = [0.3]
n = [4, 16]
resolution = 10

[[methods]]
kind = "hsg"
levels = [0]
order = 1
node_band = [-1.0, 2.0]
"#;

#[test]
fn small_plan_covers_every_method_and_reruns_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("plan.toml"), PLAN).unwrap();
    let plan = BenchmarkPlan::load(dir.path().join("plan.toml")).unwrap();
    let first = run_benchmark(&plan).unwrap();
    assert!(first.failures.is_empty(), "{:?}", first.failures.iter().map(|f| &f.message).collect::<Vec<_>>());
    let rows = read_convergence(plan.output.join("convergence.csv")).unwrap();
    assert_eq!(rows.len(), 7);
    let cost = |m: &str, v: &str| rows.iter().find(|r| r.method == m && r.variant == v).map(|r| r.cost);
    assert_eq!(cost("apc", "pcm1"), Some(4));
    assert_eq!(cost("apc", "pcm2"), Some(10));
    assert_eq!(cost("hsg", "no=1"), Some(1));
    let vk: Vec<usize> = rows.iter().filter(|r| r.method == "vkoga").map(|r| r.cost).collect();
    assert_eq!(vk, vec![4, 16]);
    for r in &rows {
        assert!(r.error_mean.is_finite() && r.error_mean >= 0.0);
        assert!(r.rel_error_mean.is_finite());
    }
    for r in rows.iter().filter(|r| r.method == "sparsegrid") {
        assert!(plan.output.join(format!("moments/sparsegrid_{}_{}.csv", r.variant, r.cost)).exists());
    }

    let before = fs::read(plan.output.join("convergence.csv")).unwrap();
    let second = run_benchmark(&plan).unwrap();
    assert_eq!(second.solver_calls, 0);
    assert_eq!(fs::read(plan.output.join("convergence.csv")).unwrap(), before);
    assert!(first.solver_calls >= 120);
}

#[test]
fn shipped_plan_parses() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../plans/desk.toml");
    let plan = BenchmarkPlan::load(path).unwrap();
    assert_eq!(plan.methods.len(), 5);
    assert_eq!(plan.scenario_config().n_cells, 100);
    assert!(plan.output.ends_with("results/desk"));
}
