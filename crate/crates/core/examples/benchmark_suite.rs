//! Compare strategies over a small synthetic suite and print the mean
//! best-so-far curves; the CSV is what `sparktune benchmark` writes.
//!
//! cargo run --release -p sparktune --example benchmark_suite

use sparktune::benchmark::{run_benchmark, sign_test, BenchmarkManifest};
use sparktune::sim::SuiteManifest;
use sparktune::space::SearchSpace;

fn main() {
    let space = SearchSpace::spark_default();
    let mut manifest = BenchmarkManifest::new(SuiteManifest::new((100..106).collect()));
    manifest.iterations = 10;
    let result = run_benchmark(&space, &manifest, &["rover", "vanilla_bo", "rules_only"], &[0, 1]).unwrap();

    for s in result.summary() {
        let curve: Vec<String> = s.mean_best.iter().step_by(2).map(|v| format!("{v:.3}")).collect();
        println!("{:<11} {}", s.strategy, curve.join(" "));
    }

    let a: Vec<f64> = result.curves_for("rover").map(|c| c.best_at(10)).collect();
    let b: Vec<f64> = result.curves_for("vanilla_bo").map(|c| c.best_at(10)).collect();
    let wins = a.iter().zip(&b).filter(|(x, y)| x < y).count();
    let losses = a.iter().zip(&b).filter(|(x, y)| x > y).count();
    println!("rover vs vanilla_bo at 10: {wins} wins, {losses} losses, p = {:.3}", sign_test(wins, losses));
    println!("{} CSV rows", result.to_csv().lines().count() - 1);
}
