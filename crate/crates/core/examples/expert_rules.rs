//! Apply the bundled expert rules to a configuration whose runtime metrics
//! show memory pressure and slow input tasks.
//!
//! cargo run -p sparktune --example expert_rules

use sparktune::metrics::RuntimeMetrics;
use sparktune::rules::{apply_rules_traced, RuleSet};
use sparktune::space::SearchSpace;
use sparktune::tuner::fixed_defaults;

fn main() {
    let space = SearchSpace::spark_default();
    let rules = RuleSet::spark_default(&space).unwrap();
    println!("{} rules loaded", rules.len());

    let config = fixed_defaults(&space).remove(0);
    let metrics = RuntimeMetrics::default()
        .with("max_mem_usage", 0.95)
        .with("avg_mem_usage", 0.8)
        .with("stage_max_avg_input_run_time", 0.6)
        .with("total_memory", 12.0);

    let (next, fired) = apply_rules_traced(&rules, &config, &metrics, &space).unwrap();
    for f in &fired {
        println!("rule {:>2} {:<45} {:?} -> {:?}", f.rule, f.parameter, f.before, f.after);
    }
    assert!(space.validate(&next).is_empty());
}
