//! Fire / no-fire vectors for every rule of the bundled rule document,
//! shared by the golden test and the acceptance run.

use sparktune::metrics::RuntimeMetrics;
use sparktune::rules::{apply_rules_traced, eval_condition, RuleSet};
use sparktune::space::{Configuration, SearchSpace};

pub const MIB: f64 = 1024.0 * 1024.0;
pub const GIB: f64 = 1024.0 * MIB;

pub type Pairs = &'static [(&'static str, f64)];

pub struct Case {
    pub rule: usize,
    pub config: Pairs,
    pub metrics: Pairs,
    pub expect: f64,
    /// Rule is shadowed by an earlier rule with a weaker condition, so it is
    /// exercised on its own.
    pub isolated: bool,
    pub no_fire_config: Pairs,
    pub no_fire_metrics: Pairs,
}

const fn case(rule: usize, metrics: Pairs, expect: f64, no_fire_metrics: Pairs) -> Case {
    Case { rule, config: &[], metrics, expect, isolated: false, no_fire_config: &[], no_fire_metrics }
}

const fn case_cfg(rule: usize, config: Pairs, metrics: Pairs, expect: f64, no_fire_config: Pairs, no_fire_metrics: Pairs) -> Case {
    Case { rule, config, metrics, expect, isolated: false, no_fire_config, no_fire_metrics }
}

const C1: Pairs = &[("spark.executor.cores", 1.0)];
const C2: Pairs = &[("spark.executor.cores", 2.0)];

pub fn base_config() -> Configuration {
    Configuration::new()
        .with("spark.sql.files.maxPartitionBytes", 64.0 * MIB)
        .with("spark.sql.adaptive.maxNumPostShufflePartitions", 200.0)
        .with("spark.dynamicAllocation.maxExecutors", 50.0)
        .with("spark.driver.cores", 2.0)
        .with("spark.driver.memory", 8.0)
        .with("spark.driver.memoryOverhead", 1024.0)
        .with("spark.executor.cores", 2.0)
        .with("spark.executor.memory", 10.0)
        .with("spark.executor.memoryOverhead", 2048.0)
        .with("spark.vcore.boost.ratio", 1.0)
}

/// Metrics that satisfy no shipped rule.
pub fn neutral_metrics() -> RuntimeMetrics {
    RuntimeMetrics::default()
        .with("stage_max_avg_input_run_time", 0.3)
        .with("stage_max_avg_tasks_run_time", 0.25)
        .with("stage_max_avg_shuffle_read_run_time", 0.5)
        .with("max_mem_usage", 0.8)
        .with("avg_mem_usage", 0.65)
        .with("max_driver_mem_usage", 0.7)
        .with("avg_driver_mem_usage", 0.55)
        .with("total_memory", 100.0)
}

pub fn build(config: &[(&str, f64)], metrics: &[(&str, f64)]) -> (Configuration, RuntimeMetrics) {
    let c = config.iter().fold(base_config(), |c, (k, v)| c.with(k, *v));
    let m = metrics.iter().fold(neutral_metrics(), |m, (k, v)| m.with(k, *v));
    (c, m)
}

pub fn cases() -> Vec<Case> {
    let hi_mem: Pairs = &[("max_mem_usage", 0.95), ("avg_mem_usage", 0.8)];
    let mut v = vec![
        // maxPartitionBytes
        case(0, &[("stage_max_avg_input_run_time", 0.15)], 128.0 * MIB, &[("stage_max_avg_input_run_time", 0.21)]),
        case(1, &[("stage_max_avg_input_run_time", 0.5)], 32.0 * MIB, &[("stage_max_avg_input_run_time", 0.39)]),
        // vcore.boost.ratio
        case(
            2,
            &[("max_mem_usage", 0.5), ("avg_mem_usage", 0.4), ("stage_max_avg_tasks_run_time", 0.15)],
            3.0,
            &[("max_mem_usage", 0.5), ("avg_mem_usage", 0.4), ("stage_max_avg_tasks_run_time", 0.25)],
        ),
        case_cfg(
            3,
            &[("spark.vcore.boost.ratio", 3.0)],
            &[("max_mem_usage", 0.5), ("stage_max_avg_tasks_run_time", 0.5)],
            2.0,
            &[("spark.vcore.boost.ratio", 3.0)],
            &[("max_mem_usage", 0.5), ("stage_max_avg_tasks_run_time", 0.3)],
        ),
        // executor.cores
        case_cfg(4, C2, &[("stage_max_avg_tasks_run_time", 0.1)], 1.0, C2, &[("stage_max_avg_tasks_run_time", 0.2)]),
        case_cfg(5, C1, &[("stage_max_avg_tasks_run_time", 0.4)], 2.0, C1, &[("stage_max_avg_tasks_run_time", 0.4), ("max_mem_usage", 0.95), ("avg_mem_usage", 0.8)]),
        case_cfg(6, C1, &[("stage_max_avg_tasks_run_time", 0.4), ("max_mem_usage", 0.95), ("avg_mem_usage", 0.8)], 2.0, C1, &[("stage_max_avg_tasks_run_time", 0.4)]),
        // executor.memory (base 10 GB)
        case_cfg(7, C2, &[("stage_max_avg_tasks_run_time", 0.1)], 5.0, C1, &[("stage_max_avg_tasks_run_time", 0.1)]),
        case_cfg(8, C2, &[("max_mem_usage", 0.6), ("avg_mem_usage", 0.5)], 9.0, C2, &[("max_mem_usage", 0.6), ("avg_mem_usage", 0.65)]),
        case_cfg(9, C1, &[("max_mem_usage", 0.6), ("avg_mem_usage", 0.5)], 9.0, C1, &[("max_mem_usage", 0.8), ("avg_mem_usage", 0.5)]),
        case_cfg(10, C2, hi_mem, 11.0, C2, &[("max_mem_usage", 0.95), ("avg_mem_usage", 0.7)]),
        case_cfg(11, C1, hi_mem, 11.0, C1, &[("max_mem_usage", 0.85), ("avg_mem_usage", 0.8)]),
        case_cfg(12, C1, &[("stage_max_avg_tasks_run_time", 0.4)], 20.0, C1, &[("stage_max_avg_tasks_run_time", 0.3)]),
        Case {
            rule: 13,
            config: C1,
            metrics: &[("stage_max_avg_tasks_run_time", 0.4), ("max_mem_usage", 0.95), ("avg_mem_usage", 0.8)],
            expect: 10.0 * 2.2 + 2048.0 / 1024.0,
            isolated: true,
            no_fire_config: C1,
            no_fire_metrics: &[("stage_max_avg_tasks_run_time", 0.4), ("max_mem_usage", 0.95), ("avg_mem_usage", 0.7)],
        },
        // executor.memoryOverhead (base 2048 MB)
        case_cfg(14, C2, &[("stage_max_avg_tasks_run_time", 0.1)], 1024.0, C1, &[("stage_max_avg_tasks_run_time", 0.1)]),
        case_cfg(15, C2, &[("max_mem_usage", 0.6), ("avg_mem_usage", 0.5)], 2048.0 * 0.9, C2, &[("max_mem_usage", 0.6), ("avg_mem_usage", 0.65)]),
        case_cfg(16, C1, &[("max_mem_usage", 0.6), ("avg_mem_usage", 0.5)], 2048.0 * 0.9, C1, &[("max_mem_usage", 0.8), ("avg_mem_usage", 0.5)]),
        case_cfg(17, C2, hi_mem, 2048.0 * 1.1, C2, &[("max_mem_usage", 0.95), ("avg_mem_usage", 0.7)]),
        case_cfg(18, C1, hi_mem, 2048.0 * 1.1, C1, &[("max_mem_usage", 0.85), ("avg_mem_usage", 0.8)]),
        case_cfg(19, C1, &[("stage_max_avg_tasks_run_time", 0.4)], 4096.0, C1, &[("stage_max_avg_tasks_run_time", 0.3)]),
        Case {
            rule: 20,
            config: C1,
            metrics: &[("stage_max_avg_tasks_run_time", 0.4), ("max_mem_usage", 0.95), ("avg_mem_usage", 0.8)],
            expect: 2048.0 * 2.2,
            isolated: true,
            no_fire_config: C1,
            no_fire_metrics: &[("stage_max_avg_tasks_run_time", 0.3), ("max_mem_usage", 0.95), ("avg_mem_usage", 0.8)],
        },
        // maxExecutors: each band fires at its inclusive upper edge
        case(21, &[("total_memory", 3.0)], 5.0, &[("total_memory", 3.01)]),
        case(22, &[("total_memory", 5.0)], 6.0, &[("total_memory", 3.0)]),
        case(23, &[("total_memory", 8.0)], 8.0, &[("total_memory", 8.5)]),
        case(24, &[("total_memory", 10.0)], 10.0, &[("total_memory", 15.5)]),
        case(25, &[("total_memory", 20.0)], 15.0, &[("total_memory", 15.0)]),
        case(26, &[("total_memory", 40.0)], 20.0, &[("total_memory", 41.0)]),
        // maxNumPostShufflePartitions (base 200)
        case(27, &[("stage_max_avg_shuffle_read_run_time", 0.1)], 100.0, &[("stage_max_avg_shuffle_read_run_time", 0.2)]),
        case(28, &[("stage_max_avg_shuffle_read_run_time", 1.5)], 400.0, &[("stage_max_avg_shuffle_read_run_time", 1.1)]),
    ];
    let driver: [(Pairs, Pairs); 6] = [
        (&[("max_driver_mem_usage", 0.3), ("avg_driver_mem_usage", 0.2)], &[("max_driver_mem_usage", 0.3), ("avg_driver_mem_usage", 0.3)]),
        (&[("max_driver_mem_usage", 0.4), ("avg_driver_mem_usage", 0.3)], &[("max_driver_mem_usage", 0.5), ("avg_driver_mem_usage", 0.3)]),
        (&[("max_driver_mem_usage", 0.55), ("avg_driver_mem_usage", 0.45)], &[("max_driver_mem_usage", 0.55), ("avg_driver_mem_usage", 0.55)]),
        (&[("max_driver_mem_usage", 0.95), ("avg_driver_mem_usage", 0.95)], &[("max_driver_mem_usage", 0.95), ("avg_driver_mem_usage", 0.9)]),
        (&[("max_driver_mem_usage", 0.85), ("avg_driver_mem_usage", 0.8)], &[("max_driver_mem_usage", 0.85), ("avg_driver_mem_usage", 0.7)]),
        (&[("max_driver_mem_usage", 0.95), ("avg_driver_mem_usage", 0.65)], &[("max_driver_mem_usage", 0.95), ("avg_driver_mem_usage", 0.55)]),
    ];
    let factors = [0.8, 0.85, 0.9, 1.2, 1.1, 1.1];
    for (k, (fire, no_fire)) in driver.iter().enumerate() {
        v.push(case(29 + k, fire, 1.0, no_fire));
        v.push(case(35 + k, fire, 8.0 * factors[k], no_fire));
        v.push(case(41 + k, fire, 1024.0 * factors[k], no_fire));
    }
    v.sort_by_key(|c| c.rule);
    v
}

/// Checks one case against the bundled rules.
pub fn check(c: &Case, rules: &RuleSet, space: &SearchSpace) -> Result<(), String> {
    let rule = &rules.rules[c.rule];
    let (cfg, m) = build(c.config, c.metrics);
    if !eval_condition(&rule.condition, &m, &cfg).map_err(|e| e.to_string())? {
        return Err(format!("rule {} should hold", c.rule));
    }
    let set = if c.isolated { RuleSet { rules: vec![rule.clone()] } } else { rules.clone() };
    let (out, fired) = apply_rules_traced(&set, &cfg, &m, space).map_err(|e| e.to_string())?;
    let firing = fired
        .iter()
        .find(|f| f.parameter == rule.parameter)
        .ok_or_else(|| format!("rule {} did not fire", c.rule))?;
    if !c.isolated && firing.rule != c.rule {
        return Err(format!("rule {} shadowed by {}", c.rule, firing.rule));
    }
    let got = out.get_f64(&rule.parameter).unwrap();
    if (got - c.expect).abs() > 1e-9 * c.expect.abs() {
        return Err(format!("rule {}: {got} vs {}", c.rule, c.expect));
    }

    let (cfg, m) = build(c.no_fire_config, c.no_fire_metrics);
    if eval_condition(&rule.condition, &m, &cfg).map_err(|e| e.to_string())? {
        return Err(format!("rule {} should not hold", c.rule));
    }
    let (_, fired) = apply_rules_traced(rules, &cfg, &m, space).map_err(|e| e.to_string())?;
    if fired.iter().any(|f| f.rule == c.rule) {
        return Err(format!("rule {} fired on its no-fire vector", c.rule));
    }
    Ok(())
}

/// Doubling maxPartitionBytes from 3 or 4 GiB ends at the 4 GiB bound.
pub fn check_clamp(rules: &RuleSet, space: &SearchSpace) -> Result<(), String> {
    for start in [3.0 * GIB, 4.0 * GIB] {
        let (cfg, m) = build(&[], &[("stage_max_avg_input_run_time", 0.15)]);
        let cfg = cfg.with("spark.sql.files.maxPartitionBytes", start);
        let (out, _) = apply_rules_traced(rules, &cfg, &m, space).map_err(|e| e.to_string())?;
        let got = out.get_f64("spark.sql.files.maxPartitionBytes");
        if got != Some(4.0 * GIB) {
            return Err(format!("maxPartitionBytes from {start}: {got:?}"));
        }
    }
    Ok(())
}
