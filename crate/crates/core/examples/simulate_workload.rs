//! The synthetic Spark workload: noisy cost, runtime metrics, and a data
//! size that drifts from day to day.
//!
//! cargo run -p sparktune --example simulate_workload

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparktune::sim::{dissimilar, latent_distance, make_workload, siblings, Family};
use sparktune::space::SearchSpace;
use sparktune::tuner::fixed_defaults;

fn main() {
    let space = SearchSpace::spark_default();
    let w = make_workload(3, Family::ReduceHeavy);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let config = fixed_defaults(&space).remove(0);

    for day in [0, 3, 7, 14] {
        let ctx = w.drift(day);
        let r = w.execute(&space, &config, &ctx, &mut rng).unwrap();
        println!(
            "day {day:>2}: data {:>8.1} GB  cost {:>8.3} GB·h  runtime {:>7.0} s  executors {}",
            ctx.data_size,
            r.objective,
            r.runtime_s,
            r.metrics.get("executor_count").unwrap()
        );
    }

    let (opt, y) = w.true_optimum(&space, &w.base_context()).unwrap();
    println!("noiseless optimum {y:.3} GB·h at maxExecutors {:?}", opt.get_f64("spark.dynamicAllocation.maxExecutors"));

    let near = siblings(&w, 1, 0.05, 9).remove(0);
    let far = dissimilar(&w, 0.5, 9);
    println!("sibling distance {:.3}, dissimilar distance {:.3}", latent_distance(&w, &near), latent_distance(&w, &far));
}
