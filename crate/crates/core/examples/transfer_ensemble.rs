//! Warm-start a task from similar history: train the similarity regressor,
//! build history on sibling workloads, then compare the first iterations
//! with and without transfer.
//!
//! cargo run --release -p sparktune --example transfer_ensemble

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparktune::benchmark::{history_task, run_curve, train_similarity, training_tasks};
use sparktune::sim::{make_workload, siblings, Family, SuiteManifest};
use sparktune::space::SearchSpace;
use sparktune::gp::Observation;
use sparktune::transfer::{compute_meta_feature, filter_tasks};
use sparktune::tuner::{fixed_defaults, Strategy};

fn main() {
    let space = SearchSpace::spark_default();
    println!("training the similarity model on 60 synthetic tasks...");
    let model = train_similarity(&training_tasks(&space, 60, 0.05, 1).unwrap(), 1).unwrap();

    let target = make_workload(500, Family::Mixed);
    let history: Vec<_> = siblings(&target, 3, 0.05, 500)
        .iter()
        .enumerate()
        .map(|(i, w)| history_task(&space, w, &format!("sibling-{i}"), 25, w.seed).unwrap())
        .collect();

    // what the filter sees after the default runs
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let defaults: Vec<Observation> = fixed_defaults(&space)
        .into_iter()
        .map(|c| {
            let r = target.execute(&space, &c, &target.base_context(), &mut rng).unwrap();
            Observation { config: c, objective: r.objective, context: r.context, metrics: r.metrics }
        })
        .collect();
    let meta = compute_meta_feature(&defaults).unwrap();
    for s in filter_tasks(&model, &meta, &history, 0.65, 5) {
        println!("selected {} (predicted similarity {:.3})", s.record.task_id(), s.similarity);
    }

    let suite = SuiteManifest::new(vec![]);
    let with = run_curve(&space, &suite, &target, "rover", Strategy::rover(), 1, 10, history, Some(model)).unwrap();
    let without = run_curve(&space, &suite, &target, "rover", Strategy::rover(), 1, 10, Vec::new(), None).unwrap();
    println!("{:>4} {:>12} {:>12}", "iter", "transfer", "cold start");
    for k in 0..=10 {
        println!("{k:>4} {:>12.4} {:>12.4}", with.best_at(k), without.best_at(k));
    }
}
