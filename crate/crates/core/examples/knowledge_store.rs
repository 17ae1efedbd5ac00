//! Persist history tasks and the similarity model, then load them back the
//! way a restarted service does.
//!
//! cargo run -p sparktune --example knowledge_store

use sparktune::benchmark::{exploration_task, train_similarity, training_tasks};
use sparktune::sim::{make_workload, Family};
use sparktune::space::SearchSpace;
use sparktune::store::Store;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let space = SearchSpace::spark_default();

    for seed in 0..3 {
        let w = make_workload(seed, Family::ALL[seed as usize % 3]);
        let record = exploration_task(&space, &w, &format!("job-{seed}"), 25, seed).unwrap();
        let id = store.save_task(&record).unwrap();
        println!("saved {id}: {} observations", record.observations().len());
    }
    store.save_similarity(&train_similarity(&training_tasks(&space, 8, 0.05, 0).unwrap(), 0).unwrap()).unwrap();

    let (history, skipped) = store.load_history().unwrap();
    println!("reloaded {} tasks ({} skipped), similarity model: {}", history.len(), skipped.len(), store.load_similarity().unwrap().is_some());
    for t in &history {
        println!("{}: meta[total_memory] = {:.2}", t.task_id(), t.meta().as_slice()[7]);
    }
}
