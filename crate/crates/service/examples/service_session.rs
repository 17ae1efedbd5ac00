//! The suggest/observe protocol the HTTP endpoints expose, driven in-process
//! against the simulator. `sparktune serve` puts the same calls behind
//! POST /tasks, GET /tasks/{id}/suggestion and POST /tasks/{id}/observation.
//!
//! cargo run -p sparktune-service --example service_session

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparktune::sim::{make_workload, Family};
use sparktune::space::SearchSpace;
use sparktune_service::api::{CreateTaskRequest, ObservationRequest};
use sparktune_service::{Settings, TuningService};

fn main() {
    let service = TuningService::in_memory(Settings::default());
    let req: CreateTaskRequest = serde_json::from_str(r#"{"seed": 3, "budget": {"defaults": 5, "init": 5, "search": 10}}"#).unwrap();
    let task = service.create(req).unwrap();
    println!("created {}", task.task_id);

    let space = SearchSpace::spark_default();
    let w = make_workload(3, Family::Mixed);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    loop {
        let s = match service.suggestion(&task.task_id) {
            Ok(s) => s,
            // 409 once the budget is spent
            Err(e) if e.status() == 409 => break,
            Err(e) => panic!("{e}"),
        };
        let r = w.execute(&space, &s.config, &w.base_context(), &mut rng).unwrap();
        service
            .observe(
                &task.task_id,
                ObservationRequest {
                    config: s.config,
                    objective: r.objective,
                    runtime_s: Some(r.runtime_s),
                    avg_memory_gb: Some(r.avg_memory_gb),
                    metrics: r.metrics,
                    context: Some(r.context),
                },
            )
            .unwrap();
    }

    let status = service.status(&task.task_id).unwrap();
    println!("{:?} after {} evaluations", status.status, status.iterations);
    println!("best {:.3} GB·h, {:.1}% of the default cost", status.best_objective.unwrap(), 100.0 * status.improvement_ratio.unwrap());
    println!("{}", serde_json::to_string_pretty(&status.arbitration.last()).unwrap());
}
