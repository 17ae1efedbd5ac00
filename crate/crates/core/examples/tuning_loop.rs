//! A complete suggest/evaluate/observe loop against the simulator with the
//! default 5 + 5 + 45 budget.
//!
//! cargo run -p sparktune --example tuning_loop

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparktune::gp::Observation;
use sparktune::sim::{make_workload, Family};
use sparktune::space::SearchSpace;
use sparktune::tuner::{Phase, TaskSpec, Tuner};

fn main() {
    let space = SearchSpace::spark_default();
    let w = make_workload(11, Family::MapHeavy);
    let ctx = w.base_context();
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    let mut spec = TaskSpec::new("nightly-etl", space.clone());
    spec.seed = 11;
    let mut tuner = Tuner::new(spec).unwrap();

    let mut best = f64::INFINITY;
    while tuner.state().phase != Phase::Finished {
        let s = tuner.suggest().unwrap();
        let r = w.execute(&space, &s.config, &ctx, &mut rng).unwrap();
        best = best.min(r.objective);
        let p_e = s.arbitration.map(|a| format!("p_e {:.2}", a.expert_probability)).unwrap_or_default();
        println!("{:>3} {:<8?} {:<14?} {:>9.3} {:>9.3} {p_e}", s.index, s.phase, s.rationale, r.objective, best);
        tuner
            .observe(Observation { config: s.config, objective: r.objective, context: r.context, metrics: r.metrics })
            .unwrap();
    }
    let (_, y) = tuner.best_observed().unwrap();
    let (_, opt) = w.true_optimum(&space, &ctx).unwrap();
    println!("best {y:.3} GB·h, simulator optimum {opt:.3}");
}
