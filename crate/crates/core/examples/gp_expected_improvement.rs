//! Fit the Matérn-5/2 surrogate on a handful of simulated runs and rank
//! random candidates by expected improvement.
//!
//! cargo run -p sparktune --example gp_expected_improvement

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparktune::acquisition::expected_improvement;
use sparktune::gp::{GpSurrogate, Observation};
use sparktune::sim::{make_workload, Family};
use sparktune::space::SearchSpace;

fn main() {
    let space = SearchSpace::spark_default();
    let workload = make_workload(42, Family::Mixed);
    let ctx = workload.base_context();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let observations: Vec<Observation> = (0..15)
        .map(|_| {
            let config = space.sample_uniform(&mut rng);
            let r = workload.execute(&space, &config, &ctx, &mut rng).unwrap();
            Observation { config, objective: r.objective, context: r.context, metrics: r.metrics }
        })
        .collect();
    let best = observations.iter().map(|o| o.objective).fold(f64::INFINITY, f64::min);

    let gp = GpSurrogate::fit(&observations, &space).unwrap();
    let k = gp.kernel();
    println!("signal variance {:.3}, noise variance {:.2e}", k.signal_variance, k.noise_variance);
    let g = gp.generalization().unwrap();
    println!("cross-validated concordance {:.1} pairs, w_s = {:.3}", g.concordant, g.weight);

    let mut scored: Vec<_> = (0..500)
        .map(|_| {
            let c = space.sample_uniform(&mut rng);
            let (mean, var) = gp.predict(&c, &ctx).unwrap();
            (expected_improvement(mean, var, best), mean, c)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    println!("best observed {best:.4} GB·h");
    for (ei, mean, c) in scored.iter().take(3) {
        let truth = workload.expected_objective(&space, c, &ctx).unwrap();
        println!("EI {ei:.4}  predicted {mean:.4}  actual {truth:.4}");
    }
}
