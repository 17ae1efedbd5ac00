//! Strategy comparisons on simulated workload suites.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};
use thiserror::Error;

use crate::gp::Observation;
use crate::sim::{make_workload, siblings, ExecutionResult, Family, SimError, SuiteManifest, SyntheticWorkload};
use crate::space::SearchSpace;
use crate::transfer::{build_training_set, compute_meta_feature, GbdtParams, SimilarityModel, TaskRecord, TransferError, DEFAULT_PROBE_SIZE, HISTORY_LEN};
use crate::tuner::{fixed_defaults, Budget, Rationale, Strategy, Suggestion, TaskSpec, Tuner, TunerError};

pub const STRATEGIES: [&str; 5] = ["rover", "vanilla_bo", "rules_only", "transfer_all", "transfer_one"];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("nothing to run: {0}")]
    Empty(&'static str),
    #[error(transparent)]
    Tuner(#[from] TunerError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
}

/// How history tasks are produced for transfer strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryPlan {
    /// Similar history tasks generated around each workload.
    pub siblings: usize,
    /// Perturbation of the sibling optima in encoded space.
    pub radius: f64,
    pub observations: usize,
    /// Synthetic tasks used to train the similarity model.
    pub training_tasks: usize,
}

impl Default for HistoryPlan {
    fn default() -> Self {
        HistoryPlan { siblings: 3, radius: 0.05, observations: HISTORY_LEN, training_tasks: 120 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkManifest {
    #[serde(flatten)]
    pub suite: SuiteManifest,
    /// Iterations after the default evaluations.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub history: Option<HistoryPlan>,
}

fn default_iterations() -> usize {
    Budget::default().init + Budget::default().search
}

impl BenchmarkManifest {
    pub fn new(suite: SuiteManifest) -> Self {
        BenchmarkManifest { suite, iterations: default_iterations(), history: None }
    }
}

/// Best-so-far objective of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub strategy: String,
    pub workload: u64,
    pub family: Family,
    pub seed: u64,
    /// Entry `k` is the best objective over the defaults and the first `k`
    /// later iterations.
    pub best: Vec<f64>,
    /// Rationale of every post-default iteration.
    pub rationales: Vec<Rationale>,
}

impl Curve {
    pub fn best_at(&self, iteration: usize) -> f64 {
        self.best[iteration.min(self.best.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub curves: Vec<Curve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub runs: usize,
    /// Mean best-so-far per iteration.
    pub mean_best: Vec<f64>,
}

impl BenchmarkResult {
    /// Long-format table: one row per curve point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy,workload,family,seed,iteration,best,rationale\n");
        for c in &self.curves {
            for (k, b) in c.best.iter().enumerate() {
                let rationale = if k == 0 {
                    "default".to_string()
                } else {
                    serde_json::to_value(c.rationales[k - 1]).unwrap().as_str().unwrap().to_string()
                };
                let family = serde_json::to_value(c.family).unwrap().as_str().unwrap().to_string();
                writeln!(out, "{},{},{},{},{},{},{}", c.strategy, c.workload, family, c.seed, k, b, rationale).unwrap();
            }
        }
        out
    }

    pub fn summary(&self) -> Vec<StrategySummary> {
        let mut by: BTreeMap<&str, Vec<&Curve>> = BTreeMap::new();
        for c in &self.curves {
            by.entry(&c.strategy).or_default().push(c);
        }
        by.into_iter()
            .map(|(s, cs)| {
                let len = cs.iter().map(|c| c.best.len()).min().unwrap_or(0);
                let mean_best = (0..len).map(|k| cs.iter().map(|c| c.best[k]).sum::<f64>() / cs.len() as f64).collect();
                StrategySummary { strategy: s.to_string(), runs: cs.len(), mean_best }
            })
            .collect()
    }

    pub fn curves_for<'a>(&'a self, strategy: &'a str) -> impl Iterator<Item = &'a Curve> + 'a {
        self.curves.iter().filter(move |c| c.strategy == strategy)
    }
}

/// Validates strategy names before any run starts.
pub fn parse_strategies<S: AsRef<str>>(names: &[S]) -> Result<Vec<(String, Strategy)>, BenchError> {
    names
        .iter()
        .map(|n| {
            let n = n.as_ref().trim();
            Strategy::by_name(n).map(|s| (n.to_string(), s)).ok_or_else(|| BenchError::UnknownStrategy(n.to_string()))
        })
        .collect()
}

/// Runs `steps` suggest/evaluate/observe cycles; contexts come from `context`
/// called with the overall evaluation index.
pub fn drive(
    tuner: &mut Tuner,
    workload: &SyntheticWorkload,
    steps: usize,
    rng: &mut ChaCha8Rng,
    context: impl Fn(usize) -> crate::gp::ContextVector,
) -> Result<Vec<(Suggestion, ExecutionResult)>, BenchError> {
    let space = tuner.spec().space.clone();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let s = tuner.suggest()?;
        let ctx = context(tuner.state().observations.len());
        let r = workload.execute(&space, &s.config, &ctx, rng)?;
        tuner.observe(Observation { config: s.config.clone(), objective: r.objective, context: r.context.clone(), metrics: r.metrics.clone() })?;
        out.push((s, r));
    }
    Ok(out)
}

fn budget_for(iterations: usize) -> Budget {
    let d = Budget::default();
    Budget { defaults: d.defaults, init: iterations.min(d.init), search: iterations.saturating_sub(d.init) }
}

/// A finished Rover run on `workload`, kept as a history task.
pub fn history_task(space: &SearchSpace, workload: &SyntheticWorkload, task_id: &str, observations: usize, seed: u64) -> Result<TaskRecord, BenchError> {
    let mut spec = TaskSpec::new(task_id, space.clone());
    spec.seed = seed;
    spec.strategy = Strategy { transfer: crate::tuner::TransferMode::Off, ..Strategy::rover() };
    spec.budget = budget_for(observations.saturating_sub(Budget::default().defaults));
    let mut tuner = Tuner::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ workload.seed.rotate_left(17));
    let ctx = workload.base_context();
    drive(&mut tuner, workload, observations, &mut rng, |_| ctx.clone())?;
    tuner.to_record().ok_or(BenchError::Empty("history run too short"))
}

/// The defaults followed by uniform samples: a space-filling log whose
/// surrogate describes the whole surface rather than one basin.
pub fn exploration_task(space: &SearchSpace, workload: &SyntheticWorkload, task_id: &str, observations: usize, seed: u64) -> Result<TaskRecord, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ workload.seed.rotate_left(29));
    let ctx = workload.base_context();
    let defaults = fixed_defaults(space);
    let mut obs = Vec::with_capacity(observations);
    for k in 0..observations {
        let c = match defaults.get(k) {
            Some(c) => c.clone(),
            None => space.sample_uniform(&mut rng),
        };
        let r = workload.execute(space, &c, &ctx, &mut rng)?;
        obs.push(Observation { config: c, objective: r.objective, context: r.context, metrics: r.metrics });
    }
    let meta = compute_meta_feature(&obs[..defaults.len().min(obs.len())])?;
    Ok(TaskRecord::new(task_id, meta, obs, space)?)
}

/// Synthetic training tasks in pairs of close siblings, so the training set
/// covers both similar and dissimilar pairs.
pub fn training_tasks(space: &SearchSpace, n: usize, radius: f64, seed: u64) -> Result<Vec<TaskRecord>, BenchError> {
    let mut out = Vec::with_capacity(n);
    let mut k = 0u64;
    while out.len() < n {
        let ws = seed.wrapping_mul(0x9e37_79b9).wrapping_add(k);
        let base = make_workload(ws, Family::ALL[(k % 3) as usize]);
        let sib = siblings(&base, 1, radius, ws).remove(0);
        for (i, w) in [base, sib].iter().enumerate().take(n - out.len()) {
            out.push(exploration_task(space, w, &format!("train-{k}-{i}"), HISTORY_LEN, ws + i as u64)?);
        }
        k += 1;
    }
    Ok(out)
}

pub fn train_similarity(tasks: &[TaskRecord], seed: u64) -> Result<SimilarityModel, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triples = build_training_set(tasks, DEFAULT_PROBE_SIZE, &mut rng)?;
    Ok(SimilarityModel::train(&triples, GbdtParams::default())?)
}

/// One run of `strategy` on `workload`; the curve has `iterations + 1` points.
#[allow(clippy::too_many_arguments)]
pub fn run_curve(
    space: &SearchSpace,
    manifest: &SuiteManifest,
    workload: &SyntheticWorkload,
    name: &str,
    strategy: Strategy,
    seed: u64,
    iterations: usize,
    history: Vec<TaskRecord>,
    similarity: Option<SimilarityModel>,
) -> Result<Curve, BenchError> {
    let mut spec = TaskSpec::new(format!("{name}-{}-{seed}", workload.seed), space.clone());
    spec.seed = seed;
    spec.strategy = strategy;
    spec.budget = budget_for(iterations);
    let defaults = spec.budget.defaults;
    let mut tuner = Tuner::with_history(spec, history, similarity)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ workload.seed);
    let steps = drive(&mut tuner, workload, defaults + iterations, &mut rng, |i| manifest.context_at(workload, i))?;

    let mut best = Vec::with_capacity(iterations + 1);
    let mut b = f64::INFINITY;
    for (k, (_, r)) in steps.iter().enumerate() {
        b = b.min(r.objective);
        if k + 1 >= defaults {
            best.push(b);
        }
    }
    let rationales = steps[defaults..].iter().map(|(s, _)| s.rationale).collect();
    Ok(Curve { strategy: name.to_string(), workload: workload.seed, family: workload.family, seed, best, rationales })
}

/// Every (workload, strategy, seed) curve of the manifest.
pub fn run_benchmark<S: AsRef<str>>(space: &SearchSpace, manifest: &BenchmarkManifest, strategies: &[S], seeds: &[u64]) -> Result<BenchmarkResult, BenchError> {
    let strategies = parse_strategies(strategies)?;
    if strategies.is_empty() {
        return Err(BenchError::Empty("no strategies"));
    }
    if seeds.is_empty() {
        return Err(BenchError::Empty("no seeds"));
    }
    let needs_history = strategies.iter().any(|(_, s)| s.transfer != crate::tuner::TransferMode::Off);
    let plan = manifest.history.filter(|_| needs_history);
    let similarity = match plan {
        Some(p) if p.training_tasks >= 2 => Some(train_similarity(&training_tasks(space, p.training_tasks, p.radius, 0x51_u64)?, 0x51)?),
        _ => None,
    };

    let mut curves = Vec::new();
    for w in manifest.suite.workloads() {
        let history = match plan {
            Some(p) => siblings(&w, p.siblings, p.radius, w.seed ^ 0x5eed)
                .iter()
                .enumerate()
                .map(|(i, s)| history_task(space, s, &format!("history-{}-{i}", w.seed), p.observations, s.seed))
                .collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        for (name, strategy) in &strategies {
            for &seed in seeds {
                curves.push(run_curve(space, &manifest.suite, &w, name, *strategy, seed, manifest.iterations, history.clone(), similarity.clone())?);
            }
        }
    }
    Ok(BenchmarkResult { curves })
}

/// One-sided paired sign test: probability of at least `wins` successes in
/// `wins + losses` fair coin flips. Ties are dropped by the caller.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 || wins == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n as u64).expect("valid binomial");
    1.0 - b.cdf(wins as u64 - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_test_fixtures() {
        // 2^-5
        assert!((sign_test(5, 0) - 1.0 / 32.0).abs() < 1e-12);
        // P(X >= 8 | n = 10) = 56 / 1024
        assert!((sign_test(8, 2) - 56.0 / 1024.0).abs() < 1e-12);
        assert_eq!(sign_test(0, 4), 1.0);
        assert_eq!(sign_test(0, 0), 1.0);
    }

    #[test]
    fn unknown_strategy_fails_before_running() {
        let m = BenchmarkManifest::new(SuiteManifest::new(vec![1]));
        let err = run_benchmark(&SearchSpace::spark_default(), &m, &["rover", "bogus"], &[0]).unwrap_err();
        assert!(matches!(err, BenchError::UnknownStrategy(s) if s == "bogus"));
    }

    #[test]
    fn curve_counts_and_shape() {
        let mut m = BenchmarkManifest::new(SuiteManifest::new(vec![1, 2, 3, 4, 5]));
        m.iterations = 2;
        let r = run_benchmark(&SearchSpace::spark_default(), &m, &["rover", "vanilla_bo"], &[0, 1, 2]).unwrap();
        assert_eq!(r.curves.len(), 30);
        for c in &r.curves {
            assert_eq!(c.best.len(), 3);
            assert!(c.best.windows(2).all(|w| w[1] <= w[0]));
        }
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 1 + 30 * 3);
        let s = r.summary();
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|x| x.runs == 15));
    }

    #[test]
    fn rules_only_rationales_are_expert() {
        let mut m = BenchmarkManifest::new(SuiteManifest::new(vec![7]));
        m.iterations = 8;
        let r = run_benchmark(&SearchSpace::spark_default(), &m, &["rules_only"], &[3]).unwrap();
        for c in &r.curves {
            assert!(c.rationales.iter().all(|x| matches!(x, Rationale::ExpertInit | Rationale::ExpertRules)));
        }
    }

    #[test]
    fn reruns_are_byte_identical() {
        let mut m = BenchmarkManifest::new(SuiteManifest::new(vec![2, 9]));
        m.iterations = 7;
        m.suite.drift_per_iteration = 0.5;
        let go = || run_benchmark(&SearchSpace::spark_default(), &m, &["rover", "vanilla_bo"], &[4]).unwrap().to_csv();
        assert_eq!(go(), go());
    }

    #[test]
    fn manifest_documents() {
        let m: BenchmarkManifest = serde_json::from_str(r#"{"seeds":[1,2],"families":["mixed"]}"#).unwrap();
        assert_eq!(m.iterations, 50);
        assert!(m.history.is_none());
        let back: BenchmarkManifest = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
