//! Expected improvement and candidate-pool acquisition optimization.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::gp::{ContextVector, GpError, GpSurrogate, Observation};
use crate::space::{Configuration, SearchSpace};

pub const DEFAULT_RANDOM_CANDIDATES: usize = 1000;
pub const DEFAULT_MUTATION_CANDIDATES: usize = 50;
/// Number of best observations that seed mutation candidates.
pub const MUTATION_PARENTS: usize = 10;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Closed-form EI for minimization against incumbent `best`.
pub fn expected_improvement(mean: f64, variance: f64, best: f64) -> f64 {
    let sigma = variance.max(0.0).sqrt();
    let gap = best - mean;
    if sigma == 0.0 {
        return gap.max(0.0);
    }
    let z = gap / sigma;
    (gap * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Random,
    Mutation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    pub configs: Vec<Configuration>,
    pub provenance: Vec<Provenance>,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn from_configs(configs: Vec<Configuration>) -> Self {
        let provenance = vec![Provenance::Random; configs.len()];
        CandidatePool { configs, provenance }
    }
}

/// Indices of the `k` lowest-objective observations, ties by order.
pub fn top_observations(observations: &[Observation], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..observations.len()).collect();
    idx.sort_by(|&a, &b| observations[a].objective.total_cmp(&observations[b].objective).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// `n_random` uniform samples followed by `n_mutations` single-dimension
/// mutations of the best observed configurations, cycling through the top 10.
pub fn generate_candidates<R: Rng + ?Sized>(
    space: &SearchSpace,
    observations: &[Observation],
    n_random: usize,
    n_mutations: usize,
    rng: &mut R,
) -> CandidatePool {
    let parents = top_observations(observations, MUTATION_PARENTS);
    let (n_random, n_mutations) = if parents.is_empty() {
        (n_random + n_mutations, 0)
    } else {
        (n_random, n_mutations)
    };
    let mut configs = Vec::with_capacity(n_random + n_mutations);
    let mut provenance = Vec::with_capacity(n_random + n_mutations);
    for _ in 0..n_random {
        configs.push(space.sample_uniform(rng));
        provenance.push(Provenance::Random);
    }
    for i in 0..n_mutations {
        let parent = &observations[parents[i % parents.len()]].config;
        configs.push(space.mutate(parent, rng));
        provenance.push(Provenance::Mutation);
    }
    CandidatePool { configs, provenance }
}

/// Per-candidate `(mean, variance, EI)` under one surrogate.
pub fn score_pool(
    model: &GpSurrogate,
    pool: &CandidatePool,
    best: f64,
    context: &ContextVector,
) -> Result<Vec<(f64, f64, f64)>, GpError> {
    pool.configs
        .iter()
        .map(|c| {
            let (m, v) = model.predict(c, context)?;
            Ok((m, v, expected_improvement(m, v, best)))
        })
        .collect()
}

/// Index of the best candidate: highest EI, then lowest mean, then earliest.
pub fn argmax_ei(scores: &[(f64, f64, f64)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let cur = &scores[b];
                if s.2 > cur.2 || (s.2 == cur.2 && s.0 < cur.0) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

pub fn select_by_ei(
    model: &GpSurrogate,
    pool: &CandidatePool,
    best_observed: f64,
    context: &ContextVector,
) -> Result<Configuration, GpError> {
    let scores = score_pool(model, pool, best_observed, context)?;
    let i = argmax_ei(&scores).ok_or(GpError::TooFewObservations { needed: 1, got: 0 })?;
    Ok(pool.configs[i].clone())
}
