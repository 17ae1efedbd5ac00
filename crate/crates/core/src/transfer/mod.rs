//! Controlled history transfer: meta-features, concordance-based task
//! similarity, the similarity regressor, task filtering, and the
//! rank-combination ensemble.

pub mod gbdt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{expected_improvement, CandidatePool};
use crate::concordance::{concordance_ratio, concordant_pairs, pair_count};
use crate::gp::{ContextVector, GpError, GpSurrogate, Observation};
use crate::metrics::METRIC_COUNT;
use crate::space::{Configuration, SearchSpace};

pub use gbdt::{Gbdt, GbdtParams};

pub const DEFAULT_TAU0: f64 = 0.1;
pub const DEFAULT_THRESHOLD: f64 = 0.65;
pub const DEFAULT_TOP_K: usize = 5;
pub const DEFAULT_PROBE_SIZE: usize = 50;
/// Observations of a finished task retained as history.
pub const HISTORY_LEN: usize = 25;

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("meta-feature needs at least one default run")]
    NoDefaultRuns,
    #[error("meta-feature must have {METRIC_COUNT} finite entries")]
    BadMetaFeature,
    #[error("need at least {needed} {what}, got {got}")]
    TooFew { what: &'static str, needed: usize, got: usize },
    #[error("surrogate of task `{task}` was not trained on its stored observations")]
    StaleSurrogate { task: String },
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// Runtime metrics averaged over the default-configuration runs of a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MetaFeature {
    vector: [f64; METRIC_COUNT],
}

impl MetaFeature {
    pub fn new(vector: [f64; METRIC_COUNT]) -> Result<Self, TransferError> {
        if vector.iter().all(|v| v.is_finite()) {
            Ok(MetaFeature { vector })
        } else {
            Err(TransferError::BadMetaFeature)
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.vector
    }
}

impl TryFrom<Vec<f64>> for MetaFeature {
    type Error = TransferError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        let arr: [f64; METRIC_COUNT] = v.try_into().map_err(|_| TransferError::BadMetaFeature)?;
        MetaFeature::new(arr)
    }
}

impl From<MetaFeature> for Vec<f64> {
    fn from(m: MetaFeature) -> Self {
        m.vector.to_vec()
    }
}

pub fn compute_meta_feature(default_runs: &[Observation]) -> Result<MetaFeature, TransferError> {
    if default_runs.is_empty() {
        return Err(TransferError::NoDefaultRuns);
    }
    let mut sum = [0.0; METRIC_COUNT];
    for run in default_runs {
        for (s, v) in sum.iter_mut().zip(run.metrics.as_array()) {
            *s += v;
        }
    }
    let n = default_runs.len() as f64;
    MetaFeature::new(sum.map(|s| s / n))
}

/// A finished task kept for transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TaskRecordDoc", into = "TaskRecordDoc")]
pub struct TaskRecord {
    task_id: String,
    meta: MetaFeature,
    observations: Vec<Observation>,
    surrogate: GpSurrogate,
}

#[derive(Serialize, Deserialize)]
struct TaskRecordDoc {
    task_id: String,
    meta: MetaFeature,
    observations: Vec<Observation>,
    surrogate: GpSurrogate,
}

impl TryFrom<TaskRecordDoc> for TaskRecord {
    type Error = TransferError;

    fn try_from(d: TaskRecordDoc) -> Result<Self, Self::Error> {
        let raw: Vec<f64> = d.surrogate.targets().iter().map(|t| t * d.surrogate.target_std() + d.surrogate.target_mean()).collect();
        let stored: Vec<f64> = d.observations.iter().map(|o| o.objective).collect();
        let same = raw.len() == stored.len()
            && raw.iter().zip(&stored).all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        if !same {
            return Err(TransferError::StaleSurrogate { task: d.task_id });
        }
        Ok(TaskRecord { task_id: d.task_id, meta: d.meta, observations: d.observations, surrogate: d.surrogate })
    }
}

impl From<TaskRecord> for TaskRecordDoc {
    fn from(r: TaskRecord) -> Self {
        TaskRecordDoc { task_id: r.task_id, meta: r.meta, observations: r.observations, surrogate: r.surrogate }
    }
}

impl TaskRecord {
    /// Keeps the first [`HISTORY_LEN`] observations and fits the surrogate
    /// on exactly those.
    pub fn new(task_id: impl Into<String>, meta: MetaFeature, mut observations: Vec<Observation>, space: &SearchSpace) -> Result<Self, TransferError> {
        observations.truncate(HISTORY_LEN);
        if observations.len() < 2 {
            return Err(TransferError::TooFew { what: "observations", needed: 2, got: observations.len() });
        }
        let surrogate = GpSurrogate::fit(&observations, space)?;
        Ok(TaskRecord { task_id: task_id.into(), meta, observations, surrogate })
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn meta(&self) -> &MetaFeature {
        &self.meta
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn surrogate(&self) -> &GpSurrogate {
        &self.surrogate
    }

    pub fn space(&self) -> &SearchSpace {
        self.surrogate.space()
    }

    /// Context at which the task's surrogate is probed: its last observed one.
    pub fn reference_context(&self) -> &ContextVector {
        &self.observations.last().expect("at least two observations").context
    }
}

fn predictions(model: &GpSurrogate, probe: &[Configuration], context: &ContextVector) -> Result<Vec<f64>, GpError> {
    probe.iter().map(|c| model.predict_mean(c, context)).collect()
}

/// Fraction of probe pairs that both surrogates order the same way.
pub fn pairwise_similarity(
    m_i: &GpSurrogate,
    m_j: &GpSurrogate,
    probe: &[Configuration],
    context: &ContextVector,
) -> Result<f64, TransferError> {
    if probe.len() < 2 {
        return Err(TransferError::TooFew { what: "probe configurations", needed: 2, got: probe.len() });
    }
    Ok(concordance_ratio(&predictions(m_i, probe, context)?, &predictions(m_j, probe, context)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTriple {
    pub a: MetaFeature,
    pub b: MetaFeature,
    pub similarity: f64,
}

/// Both orderings of every task pair, labelled with surrogate similarity on
/// one shared probe set.
pub fn build_training_set<R: Rng + ?Sized>(
    history: &[TaskRecord],
    probe_size: usize,
    rng: &mut R,
) -> Result<Vec<SimilarityTriple>, TransferError> {
    if history.len() < 2 {
        return Err(TransferError::TooFew { what: "tasks", needed: 2, got: history.len() });
    }
    if probe_size < 2 {
        return Err(TransferError::TooFew { what: "probe configurations", needed: 2, got: probe_size });
    }
    let space = history[0].space();
    let probe: Vec<Configuration> = (0..probe_size).map(|_| space.sample_uniform(rng)).collect();
    let preds: Vec<Vec<f64>> = history
        .iter()
        .map(|t| predictions(t.surrogate(), &probe, t.reference_context()))
        .collect::<Result<_, _>>()?;
    let n = history.len();
    let mut out = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (lo, hi) = (i.min(j), i.max(j));
            out.push(SimilarityTriple {
                a: history[i].meta.clone(),
                b: history[j].meta.clone(),
                similarity: concordance_ratio(&preds[lo], &preds[hi]),
            });
        }
    }
    Ok(out)
}

/// Tree-ensemble regressor from a pair of meta-features to task similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityModel {
    pub model: Gbdt,
}

/// Regressor input: both meta-features and their absolute difference on a
/// signed log scale, which makes the difference insensitive to data volume.
pub fn pair_features(a: &MetaFeature, b: &MetaFeature) -> Vec<f64> {
    let mut x = Vec::with_capacity(3 * METRIC_COUNT);
    x.extend_from_slice(a.as_slice());
    x.extend_from_slice(b.as_slice());
    x.extend(a.as_slice().iter().zip(b.as_slice()).map(|(p, q)| (signed_log(*p) - signed_log(*q)).abs()));
    x
}

fn signed_log(v: f64) -> f64 {
    v.signum() * v.abs().ln_1p()
}

impl SimilarityModel {
    pub fn train(triples: &[SimilarityTriple], params: GbdtParams) -> Result<Self, TransferError> {
        if triples.len() < 2 {
            return Err(TransferError::TooFew { what: "training triples", needed: 2, got: triples.len() });
        }
        let x: Vec<Vec<f64>> = triples.iter().map(|t| pair_features(&t.a, &t.b)).collect();
        let y: Vec<f64> = triples.iter().map(|t| t.similarity).collect();
        Ok(SimilarityModel { model: Gbdt::fit(&x, &y, params) })
    }

    pub fn predict(&self, a: &MetaFeature, b: &MetaFeature) -> f64 {
        self.model.predict(&pair_features(a, b)).clamp(0.0, 1.0)
    }

    pub fn mse(&self, triples: &[SimilarityTriple]) -> f64 {
        if triples.is_empty() {
            return 0.0;
        }
        triples.iter().map(|t| (self.predict(&t.a, &t.b) - t.similarity).powi(2)).sum::<f64>() / triples.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredTask<'a> {
    pub record: &'a TaskRecord,
    pub similarity: f64,
}

/// History tasks predicted at least `threshold`-similar, most similar first,
/// at most `top_k`. Empty means transfer is disabled.
pub fn filter_tasks<'a>(
    model: &SimilarityModel,
    new_meta: &MetaFeature,
    history: &'a [TaskRecord],
    threshold: f64,
    top_k: usize,
) -> Vec<ScoredTask<'a>> {
    let mut scored: Vec<ScoredTask<'a>> = history
        .iter()
        .map(|record| ScoredTask { record, similarity: model.predict(new_meta, &record.meta) })
        .filter(|s| s.similarity >= threshold)
        .collect();
    scored.sort_by(|a, b| b.similarity.total_cmp(&a.similarity));
    scored.truncate(top_k);
    scored
}

/// `τ₀ / (1 + ln T)`.
pub fn temperature(tau0: f64, iteration: usize) -> f64 {
    tau0 / (1.0 + (iteration.max(1) as f64).ln())
}

pub fn softmax(scores: &[f64], temperature: f64) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| ((s - max) / temperature).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Predictions of each member at the observed configurations: history
/// members predict directly, the current-task member (last) contributes its
/// cross-validated means.
pub fn member_predictions(
    history: &[&GpSurrogate],
    current: &GpSurrogate,
    observations: &[Observation],
) -> Result<Vec<Vec<f64>>, TransferError> {
    let mut out = Vec::with_capacity(history.len() + 1);
    for m in history {
        out.push(observations.iter().map(|o| m.predict_mean(&o.config, &o.context)).collect::<Result<Vec<_>, _>>()?);
    }
    out.push(current.generalization()?.held_out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskWeights {
    /// One weight per member, current task last.
    pub weights: Vec<f64>,
    /// Concordant pair count `G(j)` per member.
    pub pair_counts: Vec<f64>,
    pub temperature: f64,
}

/// Weights from already computed member predictions.
pub fn weights_from_predictions(
    predictions: &[Vec<f64>],
    objectives: &[f64],
    iteration: usize,
    tau0: f64,
) -> Result<TaskWeights, TransferError> {
    if objectives.len() < 2 {
        return Err(TransferError::TooFew { what: "observations", needed: 2, got: objectives.len() });
    }
    let pairs = pair_count(objectives.len());
    let pair_counts: Vec<f64> = predictions.iter().map(|p| concordant_pairs(p, objectives)).collect();
    let normalized: Vec<f64> = pair_counts.iter().map(|g| g / pairs).collect();
    let tau = temperature(tau0, iteration);
    Ok(TaskWeights { weights: softmax(&normalized, tau), pair_counts, temperature: tau })
}

pub fn task_weights(
    history: &[&GpSurrogate],
    current: &GpSurrogate,
    observations: &[Observation],
    iteration: usize,
    tau0: f64,
) -> Result<TaskWeights, TransferError> {
    if observations.len() < 2 {
        return Err(TransferError::TooFew { what: "observations", needed: 2, got: observations.len() });
    }
    let preds = member_predictions(history, current, observations)?;
    let y: Vec<f64> = observations.iter().map(|o| o.objective).collect();
    weights_from_predictions(&preds, &y, iteration, tau0)
}

/// `Σ_j w_j · 2 G(j) / (|D| (|D| - 1))`.
pub fn ensemble_generalization_weight(weights: &[f64], pair_counts: &[f64], n_observations: usize) -> f64 {
    let pairs = pair_count(n_observations);
    if pairs == 0.0 {
        return 0.0;
    }
    weights.iter().zip(pair_counts).map(|(w, g)| w * g / pairs).sum::<f64>().clamp(0.0, 1.0)
}

/// History surrogates plus the current-task surrogate with their weights.
#[derive(Debug, Clone)]
pub struct EnsembleSurrogate {
    pub history: Vec<(String, GpSurrogate)>,
    pub current: GpSurrogate,
    pub weights: TaskWeights,
    pub tau0: f64,
}

impl EnsembleSurrogate {
    pub fn build(
        history: Vec<(String, GpSurrogate)>,
        current: GpSurrogate,
        observations: &[Observation],
        iteration: usize,
        tau0: f64,
    ) -> Result<Self, TransferError> {
        let refs: Vec<&GpSurrogate> = history.iter().map(|(_, m)| m).collect();
        let weights = task_weights(&refs, &current, observations, iteration, tau0)?;
        Ok(EnsembleSurrogate { history, current, weights, tau0 })
    }

    pub fn members(&self) -> Vec<&GpSurrogate> {
        self.history.iter().map(|(_, m)| m).chain(std::iter::once(&self.current)).collect()
    }

    pub fn generalization_weight(&self, n_observations: usize) -> f64 {
        ensemble_generalization_weight(&self.weights.weights, &self.weights.pair_counts, n_observations)
    }
}

/// Rank positions (1 = largest) with ties sharing their average rank.
pub fn descending_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Per-candidate EI of every member, current task last.
pub fn member_ei(
    ensemble: &EnsembleSurrogate,
    pool: &CandidatePool,
    observations: &[Observation],
    context: &ContextVector,
) -> Result<Vec<Vec<f64>>, TransferError> {
    let best_observed = observations.iter().map(|o| o.objective).fold(f64::INFINITY, f64::min);
    let mut out = Vec::new();
    for (k, m) in ensemble.members().into_iter().enumerate() {
        let incumbent = if k == ensemble.history.len() {
            best_observed
        } else {
            observations
                .iter()
                .map(|o| m.predict_mean(&o.config, &o.context))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min)
        };
        let ei = pool
            .configs
            .iter()
            .map(|c| {
                let (mean, var) = m.predict(c, context)?;
                Ok(expected_improvement(mean, var, incumbent))
            })
            .collect::<Result<Vec<_>, GpError>>()?;
        out.push(ei);
    }
    Ok(out)
}

/// `CR(x) = Σ_j w_j R_j(x)` from per-member EI values.
pub fn combined_rank_from_ei(member_ei: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let n = member_ei.first().map_or(0, Vec::len);
    let mut cr = vec![0.0; n];
    for (ei, w) in member_ei.iter().zip(weights) {
        for (c, r) in cr.iter_mut().zip(descending_ranks(ei)) {
            *c += w * r;
        }
    }
    cr
}

pub fn combined_rank(
    ensemble: &EnsembleSurrogate,
    pool: &CandidatePool,
    observations: &[Observation],
    context: &ContextVector,
) -> Result<Vec<f64>, TransferError> {
    let ei = member_ei(ensemble, pool, observations, context)?;
    Ok(combined_rank_from_ei(&ei, &ensemble.weights.weights))
}

/// Index of the lowest combined rank; ties go to the better current-task
/// rank, then to pool order.
pub fn select_combined(cr: &[f64], current_ranks: &[f64]) -> Option<usize> {
    (0..cr.len()).min_by(|&a, &b| {
        cr[a].total_cmp(&cr[b]).then(current_ranks[a].total_cmp(&current_ranks[b])).then(a.cmp(&b))
    })
}

/// Ensemble suggestion: the pool candidate minimising the combined rank.
pub fn select_by_combined_rank(
    ensemble: &EnsembleSurrogate,
    pool: &CandidatePool,
    observations: &[Observation],
    context: &ContextVector,
) -> Result<Option<usize>, TransferError> {
    let ei = member_ei(ensemble, pool, observations, context)?;
    let cr = combined_rank_from_ei(&ei, &ensemble.weights.weights);
    let current = descending_ranks(ei.last().expect("current member"));
    Ok(select_combined(&cr, &current))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::tests::{obs, unit_space};
    use crate::gp::KernelParams;
    use crate::metrics::RuntimeMetrics;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive pair enumeration with explicit exclusive-nor, independent
    /// of the concordance module.
    fn brute_concordant(a: &[f64], b: &[f64]) -> f64 {
        let mut f = 0.0;
        for k in 0..a.len() {
            for l in k + 1..a.len() {
                if a[k] == a[l] || b[k] == b[l] {
                    f += 0.5;
                } else if !((a[k] < a[l]) ^ (b[k] < b[l])) {
                    f += 1.0;
                }
            }
        }
        f
    }

    fn fitted(space: &SearchSpace, f: impl Fn(&[f64]) -> f64, n: usize, seed: u64) -> (GpSurrogate, Vec<Observation>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<Observation> = (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..space.len()).map(|_| rng.gen()).collect();
                obs(space, &x, f(&x))
            })
            .collect();
        let kernel = KernelParams::isotropic(space.feature_len() + 1, 1.0, 0.4, 1e-4);
        (GpSurrogate::with_kernel(&data, space, kernel).unwrap(), data)
    }

    fn meta(v: f64) -> MetaFeature {
        MetaFeature::new([v; METRIC_COUNT]).unwrap()
    }

    #[test]
    fn meta_feature_means() {
        let s = unit_space(1);
        let mut a = obs(&s, &[0.1], 1.0);
        let mut b = a.clone();
        let v: [f64; METRIC_COUNT] = std::array::from_fn(|i| i as f64 - 3.0);
        a.metrics = RuntimeMetrics::from_array(v);
        assert_eq!(compute_meta_feature(&[a.clone()]).unwrap().as_slice(), &v);
        b.metrics = RuntimeMetrics::from_array(v.map(|x| -x));
        assert!(compute_meta_feature(&[a, b]).unwrap().as_slice().iter().all(|x| *x == 0.0));
        assert!(matches!(compute_meta_feature(&[]), Err(TransferError::NoDefaultRuns)));
        assert!(MetaFeature::try_from(vec![1.0; 3]).is_err());
    }

    #[test]
    fn similarity_extremes() {
        let s = unit_space(2);
        let (m, _) = fitted(&s, |x| x[0] + 0.5 * x[1], 12, 1);
        let (neg, _) = fitted(&s, |x| -(x[0] + 0.5 * x[1]), 12, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let probe: Vec<Configuration> = (0..10).map(|_| s.sample_uniform(&mut rng)).collect();
        let ctx = ContextVector::new(1.0);
        assert_eq!(pairwise_similarity(&m, &m, &probe, &ctx).unwrap(), 1.0);
        assert_eq!(pairwise_similarity(&m, &neg, &probe, &ctx).unwrap(), 0.0);
        assert!(pairwise_similarity(&m, &m, &probe[..1], &ctx).is_err());
    }

    #[test]
    fn similarity_matches_pair_enumeration() {
        let s = unit_space(3);
        let ctx = ContextVector::new(1.0);
        for seed in 0..50 {
            let (a, _) = fitted(&s, |x| (x[0] - 0.3).powi(2) + x[1], 10, seed);
            let (b, _) = fitted(&s, |x| (x[2] - 0.6).powi(2) + x[1] * x[0], 10, seed + 100);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
            let probe: Vec<Configuration> = (0..10).map(|_| s.sample_uniform(&mut rng)).collect();
            let pa: Vec<f64> = probe.iter().map(|c| a.predict_mean(c, &ctx).unwrap()).collect();
            let pb: Vec<f64> = probe.iter().map(|c| b.predict_mean(c, &ctx).unwrap()).collect();
            let expected = brute_concordant(&pa, &pb) / 45.0;
            assert_eq!(pairwise_similarity(&a, &b, &probe, &ctx).unwrap(), expected);
            assert_eq!(pairwise_similarity(&b, &a, &probe, &ctx).unwrap(), expected);
        }
    }

    fn record(id: &str, s: &SearchSpace, f: impl Fn(&[f64]) -> f64, seed: u64, m: f64) -> TaskRecord {
        let (_, data) = fitted(s, f, 8, seed);
        TaskRecord::new(id, meta(m), data, s).unwrap()
    }

    #[test]
    fn training_set_shape_and_symmetry() {
        let s = unit_space(2);
        let recs: Vec<TaskRecord> = (0..10).map(|i| record(&format!("t{i}"), &s, move |x| x[0] * i as f64 - x[1], i, i as f64)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let triples = build_training_set(&recs, 20, &mut rng).unwrap();
        assert_eq!(triples.len(), 90);
        let two = build_training_set(&recs[..2], 20, &mut rng).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[0].similarity, two[1].similarity);
        for t in &triples {
            let mirror = triples.iter().find(|u| u.a == t.b && u.b == t.a).unwrap();
            assert_eq!(mirror.similarity, t.similarity);
        }
        assert!(build_training_set(&recs[..1], 20, &mut rng).is_err());
    }

    #[test]
    fn task_record_rejects_foreign_surrogate() {
        let s = unit_space(2);
        let a = record("a", &s, |x| x[0], 1, 0.0);
        let b = record("b", &s, |x| x[1] * 3.0, 2, 0.0);
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<TaskRecord>(&json).unwrap(), a);
        let mut doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        doc["surrogate"] = serde_json::to_value(b.surrogate()).unwrap();
        assert!(serde_json::from_value::<TaskRecord>(doc).is_err());
    }

    #[test]
    fn constant_similarity_model() {
        let triples: Vec<SimilarityTriple> =
            (0..30).map(|i| SimilarityTriple { a: meta(i as f64), b: meta(-(i as f64)), similarity: 0.42 }).collect();
        let m = SimilarityModel::train(&triples, GbdtParams::default()).unwrap();
        for v in [-100.0, 0.0, 3.5, 1e6] {
            assert!((m.predict(&meta(v), &meta(2.0)) - 0.42).abs() < 1e-6);
        }
    }

    /// Model whose prediction is a fixed lookup of the first meta-feature
    /// entry of `b`.
    fn lookup_model(sims: &[f64]) -> SimilarityModel {
        let triples: Vec<SimilarityTriple> = sims
            .iter()
            .enumerate()
            .flat_map(|(i, s)| {
                (0..3).map(move |_| SimilarityTriple { a: meta(0.0), b: meta(i as f64), similarity: *s })
            })
            .collect();
        SimilarityModel::train(&triples, GbdtParams { trees: 400, max_depth: 4, learning_rate: 0.5, min_leaf: 1 }).unwrap()
    }

    #[test]
    fn filter_keeps_the_top_five_above_threshold() {
        let s = unit_space(1);
        let sims = [0.9, 0.3, 0.7, 0.95, 0.66, 0.8, 0.2, 0.75];
        let model = lookup_model(&sims);
        let recs: Vec<TaskRecord> =
            (0..8).map(|i| record(&format!("t{i}"), &s, |x| x[0], i as u64, i as f64)).collect();
        let out = filter_tasks(&model, &meta(0.0), &recs, 0.65, 5);
        let ids: Vec<&str> = out.iter().map(|t| t.record.task_id()).collect();
        assert_eq!(ids, ["t3", "t0", "t5", "t7", "t2"]);
        assert!(filter_tasks(&model, &meta(0.0), &[], 0.65, 5).is_empty());

        let low = lookup_model(&[0.2; 8]);
        assert!(filter_tasks(&low, &meta(0.0), &recs, 0.65, 5).is_empty());
    }

    #[test]
    fn temperature_and_softmax() {
        assert_eq!(temperature(0.1, 1), 0.1);
        for t in 1..50 {
            assert!(temperature(0.1, t + 1) < temperature(0.1, t));
        }
        let w = softmax(&[0.3, 0.3, 0.3, 0.3], 0.05);
        assert!(w.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn weights_match_hand_softmax() {
        // 3 members, 6 observations
        let y = [3.0, 1.0, 4.0, 1.5, 5.0, 9.0];
        let preds = vec![
            vec![3.0, 1.0, 4.0, 1.5, 5.0, 9.0],
            vec![9.0, 5.0, 1.5, 4.0, 1.0, 3.0],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        ];
        let tw = weights_from_predictions(&preds, &y, 3, 0.1).unwrap();
        let g: Vec<f64> = preds.iter().map(|p| brute_concordant(p, &y)).collect();
        assert_eq!(tw.pair_counts, g);
        let tau = 0.1 / (1.0 + 3f64.ln());
        let e: Vec<f64> = g.iter().map(|v| (v / 15.0 / tau).exp()).collect();
        let z: f64 = e.iter().sum();
        for (w, ev) in tw.weights.iter().zip(&e) {
            assert!((w - ev / z).abs() < 1e-12);
        }
        assert!((tw.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(weights_from_predictions(&preds, &y[..1], 1, 0.1).is_err());
    }

    #[test]
    fn task_weights_use_cv_for_current_member() {
        let s = unit_space(2);
        let (current, data) = fitted(&s, |x| x[0] - x[1], 8, 4);
        let (hist, _) = fitted(&s, |x| x[0] - x[1], 15, 5);
        let tw = task_weights(&[&hist], &current, &data, 1, 0.1).unwrap();
        let y: Vec<f64> = data.iter().map(|o| o.objective).collect();
        let cv = current.generalization().unwrap();
        assert_eq!(tw.pair_counts[1], brute_concordant(&cv.held_out, &y));
        let hp: Vec<f64> = data.iter().map(|o| hist.predict_mean(&o.config, &o.context).unwrap()).collect();
        assert_eq!(tw.pair_counts[0], brute_concordant(&hp, &y));
    }

    #[test]
    fn ensemble_weight_hand_arithmetic() {
        assert_eq!(ensemble_generalization_weight(&[0.5, 0.5], &[10.0, 10.0], 5), 1.0);
        assert_eq!(ensemble_generalization_weight(&[0.2, 0.8], &[0.0, 0.0], 5), 0.0);
        let cases: [(&[f64], &[f64], usize, f64); 10] = [
            (&[0.25, 0.75], &[6.0, 3.0], 5, 0.25 * 0.6 + 0.75 * 0.3),
            (&[1.0], &[7.5], 6, 0.5),
            (&[0.1, 0.2, 0.7], &[1.0, 2.0, 3.0], 3, 0.1 / 3.0 + 0.4 / 3.0 + 0.7),
            (&[0.5, 0.5], &[0.0, 1.0], 2, 0.5),
            (&[0.3, 0.3, 0.4], &[45.0, 0.0, 22.5], 10, 0.3 + 0.4 * 0.5),
            (&[0.6, 0.4], &[14.0, 7.0], 7, 0.6 * 14.0 / 21.0 + 0.4 / 3.0),
            (&[0.9, 0.1], &[28.0, 0.0], 8, 0.9),
            (&[0.2, 0.8], &[5.0, 8.0], 5, 0.1 + 0.64),
            (&[0.5, 0.25, 0.25], &[3.0, 1.5, 0.0], 3, 0.5 + 0.125),
            (&[1.0], &[105.0], 15, 1.0),
        ];
        for (w, g, n, expect) in cases {
            assert!((ensemble_generalization_weight(w, g, n) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(descending_ranks(&[0.1, 0.5, 0.5, 0.0]), vec![3.0, 1.5, 1.5, 4.0]);
    }

    /// Rank of each candidate under member j, by explicit counting.
    fn brute_rank(ei: &[f64], i: usize) -> f64 {
        let above = ei.iter().filter(|v| **v > ei[i]).count() as f64;
        let tied = ei.iter().filter(|v| **v == ei[i]).count() as f64;
        above + (tied + 1.0) / 2.0
    }

    #[test]
    fn combined_rank_matches_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let ei: Vec<Vec<f64>> = (0..3).map(|_| (0..20).map(|_| rng.gen_range(0..8) as f64 * 0.1).collect()).collect();
            let w = [0.2, 0.3, 0.5];
            let cr = combined_rank_from_ei(&ei, &w);
            for i in 0..20 {
                let expect: f64 = (0..3).map(|j| w[j] * brute_rank(&ei[j], i)).sum();
                assert!((cr[i] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_member_reduces_to_argmax_ei() {
        let ei = vec![vec![0.1, 0.7, 0.3, 0.7]];
        let cr = combined_rank_from_ei(&ei, &[1.0]);
        assert_eq!(select_combined(&cr, &descending_ranks(&ei[0])), Some(1));
    }

    #[test]
    fn ensemble_end_to_end() {
        let s = unit_space(2);
        let (current, data) = fitted(&s, |x| (x[0] - 0.2).powi(2) + (x[1] - 0.7).powi(2), 8, 9);
        let (hist, _) = fitted(&s, |x| (x[0] - 0.25).powi(2) + (x[1] - 0.7).powi(2), 25, 10);
        let ens = EnsembleSurrogate::build(vec![("h".into(), hist)], current, &data, 1, DEFAULT_TAU0).unwrap();
        assert_eq!(ens.weights.weights.len(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pool = CandidatePool::from_configs((0..30).map(|_| s.sample_uniform(&mut rng)).collect());
        let ctx = ContextVector::new(1.0);
        let cr = combined_rank(&ens, &pool, &data, &ctx).unwrap();
        assert_eq!(cr.len(), 30);
        let pick = select_by_combined_rank(&ens, &pool, &data, &ctx).unwrap().unwrap();
        assert!(cr.iter().all(|c| *c >= cr[pick]));
        let ws = ens.generalization_weight(data.len());
        assert!((0.0..=1.0).contains(&ws));
    }

    proptest! {
        #[test]
        fn similarity_is_rank_invariant(a in prop::collection::vec(-5.0f64..5.0, 2..15), seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<f64> = a.iter().map(|_| rng.gen_range(-5.0..5.0)).collect();
            let r = concordance_ratio(&a, &b);
            let ta: Vec<f64> = a.iter().map(|v| v.exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(concordance_ratio(&ta, &b), r);
            prop_assert_eq!(concordance_ratio(&b, &a), r);
        }

        #[test]
        fn filter_is_sorted_bounded_and_monotone(sims in prop::collection::vec(0.0f64..1.0, 0..12), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0, k in 0usize..8) {
            let s = unit_space(1);
            let model = lookup_model(&if sims.is_empty() { vec![0.5] } else { sims.clone() });
            let recs: Vec<TaskRecord> = (0..sims.len()).map(|i| record(&format!("t{i}"), &s, |x| x[0], i as u64, i as f64)).collect();
            let (lo, hi) = (t1.min(t2), t1.max(t2));
            let a = filter_tasks(&model, &meta(0.0), &recs, lo, k);
            let b = filter_tasks(&model, &meta(0.0), &recs, hi, k);
            prop_assert!(a.len() <= k && b.len() <= a.len());
            prop_assert!(a.windows(2).all(|w| w[0].similarity >= w[1].similarity));
        }

        #[test]
        fn combined_argmin_ignores_monotone_ei_transforms(seed in 0u64..500, member in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ei: Vec<Vec<f64>> = (0..3).map(|_| (0..15).map(|_| rng.gen::<f64>()).collect()).collect();
            let w = softmax(&[rng.gen(), rng.gen(), rng.gen()], 0.3);
            let pick = select_combined(&combined_rank_from_ei(&ei, &w), &descending_ranks(&ei[2]));
            let mut t = ei.clone();
            t[member] = t[member].iter().map(|v| (5.0 * v).exp() - 2.0).collect();
            prop_assert_eq!(select_combined(&combined_rank_from_ei(&t, &w), &descending_ranks(&t[2])), pick);
        }

        #[test]
        fn weights_sum_to_one(g in prop::collection::vec(0.0f64..1.0, 1..8), t in 1usize..100) {
            let w = softmax(&g, temperature(0.1, t));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|v| *v >= 0.0));
        }
    }
}
