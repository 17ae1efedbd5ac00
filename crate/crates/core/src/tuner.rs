//! Two-phase tuning procedure: default evaluations, expert or ensemble
//! initialization, then a search phase arbitrating between the expert rules
//! and (ensemble) Bayesian optimization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{
    generate_candidates, select_by_ei, DEFAULT_MUTATION_CANDIDATES, DEFAULT_RANDOM_CANDIDATES,
};
use crate::gp::{ContextVector, GpError, GpSurrogate, Observation};
use crate::rules::{apply_rules, expert_init_suggest, parse_ruleset, RuleError, RuleSet};
use crate::space::{Configuration, SearchSpace, SpaceError};
use crate::transfer::{
    compute_meta_feature, filter_tasks, select_by_combined_rank, EnsembleSurrogate, MetaFeature,
    SimilarityModel, TaskRecord, TransferError, DEFAULT_TAU0, DEFAULT_THRESHOLD, DEFAULT_TOP_K,
};

pub const DEFAULT_RADIUS: f64 = 0.2;
/// Relative change of data size that counts as a new workload.
pub const WORKLOAD_CHANGE: f64 = 0.5;
pub const CHANGE_WINDOW: usize = 5;

#[derive(Debug, Error)]
pub enum TunerError {
    #[error("task is finished")]
    Finished,
    #[error("task was stopped by the user")]
    Stopped,
    #[error("no suggestion is outstanding")]
    NoOutstanding,
    #[error("observed configuration is not the outstanding suggestion")]
    NotOutstanding,
    #[error("no observations yet")]
    NoObservations,
    #[error("invalid budget: {0}")]
    Budget(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub defaults: usize,
    /// Initialization steps after the defaults.
    pub init: usize,
    pub search: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { defaults: 5, init: 5, search: 45 }
    }
}

impl Budget {
    pub fn total(&self) -> usize {
        self.defaults + self.init + self.search
    }

    pub fn validate(&self) -> Result<(), TunerError> {
        if self.defaults == 0 {
            return Err(TunerError::Budget("at least one default evaluation is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Defaults,
    Init,
    Search,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    StoppedByUser,
    Restarted,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rationale {
    Default,
    ExpertInit,
    EnsembleInit,
    /// Uniform sample; only used by baselines without expert initialization.
    RandomInit,
    ExpertRules,
    BoEi,
    EnsembleRank,
}

/// How the search phase chooses between rules and surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arbitration {
    Dynamic,
    RulesOnly,
    SurrogateOnly,
}

/// Which history tasks join the ensemble once the defaults are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    /// Similarity filtering (threshold, top-k).
    Filtered,
    /// Every available history task.
    All,
    /// The single most similar history task.
    One,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub expert_init: bool,
    pub arbitration: Arbitration,
    pub transfer: TransferMode,
}

impl Strategy {
    pub fn rover() -> Self {
        Strategy { expert_init: true, arbitration: Arbitration::Dynamic, transfer: TransferMode::Filtered }
    }

    pub fn vanilla_bo() -> Self {
        Strategy { expert_init: false, arbitration: Arbitration::SurrogateOnly, transfer: TransferMode::Off }
    }

    pub fn rules_only() -> Self {
        Strategy { expert_init: true, arbitration: Arbitration::RulesOnly, transfer: TransferMode::Off }
    }

    pub fn transfer_all() -> Self {
        Strategy { transfer: TransferMode::All, ..Strategy::rover() }
    }

    pub fn transfer_one() -> Self {
        Strategy { transfer: TransferMode::One, ..Strategy::rover() }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        Some(match name {
            "rover" => Self::rover(),
            "vanilla_bo" => Self::vanilla_bo(),
            "rules_only" => Self::rules_only(),
            "transfer_all" => Self::transfer_all(),
            "transfer_one" => Self::transfer_one(),
            _ => return None,
        })
    }
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy::rover()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferSettings {
    pub tau0: f64,
    pub threshold: f64,
    pub top_k: usize,
}

impl Default for TransferSettings {
    fn default() -> Self {
        TransferSettings { tau0: DEFAULT_TAU0, threshold: DEFAULT_THRESHOLD, top_k: DEFAULT_TOP_K }
    }
}

/// Everything needed to recreate a tuner from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub space: SearchSpace,
    /// Rule document; `None` uses the bundled rules.
    #[serde(default)]
    pub rules: Option<String>,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub strategy: Strategy,
    /// Replaces the bundled default configurations.
    #[serde(default)]
    pub defaults: Option<Vec<Configuration>>,
    #[serde(default)]
    pub transfer: TransferSettings,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_radius() -> f64 {
    DEFAULT_RADIUS
}

impl TaskSpec {
    pub fn new(task_id: impl Into<String>, space: SearchSpace) -> Self {
        TaskSpec {
            task_id: task_id.into(),
            space,
            rules: None,
            budget: Budget::default(),
            seed: 0,
            strategy: Strategy::rover(),
            defaults: None,
            transfer: TransferSettings::default(),
            radius: DEFAULT_RADIUS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    /// Position of this suggestion in the task's trajectory.
    pub index: usize,
    pub config: Configuration,
    pub rationale: Rationale,
    pub phase: Phase,
    /// Search-phase iteration `T`; zero outside the search phase.
    pub iteration: usize,
    /// `(w_e, w_s, p_e, u)` of the search-phase draw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arbitration: Option<ArbitrationDraw>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArbitrationDraw {
    pub expert_weight: f64,
    pub surrogate_weight: f64,
    pub expert_probability: f64,
    pub u: f64,
}

/// Serializable progress of a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunerState {
    pub status: Status,
    pub phase: Phase,
    pub observations: Vec<Observation>,
    /// First observation of the current segment; restarts open a new one.
    pub segment_start: usize,
    /// Search-phase suggestions made in the current segment.
    pub iteration: usize,
    pub suggestions: usize,
    pub outstanding: Option<Suggestion>,
    /// History tasks selected for the ensemble.
    pub members: Vec<String>,
    pub meta: Option<MetaFeature>,
    pub restarts: usize,
    /// Extra search iterations granted after creation.
    #[serde(default)]
    pub extra_search: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserveOutcome {
    pub phase: Phase,
    /// Set when the observation revealed a workload change; holds the
    /// finished segment for the knowledge store when it was long enough.
    pub restarted: Option<Option<TaskRecord>>,
}

pub fn expert_weight(iteration: usize) -> f64 {
    0.5f64.powi(iteration as i32) + 0.2
}

/// `w_e / (w_e + w_s)`, or 1 when both weights vanish.
pub fn component_probability(w_e: f64, w_s: f64) -> f64 {
    if w_e + w_s <= 0.0 {
        1.0
    } else {
        w_e / (w_e + w_s)
    }
}

const MIB: f64 = 1024.0 * 1024.0;

/// Vendor-style defaults of the bundled Spark space.
fn vendor_default(space: &SearchSpace) -> Option<Configuration> {
    let c = Configuration::new()
        .with("spark.sql.files.maxPartitionBytes", 128.0 * MIB)
        .with("spark.sql.adaptive.maxNumPostShufflePartitions", 200.0)
        .with("spark.dynamicAllocation.maxExecutors", 100.0)
        .with("spark.driver.cores", 1.0)
        .with("spark.driver.memory", 4.0)
        .with("spark.driver.memoryOverhead", 512.0)
        .with("spark.executor.cores", 2.0)
        .with("spark.executor.memory", 8.0)
        .with("spark.executor.memoryOverhead", 1024.0)
        .with("spark.vcore.boost.ratio", 1.0);
    space.ensure_valid(&c).ok().map(|_| c)
}

/// The four fixed defaults: vendor-style, small, midpoint, large. The fifth
/// default is the rule recommendation for the first one, known only after
/// it ran.
pub fn fixed_defaults(space: &SearchSpace) -> Vec<Configuration> {
    let at = |u: f64| space.from_unit_positions(&vec![u; space.len()]);
    let vendor = vendor_default(space).unwrap_or_else(|| at(0.4));
    vec![vendor, at(0.25), at(0.5), at(0.75)]
}

pub struct Tuner {
    spec: TaskSpec,
    rules: RuleSet,
    state: TunerState,
    history: Vec<TaskRecord>,
    similarity: Option<SimilarityModel>,
    members: Vec<TaskRecord>,
}

impl Tuner {
    pub fn new(spec: TaskSpec) -> Result<Self, TunerError> {
        Self::with_history(spec, Vec::new(), None)
    }

    /// A tuner that may transfer from `history`, filtered with `similarity`.
    pub fn with_history(spec: TaskSpec, history: Vec<TaskRecord>, similarity: Option<SimilarityModel>) -> Result<Self, TunerError> {
        spec.budget.validate()?;
        let rules = match &spec.rules {
            Some(doc) => parse_ruleset(doc, &spec.space)?,
            None => RuleSet::spark_default(&spec.space).or_else(|_| parse_ruleset("", &spec.space))?,
        };
        if let Some(d) = &spec.defaults {
            if d.is_empty() {
                return Err(TunerError::Budget("explicit defaults list is empty".into()));
            }
            for c in d {
                spec.space.ensure_valid(c)?;
            }
        }
        let state = TunerState {
            status: Status::Running,
            phase: Phase::Defaults,
            observations: Vec::new(),
            segment_start: 0,
            iteration: 0,
            suggestions: 0,
            outstanding: None,
            members: Vec::new(),
            meta: None,
            restarts: 0,
            extra_search: 0,
        };
        Ok(Tuner { spec, rules, state, history, similarity, members: Vec::new() })
    }

    /// Rebuilds a tuner from a saved state; ensemble members are resolved
    /// by task id against `history`.
    pub fn restore(spec: TaskSpec, state: TunerState, history: Vec<TaskRecord>, similarity: Option<SimilarityModel>) -> Result<Self, TunerError> {
        let mut t = Self::with_history(spec, history, similarity)?;
        t.members = state
            .members
            .iter()
            .filter_map(|id| t.history.iter().find(|r| r.task_id() == id).cloned())
            .collect();
        t.state = state;
        Ok(t)
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn state(&self) -> &TunerState {
        &self.state
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn members(&self) -> &[TaskRecord] {
        &self.members
    }

    pub fn segment(&self) -> &[Observation] {
        &self.state.observations[self.state.segment_start..]
    }

    fn search_budget(&self) -> usize {
        self.spec.budget.search + self.state.extra_search
    }

    fn phase_for(&self, n: usize) -> Phase {
        let b = &self.spec.budget;
        if n < b.defaults {
            Phase::Defaults
        } else if n < b.defaults + b.init {
            Phase::Init
        } else if n < b.defaults + b.init + self.search_budget() {
            Phase::Search
        } else {
            Phase::Finished
        }
    }

    /// Grants more search iterations; reopens a finished task.
    pub fn extend_budget(&mut self, extra: usize) {
        self.state.extra_search += extra;
        if self.state.status == Status::Finished {
            self.state.status = Status::Running;
        }
        self.state.phase = self.phase_for(self.segment().len());
    }

    pub fn stop(&mut self) {
        self.state.status = Status::StoppedByUser;
        self.state.outstanding = None;
    }

    fn rng_for(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(index as u64);
        rng
    }

    fn default_config(&self, k: usize) -> Result<Configuration, TunerError> {
        if let Some(d) = &self.spec.defaults {
            return Ok(d[k % d.len()].clone());
        }
        let fixed = fixed_defaults(&self.spec.space);
        if k < fixed.len() {
            return Ok(fixed[k].clone());
        }
        // rule recommendation for the first default, then variations of it;
        // strategies without expert knowledge sample uniformly instead
        if !self.spec.strategy.expert_init {
            return Ok(self.spec.space.sample_uniform(&mut self.rng_for(self.state.suggestions)));
        }
        let seg = self.segment();
        let first = &seg[0];
        let recommended = apply_rules(&self.rules, &first.config, &first.metrics, &self.spec.space)?;
        if k == fixed.len() {
            Ok(recommended)
        } else {
            let mut rng = self.rng_for(self.state.suggestions);
            Ok(self.spec.space.sample_neighborhood(&recommended, self.spec.radius, &mut rng)?)
        }
    }

    fn current_context(&self) -> ContextVector {
        self.segment()
            .last()
            .or(self.state.observations.last())
            .map(|o| o.context.clone())
            .unwrap_or_else(|| ContextVector::new(1.0))
    }

    fn ensemble(&self, current: GpSurrogate, iteration: usize) -> Result<EnsembleSurrogate, TunerError> {
        let history = self.members.iter().map(|r| (r.task_id().to_string(), r.surrogate().clone())).collect();
        Ok(EnsembleSurrogate::build(history, current, self.segment(), iteration, self.spec.transfer.tau0)?)
    }

    fn surrogate_pick(&self, model: &GpSurrogate, ensemble: Option<&EnsembleSurrogate>, rng: &mut ChaCha8Rng) -> Result<Configuration, TunerError> {
        let seg = self.segment();
        let mut pool = generate_candidates(&self.spec.space, seg, DEFAULT_RANDOM_CANDIDATES, DEFAULT_MUTATION_CANDIDATES, rng);
        if ensemble.is_some() {
            // mutations of every member's best configurations, so the pool
            // reaches the regions the history surrogates know about
            for m in &self.members {
                let extra = generate_candidates(&self.spec.space, m.observations(), 0, DEFAULT_MUTATION_CANDIDATES, rng);
                pool.configs.extend(extra.configs);
                pool.provenance.extend(extra.provenance);
            }
        }
        let ctx = self.current_context();
        match ensemble {
            Some(e) => {
                let i = select_by_combined_rank(e, &pool, seg, &ctx)?.expect("non-empty pool");
                Ok(pool.configs[i].clone())
            }
            None => {
                let best = seg.iter().map(|o| o.objective).fold(f64::INFINITY, f64::min);
                Ok(select_by_ei(model, &pool, best, &ctx)?)
            }
        }
    }

    /// Rules applied to the previous configuration; when no rule moves it,
    /// a neighborhood sample keeps the step from repeating a measurement.
    fn rule_step(&self, rng: &mut ChaCha8Rng) -> Result<Configuration, TunerError> {
        let prev = self.segment().last().ok_or(TunerError::NoObservations)?;
        let next = apply_rules(&self.rules, &prev.config, &prev.metrics, &self.spec.space)?;
        if next == prev.config {
            Ok(self.spec.space.sample_neighborhood(&next, self.spec.radius, rng)?)
        } else {
            Ok(next)
        }
    }

    /// The outstanding suggestion, creating it if needed.
    pub fn suggest(&mut self) -> Result<Suggestion, TunerError> {
        self.suggest_with(None)
    }

    /// As [`Tuner::suggest`], optionally forcing the arbitration draw `u`.
    pub fn suggest_with(&mut self, forced_u: Option<f64>) -> Result<Suggestion, TunerError> {
        match self.state.status {
            Status::StoppedByUser => return Err(TunerError::Stopped),
            Status::Finished => return Err(TunerError::Finished),
            Status::Running | Status::Restarted => {}
        }
        if let Some(s) = &self.state.outstanding {
            return Ok(s.clone());
        }
        let n = self.segment().len();
        let phase = self.phase_for(n);
        self.state.phase = phase;
        let index = self.state.suggestions;
        let mut rng = self.rng_for(index);
        let space = &self.spec.space;

        let (config, rationale, iteration, arbitration) = match phase {
            Phase::Finished => {
                self.state.status = Status::Finished;
                return Err(TunerError::Finished);
            }
            Phase::Defaults => (self.default_config(n)?, Rationale::Default, 0, None),
            Phase::Init => {
                if !self.members.is_empty() {
                    let model = GpSurrogate::fit(self.segment(), space)?;
                    let ens = self.ensemble(model.clone(), 1)?;
                    (self.surrogate_pick(&model, Some(&ens), &mut rng)?, Rationale::EnsembleInit, 0, None)
                } else if self.spec.strategy.expert_init {
                    let prev = self.segment().last().ok_or(TunerError::NoObservations)?;
                    let c = expert_init_suggest(&prev.config, &prev.metrics, &self.rules, space, self.spec.radius, &mut rng)?;
                    (c, Rationale::ExpertInit, 0, None)
                } else {
                    (space.sample_uniform(&mut rng), Rationale::RandomInit, 0, None)
                }
            }
            Phase::Search => {
                let t = self.state.iteration + 1;
                let u = forced_u.unwrap_or_else(|| rng.gen::<f64>());
                let use_rules = match self.spec.strategy.arbitration {
                    Arbitration::RulesOnly => Some(true),
                    Arbitration::SurrogateOnly => Some(false),
                    Arbitration::Dynamic => None,
                };
                if use_rules == Some(true) {
                    (self.rule_step(&mut rng)?, Rationale::ExpertRules, t, None)
                } else {
                    let model = GpSurrogate::fit(self.segment(), space)?;
                    let ens = if self.members.is_empty() { None } else { Some(self.ensemble(model.clone(), t)?) };
                    let draw = if use_rules.is_none() {
                        let w_e = expert_weight(t);
                        let w_s = match &ens {
                            Some(e) => e.generalization_weight(self.segment().len()),
                            None => model.generalization()?.weight,
                        };
                        let p_e = component_probability(w_e, w_s);
                        Some(ArbitrationDraw { expert_weight: w_e, surrogate_weight: w_s, expert_probability: p_e, u })
                    } else {
                        None
                    };
                    if draw.is_some_and(|d| d.u < d.expert_probability) {
                        (self.rule_step(&mut rng)?, Rationale::ExpertRules, t, draw)
                    } else {
                        let rationale = if ens.is_some() { Rationale::EnsembleRank } else { Rationale::BoEi };
                        (self.surrogate_pick(&model, ens.as_ref(), &mut rng)?, rationale, t, draw)
                    }
                }
            }
        };
        self.spec.space.ensure_valid(&config)?;
        if phase == Phase::Search {
            self.state.iteration = iteration;
        }
        let s = Suggestion { index, config, rationale, phase, iteration, arbitration };
        self.state.suggestions += 1;
        self.state.outstanding = Some(s.clone());
        Ok(s)
    }

    /// True when `context` differs from the trailing mean data size of the
    /// last observations by more than [`WORKLOAD_CHANGE`].
    pub fn detect_workload_change(&self, context: &ContextVector) -> bool {
        let seg = self.segment();
        if seg.is_empty() {
            return false;
        }
        let tail = &seg[seg.len().saturating_sub(CHANGE_WINDOW)..];
        let mean = tail.iter().map(|o| o.context.data_size).sum::<f64>() / tail.len() as f64;
        mean > 0.0 && (context.data_size - mean).abs() / mean > WORKLOAD_CHANGE
    }

    /// Records the result of the outstanding suggestion.
    pub fn observe(&mut self, observation: Observation) -> Result<ObserveOutcome, TunerError> {
        match self.state.status {
            Status::StoppedByUser => return Err(TunerError::Stopped),
            Status::Finished => return Err(TunerError::Finished),
            Status::Running | Status::Restarted => {}
        }
        let outstanding = self.state.outstanding.as_ref().ok_or(TunerError::NoOutstanding)?;
        if outstanding.config != observation.config {
            return Err(TunerError::NotOutstanding);
        }
        self.spec.space.ensure_valid(&observation.config)?;
        let changed = self.detect_workload_change(&observation.context);
        self.state.outstanding = None;
        self.state.status = Status::Running;

        let mut restarted = None;
        if changed {
            restarted = Some(self.archive_segment());
            self.state.observations.push(observation);
            self.state.segment_start = self.state.observations.len();
            self.state.iteration = 0;
            self.state.restarts += 1;
            self.state.members.clear();
            self.state.meta = None;
            self.members.clear();
            self.state.status = Status::Restarted;
        } else {
            self.state.observations.push(observation);
            let n = self.segment().len();
            if n == self.spec.budget.defaults {
                self.resolve_members()?;
            }
        }
        let phase = self.phase_for(self.segment().len());
        self.state.phase = phase;
        if phase == Phase::Finished {
            self.state.status = Status::Finished;
        }
        Ok(ObserveOutcome { phase, restarted })
    }

    /// The current segment as a history record, if it got past its defaults.
    fn archive_segment(&self) -> Option<TaskRecord> {
        let seg = self.segment();
        let d = self.spec.budget.defaults;
        if seg.len() < d.max(2) {
            return None;
        }
        let meta = compute_meta_feature(&seg[..d]).ok()?;
        let id = format!("{}#{}", self.spec.task_id, self.state.restarts);
        TaskRecord::new(id, meta, seg.to_vec(), &self.spec.space).ok()
    }

    /// Selects the ensemble members from the history once the defaults ran.
    fn resolve_members(&mut self) -> Result<(), TunerError> {
        let d = self.spec.budget.defaults;
        let meta = compute_meta_feature(&self.segment()[..d])?;
        let ts = self.spec.transfer;
        let members: Vec<TaskRecord> = match (self.spec.strategy.transfer, &self.similarity) {
            (TransferMode::Off, _) => Vec::new(),
            (TransferMode::All, _) => self.history.clone(),
            (TransferMode::Filtered, Some(model)) => {
                filter_tasks(model, &meta, &self.history, ts.threshold, ts.top_k).into_iter().map(|s| s.record.clone()).collect()
            }
            (TransferMode::Filtered, None) => Vec::new(),
            (TransferMode::One, Some(model)) => {
                filter_tasks(model, &meta, &self.history, 0.0, 1).into_iter().map(|s| s.record.clone()).collect()
            }
            (TransferMode::One, None) => self.history.iter().take(1).cloned().collect(),
        };
        self.state.members = members.iter().map(|r| r.task_id().to_string()).collect();
        self.members = members;
        self.state.meta = Some(meta);
        Ok(())
    }

    /// Lowest objective over all observations; ties go to the earliest.
    pub fn best_observed(&self) -> Result<(&Configuration, f64), TunerError> {
        best_observed(&self.state.observations).map(|i| {
            let o = &self.state.observations[i];
            (&o.config, o.objective)
        })
    }

    /// Finished tasks become history: the first observations and the default
    /// meta-feature.
    pub fn to_record(&self) -> Option<TaskRecord> {
        self.archive_segment().map(|r| {
            let id = self.spec.task_id.clone();
            TaskRecord::new(id, r.meta().clone(), r.observations().to_vec(), &self.spec.space).expect("refit of a fitted record")
        })
    }
}

pub fn best_observed(observations: &[Observation]) -> Result<usize, TunerError> {
    (0..observations.len())
        .min_by(|&a, &b| observations[a].objective.total_cmp(&observations[b].objective).then(a.cmp(&b)))
        .ok_or(TunerError::NoObservations)
}
