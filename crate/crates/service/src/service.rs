//! Transport-independent task registry behind the HTTP API.
//!
//! Each task is a [`Tuner`] plus the service-side trajectory log (the tuner
//! keeps observations, not the suggestions that produced them). Requests for
//! different tasks run concurrently; requests for one task are serialized
//! by its mutex. With a store attached, every state change is written
//! through before the response is returned, and finished segments become
//! history for later tasks.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sparktune::gp::{ContextVector, Observation};
use sparktune::rules::lint_ruleset;
use sparktune::space::{SearchSpace, SpaceError};
use sparktune::store::{Store, StoreError, SCHEMA_VERSION};
use sparktune::transfer::{SimilarityModel, TaskRecord};
use sparktune::tuner::{Phase, Rationale, Status, Strategy, Suggestion, TaskSpec, TransferSettings, Tuner, TunerError};
use thiserror::Error;

use crate::api::*;

pub const ENV_STORE: &str = "SPARKTUNE_STORE";
pub const ENV_TAU0: &str = "SPARKTUNE_TAU0";
pub const ENV_THRESHOLD: &str = "SPARKTUNE_THRESHOLD";
pub const ENV_TOP_K: &str = "SPARKTUNE_TOP_K";

const LOG_DOC: &str = "log";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown task `{0}`")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{message}")]
    Invalid { message: String, violations: Vec<String> },
    #[error("malformed request body: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::NotFound(_) => 404,
            ServiceError::Conflict(_) => 409,
            ServiceError::Invalid { .. } => 422,
            ServiceError::BadRequest(_) => 400,
            ServiceError::Store(_) | ServiceError::Internal(_) => 500,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Conflict(_) => "protocol_violation",
            ServiceError::Invalid { .. } => "invalid_document",
            ServiceError::BadRequest(_) => "malformed_body",
            ServiceError::Store(_) => "store_error",
            ServiceError::Internal(_) => "internal_error",
        }
    }

    pub fn body(&self) -> ErrorBody {
        let violations = match self {
            ServiceError::Invalid { violations, .. } => violations.clone(),
            _ => Vec::new(),
        };
        ErrorBody { schema_version: SCHEMA_VERSION, error: self.code().to_string(), message: self.to_string(), violations }
    }

    fn invalid(message: impl Into<String>, violations: Vec<String>) -> Self {
        ServiceError::Invalid { message: message.into(), violations }
    }
}

impl From<TunerError> for ServiceError {
    fn from(e: TunerError) -> Self {
        match e {
            TunerError::Finished | TunerError::Stopped | TunerError::NoOutstanding | TunerError::NotOutstanding => {
                ServiceError::Conflict(e.to_string())
            }
            TunerError::Space(SpaceError::InvalidConfiguration(v)) => {
                ServiceError::invalid("invalid configuration", v.iter().map(|v| v.to_string()).collect())
            }
            TunerError::Budget(m) => ServiceError::invalid("invalid budget", vec![m]),
            TunerError::Rules(r) => ServiceError::invalid("invalid rule document", vec![r.to_string()]),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

/// Parses a request body, mapping any syntax or shape error to 400.
pub fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(bytes).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

/// Service-wide defaults, overridable from the environment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Settings {
    pub transfer: TransferSettings,
}

impl Settings {
    pub fn from_env() -> Result<Self, String> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        fn parse<T: std::str::FromStr>(name: &str, v: Option<String>) -> Result<Option<T>, String> {
            v.map(|s| s.trim().parse::<T>().map_err(|_| format!("{name}: cannot parse `{s}`"))).transpose()
        }
        let mut t = TransferSettings::default();
        if let Some(v) = parse::<f64>(ENV_TAU0, get(ENV_TAU0))? {
            t.tau0 = v;
        }
        if let Some(v) = parse::<f64>(ENV_THRESHOLD, get(ENV_THRESHOLD))? {
            t.threshold = v;
        }
        if let Some(v) = parse::<usize>(ENV_TOP_K, get(ENV_TOP_K))? {
            t.top_k = v;
        }
        check_transfer(&t).map_err(|v| v.join("; "))?;
        Ok(Settings { transfer: t })
    }
}

fn check_transfer(t: &TransferSettings) -> Result<(), Vec<String>> {
    let mut v = Vec::new();
    if !(t.tau0 > 0.0 && t.tau0.is_finite()) {
        v.push(format!("tau0 must be positive, got {}", t.tau0));
    }
    if !(0.0..=1.0).contains(&t.threshold) {
        v.push(format!("threshold must lie in [0, 1], got {}", t.threshold));
    }
    if t.top_k == 0 {
        v.push("top_k must be at least 1".to_string());
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub suggestion: Suggestion,
    /// In the caller's orientation.
    pub objective: f64,
    #[serde(default)]
    pub runtime_s: Option<f64>,
    #[serde(default)]
    pub avg_memory_gb: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionLog {
    pub orientation: Orientation,
    pub entries: Vec<LogEntry>,
}

struct Session {
    tuner: Tuner,
    log: SessionLog,
}

#[derive(Default)]
struct Knowledge {
    history: Vec<TaskRecord>,
    similarity: Option<SimilarityModel>,
}

pub struct TuningService {
    store: Option<Store>,
    settings: Settings,
    tasks: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
    knowledge: Mutex<Knowledge>,
    next_id: AtomicUsize,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl TuningService {
    /// A service without persistence.
    pub fn in_memory(settings: Settings) -> Self {
        TuningService {
            store: None,
            settings,
            tasks: RwLock::new(BTreeMap::new()),
            knowledge: Mutex::new(Knowledge::default()),
            next_id: AtomicUsize::new(1),
        }
    }

    /// A service backed by `store`: loads its history and similarity model
    /// and resumes every saved session. Returns the ids of sessions that
    /// could not be restored alongside the service.
    pub fn open(store: Store, settings: Settings) -> Result<(Self, Vec<(String, String)>), ServiceError> {
        let (history, broken) = store.load_history()?;
        let mut skipped: Vec<(String, String)> = broken.into_iter().map(|(id, e)| (id, e.to_string())).collect();
        let similarity = store.load_similarity()?;
        let mut tasks = BTreeMap::new();
        let mut next = 1;
        for id in store.list_sessions()? {
            let restored = store.load_session(&id).map_err(|e| e.to_string()).and_then(|(spec, state)| {
                let mut log: SessionLog = match store.load_session_extra(&id, LOG_DOC) {
                    Ok(l) => l,
                    Err(StoreError::NotFound(_)) => SessionLog::default(),
                    Err(e) => return Err(e.to_string()),
                };
                // the log is written before the state; drop an entry whose
                // state write never happened
                log.entries.truncate(state.observations.len());
                let tuner = Tuner::restore(spec, state, history.clone(), similarity.clone()).map_err(|e| e.to_string())?;
                Ok(Session { tuner, log })
            });
            match restored {
                Ok(s) => {
                    if let Some(n) = id.strip_prefix("task-").and_then(|n| n.parse::<usize>().ok()) {
                        next = next.max(n + 1);
                    }
                    tasks.insert(id, Arc::new(Mutex::new(s)));
                }
                Err(e) => skipped.push((id, e)),
            }
        }
        let service = TuningService {
            store: Some(store),
            settings,
            tasks: RwLock::new(tasks),
            knowledge: Mutex::new(Knowledge { history, similarity }),
            next_id: AtomicUsize::new(next),
        };
        Ok((service, skipped))
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn store(&self) -> Option<&Store> {
        self.store.as_ref()
    }

    /// Adds a history task available to tasks created afterwards.
    pub fn add_history(&self, record: TaskRecord) -> Result<(), ServiceError> {
        if let Some(store) = &self.store {
            store.save_task(&record)?;
        }
        let mut k = lock(&self.knowledge);
        k.history.retain(|r| r.task_id() != record.task_id());
        k.history.push(record);
        Ok(())
    }

    pub fn set_similarity(&self, model: SimilarityModel) -> Result<(), ServiceError> {
        if let Some(store) = &self.store {
            store.save_similarity(&model)?;
        }
        lock(&self.knowledge).similarity = Some(model);
        Ok(())
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.tasks
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    pub fn ensure_exists(&self, id: &str) -> Result<(), ServiceError> {
        self.session(id).map(|_| ())
    }

    fn persist(&self, s: &Session) -> Result<(), ServiceError> {
        if let Some(store) = &self.store {
            let spec = s.tuner.spec();
            let id = &spec.task_id;
            if store.list_sessions()?.binary_search(id).is_err() {
                store.save_session(spec, s.tuner.state())?;
                store.save_session_extra(id, LOG_DOC, &s.log)?;
            } else {
                store.save_session_extra(id, LOG_DOC, &s.log)?;
                store.save_session(spec, s.tuner.state())?;
            }
        }
        Ok(())
    }

    pub fn create(&self, req: CreateTaskRequest) -> Result<CreatedTask, ServiceError> {
        let space = match &req.space {
            None => SearchSpace::spark_default(),
            Some(doc) => SearchSpace::lint_json(&doc.to_string())
                .map_err(|errs| ServiceError::invalid("invalid space document", errs.iter().map(|e| e.to_string()).collect()))?,
        };
        if space.is_empty() {
            return Err(ServiceError::invalid("invalid space document", vec!["the space has no parameters".into()]));
        }
        let rules = match &req.rules {
            None => None,
            Some(doc) => {
                let text = match doc {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                lint_ruleset(&text, &space)
                    .map_err(|errs| ServiceError::invalid("invalid rule document", errs.iter().map(|e| e.to_string()).collect()))?;
                Some(text)
            }
        };
        let strategy = match req.strategy.as_deref() {
            None => Strategy::rover(),
            Some(name) => Strategy::by_name(name)
                .ok_or_else(|| ServiceError::invalid("invalid strategy", vec![format!("unknown strategy `{name}`")]))?,
        };
        let mut transfer = self.settings.transfer;
        if let Some(o) = &req.transfer {
            transfer.tau0 = o.tau0.unwrap_or(transfer.tau0);
            transfer.threshold = o.threshold.unwrap_or(transfer.threshold);
            transfer.top_k = o.top_k.unwrap_or(transfer.top_k);
        }
        check_transfer(&transfer).map_err(|v| ServiceError::invalid("invalid transfer settings", v))?;
        if let Some(defaults) = &req.defaults {
            let violations: Vec<String> = defaults
                .iter()
                .enumerate()
                .flat_map(|(i, c)| space.validate(c).into_iter().map(move |v| format!("default #{i}: {v}")))
                .collect();
            if !violations.is_empty() {
                return Err(ServiceError::invalid("invalid default configurations", violations));
            }
        }

        let id = format!("task-{:04}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let mut spec = TaskSpec::new(id.clone(), space);
        spec.rules = rules;
        spec.budget = req.budget.unwrap_or_default();
        spec.seed = req.seed.unwrap_or(0);
        spec.strategy = strategy;
        spec.transfer = transfer;
        spec.defaults = req.defaults;
        let (history, similarity) = {
            let k = lock(&self.knowledge);
            (k.history.clone(), k.similarity.clone())
        };
        let tuner = Tuner::with_history(spec, history, similarity)?;
        let session = Session { tuner, log: SessionLog { orientation: req.orientation, entries: Vec::new() } };
        self.persist(&session)?;
        let phase = session.tuner.state().phase;
        self.tasks.write().unwrap_or_else(|e| e.into_inner()).insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(CreatedTask { schema_version: SCHEMA_VERSION, task_id: id, phase })
    }

    pub fn list(&self) -> TaskList {
        let sessions: Vec<Arc<Mutex<Session>>> = self.tasks.read().unwrap_or_else(|e| e.into_inner()).values().cloned().collect();
        let tasks = sessions
            .iter()
            .map(|s| {
                let v = status_view(&lock(s));
                TaskSummary {
                    task_id: v.task_id,
                    status: v.status,
                    phase: v.phase,
                    iterations: v.iterations,
                    best_objective: v.best_objective,
                    improvement_ratio: v.improvement_ratio,
                }
            })
            .collect();
        TaskList { schema_version: SCHEMA_VERSION, tasks }
    }

    pub fn status(&self, id: &str) -> Result<TaskStatusView, ServiceError> {
        let s = self.session(id)?;
        let guard = lock(&s);
        Ok(status_view(&guard))
    }

    /// The outstanding suggestion; repeated calls return the same one until
    /// it is observed.
    pub fn suggestion(&self, id: &str) -> Result<SuggestionView, ServiceError> {
        let s = self.session(id)?;
        let mut guard = lock(&s);
        let was_outstanding = guard.tuner.state().outstanding.is_some();
        let result = guard.tuner.suggest();
        if !was_outstanding {
            // a refused suggestion can still move the task to finished
            self.persist(&guard)?;
        }
        Ok(SuggestionView::new(id, &result?))
    }

    pub fn observe(&self, id: &str, req: ObservationRequest) -> Result<TaskStatusView, ServiceError> {
        if !req.objective.is_finite() {
            return Err(ServiceError::BadRequest(format!("objective must be finite, got {}", req.objective)));
        }
        let context = req.context.unwrap_or_else(|| ContextVector::new(1.0));
        if !(context.data_size.is_finite() && context.extra.iter().all(|v| v.is_finite())) {
            return Err(ServiceError::BadRequest("context values must be finite".into()));
        }
        let s = self.session(id)?;
        let mut guard = lock(&s);
        let outstanding = guard
            .tuner
            .state()
            .outstanding
            .clone()
            .ok_or_else(|| ServiceError::from(TunerError::NoOutstanding))?;
        let orientation = guard.log.orientation;
        let observation = Observation {
            config: req.config,
            objective: orientation.to_internal(req.objective),
            context,
            metrics: req.metrics,
        };
        let outcome = guard.tuner.observe(observation)?;
        guard.log.entries.push(LogEntry {
            suggestion: outstanding,
            objective: req.objective,
            runtime_s: req.runtime_s,
            avg_memory_gb: req.avg_memory_gb,
        });
        self.persist(&guard)?;
        if let Some(Some(segment)) = outcome.restarted {
            self.add_history(segment)?;
        }
        if outcome.phase == Phase::Finished {
            if let Some(record) = guard.tuner.to_record() {
                self.add_history(record)?;
            }
        }
        Ok(status_view(&guard))
    }

    /// Stops the task; idempotent. A finished task stays finished.
    pub fn stop(&self, id: &str) -> Result<FinalBest, ServiceError> {
        let s = self.session(id)?;
        let mut guard = lock(&s);
        let status = guard.tuner.state().status;
        if !matches!(status, Status::StoppedByUser | Status::Finished) {
            guard.tuner.stop();
            self.persist(&guard)?;
            if let Some(record) = guard.tuner.to_record() {
                self.add_history(record)?;
            }
        }
        let v = status_view(&guard);
        Ok(FinalBest {
            schema_version: SCHEMA_VERSION,
            task_id: v.task_id,
            status: v.status,
            best_objective: v.best_objective,
            best_config: v.best_config,
        })
    }

    pub fn extend_budget(&self, id: &str, req: BudgetRequest) -> Result<TaskStatusView, ServiceError> {
        let s = self.session(id)?;
        let mut guard = lock(&s);
        if guard.tuner.state().status == Status::StoppedByUser {
            return Err(TunerError::Stopped.into());
        }
        guard.tuner.extend_budget(req.extra_search);
        self.persist(&guard)?;
        Ok(status_view(&guard))
    }

    /// Logged trajectory of a task, for replays.
    pub fn session_log(&self, id: &str) -> Result<(TaskSpec, SessionLog, Vec<Observation>), ServiceError> {
        let s = self.session(id)?;
        let g = lock(&s);
        Ok((g.tuner.spec().clone(), g.log.clone(), g.tuner.state().observations.clone()))
    }
}

fn status_view(s: &Session) -> TaskStatusView {
    let state = s.tuner.state();
    let spec = s.tuner.spec();
    let o = s.log.orientation;
    let mut best_so_far = Vec::with_capacity(state.observations.len());
    let mut best = f64::INFINITY;
    for obs in &state.observations {
        best = best.min(obs.objective);
        best_so_far.push(o.to_external(best));
    }
    let (best_objective, best_config) = match s.tuner.best_observed() {
        Ok((c, y)) => (Some(o.to_external(y)), Some(c.clone())),
        Err(_) => (None, None),
    };
    let defaults: Vec<f64> = s
        .log
        .entries
        .iter()
        .take(spec.budget.defaults)
        .filter(|e| e.suggestion.rationale == Rationale::Default)
        .map(|e| e.objective)
        .collect();
    let improvement_ratio = match (best_objective, defaults.len()) {
        (Some(b), n) if n > 0 => {
            let mean = defaults.iter().sum::<f64>() / n as f64;
            (mean != 0.0).then(|| b / mean)
        }
        _ => None,
    };
    let history = s
        .log
        .entries
        .iter()
        .map(|e| IterationView {
            index: e.suggestion.index,
            config: e.suggestion.config.clone(),
            objective: e.objective,
            rationale: e.suggestion.rationale,
            phase: e.suggestion.phase,
            iteration: e.suggestion.iteration,
            runtime_s: e.runtime_s,
            avg_memory_gb: e.avg_memory_gb,
        })
        .collect();
    let arbitration = s
        .log
        .entries
        .iter()
        .map(|e| &e.suggestion)
        .chain(state.outstanding.as_ref())
        .filter_map(|sg| {
            sg.arbitration.map(|d| ArbitrationView {
                index: sg.index,
                iteration: sg.iteration,
                expert_weight: d.expert_weight,
                surrogate_weight: d.surrogate_weight,
                expert_probability: d.expert_probability,
                rationale: sg.rationale,
            })
        })
        .collect();
    TaskStatusView {
        schema_version: SCHEMA_VERSION,
        task_id: spec.task_id.clone(),
        status: state.status,
        phase: state.phase,
        orientation: o,
        iterations: state.observations.len(),
        budget_total: spec.budget.total() + state.extra_search,
        best_objective,
        best_config,
        best_so_far,
        improvement_ratio,
        history,
        arbitration,
        members: state.members.clone(),
        restarts: state.restarts,
        outstanding: state.outstanding.as_ref().map(|sg| SuggestionView::new(&spec.task_id, sg)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::api::TransferOverrides;
    use serde_json::json;
    use sparktune::space::Configuration;
    use sparktune::tuner::fixed_defaults;

    fn request(v: serde_json::Value) -> CreateTaskRequest {
        serde_json::from_value(v).unwrap()
    }

    fn observation(config: Configuration, objective: f64) -> ObservationRequest {
        ObservationRequest {
            config,
            objective,
            runtime_s: None,
            avg_memory_gb: None,
            metrics: Default::default(),
            context: None,
        }
    }

    #[test]
    fn settings_from_lookup() {
        let s = Settings::from_lookup(|k| match k {
            ENV_TAU0 => Some("0.2".into()),
            ENV_TOP_K => Some(" 3 ".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(s.transfer.tau0, 0.2);
        assert_eq!(s.transfer.top_k, 3);
        assert_eq!(s.transfer.threshold, TransferSettings::default().threshold);
        assert!(Settings::from_lookup(|k| (k == ENV_THRESHOLD).then(|| "1.5".into())).is_err());
        assert!(Settings::from_lookup(|k| (k == ENV_TOP_K).then(|| "many".into())).is_err());
    }

    #[test]
    fn inverted_bounds_are_unprocessable() {
        let svc = TuningService::in_memory(Settings::default());
        let space = json!([{"name": "a", "kind": "numerical", "lower": 5.0, "upper": 1.0}]);
        let err = svc.create(request(json!({"space": space}))).unwrap_err();
        assert_eq!(err.status(), 422);
        assert!(!err.body().violations.is_empty());
        let err = svc.create(request(json!({"strategy": "bogus"}))).unwrap_err();
        assert_eq!(err.status(), 422);
        let overrides = TransferOverrides { tau0: Some(-1.0), threshold: None, top_k: None };
        let mut req = request(json!({}));
        req.transfer = Some(overrides);
        assert_eq!(svc.create(req).unwrap_err().status(), 422);
    }

    #[test]
    fn protocol_violations_conflict() {
        let svc = TuningService::in_memory(Settings::default());
        let id = svc.create(request(json!({}))).unwrap().task_id;
        let cfg = fixed_defaults(&SearchSpace::spark_default()).remove(0);
        let err = svc.observe(&id, observation(cfg.clone(), 1.0)).unwrap_err();
        assert_eq!((err.status(), err.code()), (409, "protocol_violation"));
        assert_eq!(svc.observe("task-9999", observation(cfg, 1.0)).unwrap_err().status(), 404);
        let s = svc.suggestion(&id).unwrap();
        assert_eq!(svc.suggestion(&id).unwrap().config, s.config, "suggestion is idempotent");
        assert_eq!(svc.observe(&id, observation(s.config.clone(), f64::NAN)).unwrap_err().status(), 400);
        svc.observe(&id, observation(s.config, 1.0)).unwrap();
    }

    #[test]
    fn maximized_objectives_are_reported_as_given() {
        let svc = TuningService::in_memory(Settings::default());
        let id = svc.create(request(json!({"orientation": "maximize"}))).unwrap().task_id;
        for y in [3.0, 7.0, 5.0] {
            let s = svc.suggestion(&id).unwrap();
            svc.observe(&id, observation(s.config, y)).unwrap();
        }
        let v = svc.status(&id).unwrap();
        assert_eq!(v.best_objective, Some(7.0));
        assert_eq!(v.best_so_far, vec![3.0, 7.0, 7.0]);
        assert_eq!(v.improvement_ratio, Some(7.0 / 5.0));
    }

    #[test]
    fn stop_is_idempotent() {
        let svc = TuningService::in_memory(Settings::default());
        let id = svc.create(request(json!({}))).unwrap().task_id;
        let s = svc.suggestion(&id).unwrap();
        svc.observe(&id, observation(s.config, 2.0)).unwrap();
        let a = svc.stop(&id).unwrap();
        let b = svc.stop(&id).unwrap();
        assert_eq!(a.status, Status::StoppedByUser);
        assert_eq!(serde_json::to_value(&a).unwrap(), serde_json::to_value(&b).unwrap());
        assert_eq!(svc.suggestion(&id).unwrap_err().status(), 409);
        assert_eq!(svc.extend_budget(&id, BudgetRequest { extra_search: 5 }).unwrap_err().status(), 409);
    }

    #[test]
    fn sessions_survive_a_restart() {
        let dir = tempfile::tempdir().unwrap();
        let id = {
            let (svc, skipped) = TuningService::open(Store::open(dir.path()).unwrap(), Settings::default()).unwrap();
            assert!(skipped.is_empty());
            let id = svc.create(request(json!({"seed": 4}))).unwrap().task_id;
            for y in [4.0, 3.0] {
                let s = svc.suggestion(&id).unwrap();
                svc.observe(&id, observation(s.config, y)).unwrap();
            }
            svc.suggestion(&id).unwrap();
            id
        };
        let (svc, _) = TuningService::open(Store::open(dir.path()).unwrap(), Settings::default()).unwrap();
        let v = svc.status(&id).unwrap();
        assert_eq!(v.iterations, 2);
        assert_eq!(v.history.len(), 2);
        assert!(v.outstanding.is_some());
        let next = svc.create(request(json!({}))).unwrap().task_id;
        assert_ne!(next, id);
    }
}
