//! File-backed knowledge store.
//!
//! ```text
//! <root>/store.json                     schema marker
//! <root>/tasks/<id>/record.json         task record, checksummed
//! <root>/tasks/<id>/observations.jsonl  append log, "<sha256>\t<json>" per line
//! <root>/models/similarity.json         similarity regressor, checksummed
//! <root>/sessions/<id>/spec.json        tuning sessions of the service
//! <root>/sessions/<id>/state.json
//! ```
//!
//! Whole documents are written to a temporary file and renamed into place,
//! so readers only ever see committed versions. A torn last line of an
//! observation log (a crash mid-append) is ignored; a checksum mismatch
//! anywhere else is an integrity error for that task only.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gp::Observation;
use crate::transfer::{SimilarityModel, TaskRecord};
use crate::tuner::{TaskSpec, TunerState};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("integrity check failed for {path}: {detail}")]
    Integrity { path: PathBuf, detail: String },
    #[error("invalid identifier `{0}`")]
    BadId(String),
    #[error("store schema version {found} is not supported (expected {SCHEMA_VERSION})")]
    Schema { found: u32 },
    #[error("write failed for {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("read failed for {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    schema_version: u32,
    kind: String,
    checksum: String,
    body: Value,
}

#[derive(Serialize, Deserialize)]
struct Marker {
    schema_version: u32,
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    /// Opens the store at `root`, creating the layout if needed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for dir in ["tasks", "models", "sessions"] {
            let p = root.join(dir);
            fs::create_dir_all(&p).map_err(|source| StoreError::Write { path: p, source })?;
        }
        let marker = root.join("store.json");
        if marker.exists() {
            let text = fs::read_to_string(&marker).map_err(|source| StoreError::Read { path: marker.clone(), source })?;
            let m: Marker = serde_json::from_str(&text)
                .map_err(|e| StoreError::Integrity { path: marker.clone(), detail: e.to_string() })?;
            if m.schema_version != SCHEMA_VERSION {
                return Err(StoreError::Schema { found: m.schema_version });
            }
        } else {
            let text = serde_json::to_string(&Marker { schema_version: SCHEMA_VERSION }).unwrap();
            write_atomic(&marker, text.as_bytes())?;
        }
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn schema_version(&self) -> u32 {
        SCHEMA_VERSION
    }

    fn task_dir(&self, id: &str) -> Result<PathBuf, StoreError> {
        check_id(id)?;
        Ok(self.root.join("tasks").join(id))
    }

    fn session_dir(&self, id: &str) -> Result<PathBuf, StoreError> {
        check_id(id)?;
        Ok(self.root.join("sessions").join(id))
    }

    /// Writes the record and resets its observation log to the record's
    /// observations. An existing task with the same id is replaced.
    pub fn save_task(&self, record: &TaskRecord) -> Result<String, StoreError> {
        let dir = self.task_dir(record.task_id())?;
        fs::create_dir_all(&dir).map_err(|source| StoreError::Write { path: dir.clone(), source })?;
        let mut log = Vec::new();
        for o in record.observations() {
            log.extend_from_slice(log_line(o).as_bytes());
        }
        write_atomic(&dir.join("observations.jsonl"), &log)?;
        write_document(&dir.join("record.json"), "task_record", record)?;
        Ok(record.task_id().to_string())
    }

    pub fn load_task(&self, id: &str) -> Result<TaskRecord, StoreError> {
        let dir = self.task_dir(id)?;
        let path = dir.join("record.json");
        if !path.exists() {
            return Err(StoreError::NotFound(id.to_string()));
        }
        read_document(&path, "task_record")
    }

    /// Every observation logged for the task, in append order.
    pub fn load_observations(&self, id: &str) -> Result<Vec<Observation>, StoreError> {
        let dir = self.task_dir(id)?;
        if !dir.join("record.json").exists() {
            return Err(StoreError::NotFound(id.to_string()));
        }
        read_log(&dir.join("observations.jsonl"))
    }

    pub fn append_observation(&self, id: &str, observation: &Observation) -> Result<(), StoreError> {
        let dir = self.task_dir(id)?;
        if !dir.join("record.json").exists() {
            return Err(StoreError::NotFound(id.to_string()));
        }
        append_line(&dir.join("observations.jsonl"), &log_line(observation))
    }

    pub fn list_tasks(&self) -> Result<Vec<String>, StoreError> {
        list_dirs(&self.root.join("tasks"), "record.json")
    }

    /// Loads every task that passes its integrity check; broken ones are
    /// returned separately instead of failing the whole read.
    pub fn load_history(&self) -> Result<(Vec<TaskRecord>, Vec<(String, StoreError)>), StoreError> {
        let mut ok = Vec::new();
        let mut bad = Vec::new();
        for id in self.list_tasks()? {
            match self.load_task(&id) {
                Ok(r) => ok.push(r),
                Err(e) => bad.push((id, e)),
            }
        }
        Ok((ok, bad))
    }

    pub fn save_similarity(&self, model: &SimilarityModel) -> Result<(), StoreError> {
        write_document(&self.root.join("models").join("similarity.json"), "similarity_model", model)
    }

    pub fn load_similarity(&self) -> Result<Option<SimilarityModel>, StoreError> {
        let path = self.root.join("models").join("similarity.json");
        if !path.exists() {
            return Ok(None);
        }
        read_document(&path, "similarity_model").map(Some)
    }

    pub fn save_session(&self, spec: &TaskSpec, state: &TunerState) -> Result<(), StoreError> {
        let dir = self.session_dir(&spec.task_id)?;
        fs::create_dir_all(&dir).map_err(|source| StoreError::Write { path: dir.clone(), source })?;
        if !dir.join("spec.json").exists() {
            write_document(&dir.join("spec.json"), "task_spec", spec)?;
        }
        write_document(&dir.join("state.json"), "tuner_state", state)
    }

    pub fn load_session(&self, id: &str) -> Result<(TaskSpec, TunerState), StoreError> {
        let dir = self.session_dir(id)?;
        if !dir.join("spec.json").exists() {
            return Err(StoreError::NotFound(id.to_string()));
        }
        Ok((read_document(&dir.join("spec.json"), "task_spec")?, read_document(&dir.join("state.json"), "tuner_state")?))
    }

    /// Stores an additional document `<name>.json` next to a session, for
    /// data the tuner itself does not keep (e.g. service-side trajectories).
    pub fn save_session_extra<T: Serialize>(&self, id: &str, name: &str, value: &T) -> Result<(), StoreError> {
        check_id(name)?;
        let dir = self.session_dir(id)?;
        if !dir.join("spec.json").exists() {
            return Err(StoreError::NotFound(id.to_string()));
        }
        write_document(&dir.join(format!("{name}.json")), name, value)
    }

    pub fn load_session_extra<T: DeserializeOwned>(&self, id: &str, name: &str) -> Result<T, StoreError> {
        check_id(name)?;
        let path = self.session_dir(id)?.join(format!("{name}.json"));
        if !path.exists() {
            return Err(StoreError::NotFound(format!("{id}/{name}")));
        }
        read_document(&path, name)
    }

    pub fn list_sessions(&self) -> Result<Vec<String>, StoreError> {
        list_dirs(&self.root.join("sessions"), "spec.json")
    }
}

/// Ids become directory names, so they are restricted to a safe alphabet.
fn check_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '#'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::BadId(id.to_string()))
    }
}

fn list_dirs(dir: &Path, required: &str) -> Result<Vec<String>, StoreError> {
    let entries = fs::read_dir(dir).map_err(|source| StoreError::Read { path: dir.to_path_buf(), source })?;
    let mut out = Vec::new();
    for e in entries {
        let e = e.map_err(|source| StoreError::Read { path: dir.to_path_buf(), source })?;
        if e.path().join(required).exists() {
            if let Some(name) = e.file_name().to_str() {
                out.push(name.to_string());
            }
        }
    }
    out.sort();
    Ok(out)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let err = |source| StoreError::Write { path: path.to_path_buf(), source };
    let dir = path.parent().expect("store paths have a parent");
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(bytes).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

fn write_document<T: Serialize>(path: &Path, kind: &str, value: &T) -> Result<(), StoreError> {
    let body = serde_json::to_value(value).expect("store types serialize");
    let checksum = digest(serde_json::to_string(&body).unwrap().as_bytes());
    let env = Envelope { schema_version: SCHEMA_VERSION, kind: kind.to_string(), checksum, body };
    write_atomic(path, serde_json::to_string_pretty(&env).unwrap().as_bytes())
}

fn read_document<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T, StoreError> {
    let integrity = |detail: String| StoreError::Integrity { path: path.to_path_buf(), detail };
    let text = fs::read_to_string(path).map_err(|source| match source.kind() {
        io::ErrorKind::InvalidData => integrity("not valid UTF-8".into()),
        _ => StoreError::Read { path: path.to_path_buf(), source },
    })?;
    let env: Envelope = serde_json::from_str(&text).map_err(|e| integrity(e.to_string()))?;
    if env.schema_version != SCHEMA_VERSION {
        return Err(StoreError::Schema { found: env.schema_version });
    }
    if env.kind != kind {
        return Err(integrity(format!("expected a {kind} document, found {}", env.kind)));
    }
    if digest(serde_json::to_string(&env.body).unwrap().as_bytes()) != env.checksum {
        return Err(integrity("checksum mismatch".into()));
    }
    serde_json::from_value(env.body).map_err(|e| integrity(e.to_string()))
}

fn log_line(o: &Observation) -> String {
    let json = serde_json::to_string(o).expect("observations serialize");
    format!("{}\t{}\n", digest(json.as_bytes()), json)
}

fn append_line(path: &Path, line: &str) -> Result<(), StoreError> {
    let err = |source| StoreError::Write { path: path.to_path_buf(), source };
    // drop a torn tail first so the new record starts on its own line
    if let Ok(bytes) = fs::read(path) {
        if !bytes.is_empty() && bytes.last() != Some(&b'\n') {
            let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
            write_atomic(path, &bytes[..keep])?;
        }
    }
    let mut f: File = OpenOptions::new().create(true).append(true).open(path).map_err(err)?;
    f.write_all(line.as_bytes()).map_err(err)?;
    f.sync_all().map_err(err)
}

fn read_log(path: &Path) -> Result<Vec<Observation>, StoreError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => return Err(StoreError::Read { path: path.to_path_buf(), source }),
    };
    // only newline-terminated lines are committed
    let committed = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
    let text = std::str::from_utf8(&bytes[..committed])
        .map_err(|_| StoreError::Integrity { path: path.to_path_buf(), detail: "not valid UTF-8".into() })?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let integrity = |detail: &str| StoreError::Integrity { path: path.to_path_buf(), detail: format!("line {}: {detail}", i + 1) };
            let (sum, json) = line.split_once('\t').ok_or_else(|| integrity("missing checksum"))?;
            if digest(json.as_bytes()) != sum {
                return Err(integrity("checksum mismatch"));
            }
            serde_json::from_str(json).map_err(|e| integrity(&e.to_string()))
        })
        .collect()
}
