use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use anyhow::Context;
use axum::http::StatusCode;
use interplay_core::calibration::Calibration;
use interplay_core::session::{parse_journal, replay, JournalEntry, Session, SessionError};
use interplay_core::sketcher::LoadedModel;
use serde_json::{json, Value};
use tokio::sync::{broadcast, Mutex};

use crate::config::ServiceConfig;
use crate::error::{ApiError, ApiResult};

const EVENT_BUFFER: usize = 256;

/// The JSON state returned by `GET /sessions/{id}` and by `replay`.
pub fn session_view(session: &Session) -> Value {
    let mut v = serde_json::to_value(session).expect("session serializes");
    let obj = v.as_object_mut().expect("session is an object");
    obj.insert("next_player".into(), json!(session.next_player()));
    obj.insert("event_count".into(), json!(session.journal().len()));
    obj.insert("stats".into(), json!(session.contribution_stats()));
    v
}

/// Stream message for one journal entry: `{event, round, payload}`.
pub fn event_message(entry: &JournalEntry) -> Value {
    let mut event = serde_json::to_value(&entry.event).expect("event serializes");
    let payload = event
        .as_object_mut()
        .and_then(|o| o.remove("payload"))
        .unwrap_or(Value::Null);
    json!({ "event": entry.event.name(), "round": entry.round, "payload": payload })
}

pub fn valid_session_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

/// Append-only JSONL journals, one file per session.
#[derive(Debug, Clone)]
pub struct JournalStore {
    dir: PathBuf,
}

impl JournalStore {
    pub fn open(dir: impl Into<PathBuf>) -> anyhow::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir })
    }

    pub fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    fn write_line(file: &mut File, entry: &JournalEntry) -> std::io::Result<()> {
        let mut line = entry.to_line();
        line.push('\n');
        file.write_all(line.as_bytes())?;
        file.sync_data()
    }

    /// Starts a new journal; fails if one exists for the id.
    pub fn create(&self, id: &str, first: &JournalEntry) -> std::io::Result<()> {
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(self.path(id))?;
        Self::write_line(&mut f, first)
    }

    pub fn append(&self, id: &str, entry: &JournalEntry) -> std::io::Result<()> {
        let mut f = OpenOptions::new().append(true).open(self.path(id))?;
        Self::write_line(&mut f, entry)
    }

    /// Replays every journal in the directory. A final line without its
    /// newline is the remains of an interrupted append: it is cut off and the
    /// file rewritten before replay.
    pub fn load_all(&self) -> anyhow::Result<Vec<Session>> {
        let mut paths: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        paths.iter().map(|p| load_journal(p)).collect()
    }
}

fn load_journal(path: &Path) -> anyhow::Result<Session> {
    let mut text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if !text.is_empty() && !text.ends_with('\n') {
        let keep = text.rfind('\n').map_or(0, |i| i + 1);
        tracing::warn!(path = %path.display(), "dropping torn final journal line");
        text.truncate(keep);
        fs::write(path, &text)?;
    }
    let entries = parse_journal(&text).with_context(|| format!("parsing {}", path.display()))?;
    let session = replay(&entries).with_context(|| format!("replaying {}", path.display()))?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    anyhow::ensure!(
        session.id == stem,
        "{} holds session {:?}",
        path.display(),
        session.id
    );
    Ok(session)
}

pub struct SessionSlot {
    pub session: Mutex<Session>,
    pub events: broadcast::Sender<Value>,
}

impl SessionSlot {
    fn new(session: Session) -> Arc<Self> {
        Arc::new(Self {
            session: Mutex::new(session),
            events: broadcast::channel(EVENT_BUFFER).0,
        })
    }
}

pub struct AppState {
    pub config: ServiceConfig,
    pub model: LoadedModel,
    pub calibration: RwLock<Option<Calibration>>,
    store: JournalStore,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
}

impl AppState {
    /// Loads the checkpoint and calibration, then replays stored journals.
    pub fn open(config: ServiceConfig) -> anyhow::Result<Arc<Self>> {
        config.validate()?;
        let model = LoadedModel::load(&config.checkpoint)
            .with_context(|| format!("loading checkpoint {}", config.checkpoint.display()))?;
        let calibration = match &config.calibration {
            Some(p) if p.exists() => {
                let text =
                    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Some(
                    Calibration::from_json(&text)
                        .with_context(|| format!("parsing {}", p.display()))?,
                )
            }
            Some(p) => {
                if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(parent)?;
                }
                None
            }
            None => None,
        };
        Self::with_model(config, model, calibration)
    }

    pub fn with_model(
        config: ServiceConfig,
        model: LoadedModel,
        calibration: Option<Calibration>,
    ) -> anyhow::Result<Arc<Self>> {
        let store = JournalStore::open(config.sessions_dir())?;
        let sessions = store
            .load_all()?
            .into_iter()
            .map(|s| (s.id.clone(), SessionSlot::new(s)))
            .collect::<HashMap<_, _>>();
        tracing::info!(sessions = sessions.len(), checkpoint = %model.id, "state loaded");
        Ok(Arc::new(Self {
            config,
            model,
            calibration: RwLock::new(calibration),
            store,
            sessions: RwLock::new(sessions),
        }))
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("sessions lock").len()
    }

    pub fn slot(&self, id: &str) -> ApiResult<Arc<SessionSlot>> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))
    }

    pub fn insert(&self, session: Session) -> ApiResult<Value> {
        if !valid_session_id(&session.id) {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_input",
                "session ids are 1-64 characters of letters, digits, '-' and '_'",
            ));
        }
        let mut map = self.sessions.write().expect("sessions lock");
        if map.contains_key(&session.id) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "session_exists",
                format!("session {:?} already exists", session.id),
            ));
        }
        self.store
            .create(&session.id, &session.journal()[0])
            .map_err(|e| ApiError::internal(format!("writing journal: {e}")))?;
        let view = session_view(&session);
        map.insert(session.id.clone(), SessionSlot::new(session));
        Ok(view)
    }

    /// Runs `op` on a copy of the session, appends the resulting entry to the
    /// journal, then installs the copy and publishes the event. The state is
    /// untouched if either step fails.
    pub async fn mutate<F>(&self, id: &str, op: F) -> ApiResult<(Value, JournalEntry)>
    where
        F: FnOnce(&mut Session) -> Result<JournalEntry, SessionError>,
    {
        let slot = self.slot(id)?;
        let mut guard = slot.session.lock().await;
        let mut next = guard.clone();
        let entry = op(&mut next)?;
        self.store
            .append(id, &entry)
            .map_err(|e| ApiError::internal(format!("writing journal: {e}")))?;
        *guard = next;
        // no subscribers is fine
        let _ = slot.events.send(event_message(&entry));
        Ok((session_view(&guard), entry))
    }

    pub fn journal_path(&self, id: &str) -> PathBuf {
        self.store.path(id)
    }
}
