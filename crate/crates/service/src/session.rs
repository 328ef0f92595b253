//! Sessions on disk: `<root>/<id>/session.json` plus `<root>/<id>/trace/`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use attrib_core::prompt::{render_prompt, PromptParts};
use attrib_core::trace::{read_trace, Segment, Trace};
use serde::{Deserialize, Serialize};

pub const SESSION_FILE: &str = "session.json";
pub const TRACE_DIR: &str = "trace";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Extracting,
    Ready,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub schema_version: u32,
    pub session_id: String,
    pub document: String,
    pub question: String,
    /// Answer supplied by the client; `None` when generated.
    pub given_answer: Option<String>,
    pub template_id: String,
    pub created_unix_ms: u128,
    pub status: SessionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SessionRecord {
    pub fn new(session_id: String, document: String, question: String, given_answer: Option<String>, template_id: String) -> Self {
        Self {
            schema_version: 1,
            session_id,
            document,
            question,
            given_answer,
            template_id,
            created_unix_ms: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis()),
            status: SessionStatus::Extracting,
            error: None,
        }
    }
}

/// A ready session's trace with the prompt offsets of its document and
/// answer.
#[derive(Debug)]
pub struct LoadedTrace {
    pub trace: Trace,
    pub document_offset: usize,
    pub answer_offset: usize,
    pub answer: String,
}

impl LoadedTrace {
    pub fn new(trace: Trace, record: &SessionRecord) -> Self {
        let tokens = trace.tokens();
        let answer: String = tokens
            .iter()
            .filter(|t| t.segment == Segment::Answer)
            .map(|t| t.text.as_str())
            .collect();
        let prompt = trace.prompt();
        let first = |seg: Segment| tokens.iter().find(|t| t.segment == seg).map(|t| t.char_start);
        let parts = PromptParts {
            document: record.document.clone(),
            question: record.question.clone(),
            answer: answer.clone(),
            template_id: trace.manifest.prompt_template_id.clone(),
        };
        let (document_offset, answer_offset) = match render_prompt(&parts) {
            Ok(r) if r.text == prompt => (r.document.start, r.answer.start),
            _ => (
                first(Segment::Document).unwrap_or(0),
                first(Segment::Answer).unwrap_or(prompt.len()),
            ),
        };
        Self { trace, document_offset, answer_offset, answer }
    }
}

#[derive(Debug)]
pub struct Session {
    pub record: SessionRecord,
    pub trace: Option<LoadedTrace>,
}

#[derive(Debug)]
pub struct SessionStore {
    root: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

impl SessionStore {
    /// Loads every session under `root`. Sessions left extracting by a
    /// previous process are marked failed.
    pub fn open(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let store = Self { root, sessions: RwLock::new(HashMap::new()) };
        let mut entries: Vec<PathBuf> = fs::read_dir(&store.root)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(SESSION_FILE).is_file())
            .collect();
        entries.sort();
        for dir in entries {
            let record: SessionRecord = match fs::read(dir.join(SESSION_FILE))
                .ok()
                .and_then(|b| serde_json::from_slice(&b).ok())
            {
                Some(r) => r,
                None => {
                    log::warn!("skipping unreadable session in {}", dir.display());
                    continue;
                }
            };
            let session = store.load(record);
            if session.record.status == SessionStatus::Failed {
                store.persist(&session.record)?;
            }
            store.insert(session);
        }
        Ok(store)
    }

    fn load(&self, mut record: SessionRecord) -> Session {
        let mut trace = None;
        match record.status {
            SessionStatus::Ready => match read_trace(self.trace_dir(&record.session_id)) {
                Ok(t) => trace = Some(LoadedTrace::new(t, &record)),
                Err(e) => {
                    record.status = SessionStatus::Failed;
                    record.error = Some(format!("trace unreadable: {e}"));
                }
            },
            SessionStatus::Extracting => {
                record.status = SessionStatus::Failed;
                record.error = Some("extraction interrupted by a restart".into());
            }
            SessionStatus::Failed => {}
        }
        Session { record, trace }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn trace_dir(&self, id: &str) -> PathBuf {
        self.session_dir(id).join(TRACE_DIR)
    }

    pub fn persist(&self, record: &SessionRecord) -> std::io::Result<()> {
        let dir = self.session_dir(&record.session_id);
        fs::create_dir_all(&dir)?;
        let tmp = dir.join(format!("{SESSION_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_vec_pretty(record)?)?;
        fs::rename(tmp, dir.join(SESSION_FILE))
    }

    pub fn insert(&self, session: Session) -> Arc<Session> {
        let session = Arc::new(session);
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(session.record.session_id.clone(), session.clone());
        session
    }

    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions.read().unwrap_or_else(|e| e.into_inner()).get(id).cloned()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reads the freshly written trace of `record` and stores the outcome.
    pub fn complete(&self, mut record: SessionRecord, outcome: Result<(), String>) -> std::io::Result<Arc<Session>> {
        let session = match outcome {
            Ok(()) => {
                record.status = SessionStatus::Ready;
                self.load(record)
            }
            Err(e) => {
                record.status = SessionStatus::Failed;
                record.error = Some(e);
                Session { record, trace: None }
            }
        };
        self.persist(&session.record)?;
        Ok(self.insert(session))
    }
}
