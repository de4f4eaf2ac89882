//! Single-file persistence for policies, assessments, chat state, settings
//! and the activity log, plus the coalescing assessment cache.

mod cache;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cache::{AssessmentCache, CacheOutcome, PipelineError};

use crate::acquisition::PolicyDocument;
use crate::assessment::PolicyAssessment;
use crate::conversation::{ChatScope, ChatThread};
use crate::llm::UserSettings;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("database error: {0}")]
    Sqlite(#[from] rusqlite::Error),
    #[error("corrupt stored record: {0}")]
    Json(#[from] serde_json::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PanelOpened,
    PanelClosed,
    QuestionAsked,
    SuggestionUsed,
    SettingsChanged,
    AssessmentRequested,
    PolicyViewed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityEvent {
    pub at: DateTime<Utc>,
    pub kind: EventKind,
    #[serde(default)]
    pub payload: BTreeMap<String, serde_json::Value>,
}

impl ActivityEvent {
    pub fn new(at: DateTime<Utc>, kind: EventKind) -> Self {
        Self {
            at,
            kind,
            payload: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.payload.insert(key.to_string(), value.into());
        self
    }
}

/// SHA-256 of the policy text, used to notice changed policies.
pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS assessments (
    domain TEXT PRIMARY KEY,
    json TEXT NOT NULL,
    created_at TEXT NOT NULL,
    model_id TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS policies (
    domain TEXT PRIMARY KEY,
    json TEXT NOT NULL,
    content_hash TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS threads (
    domain TEXT NOT NULL,
    scope TEXT NOT NULL,
    json TEXT NOT NULL,
    PRIMARY KEY (domain, scope)
);
CREATE TABLE IF NOT EXISTS settings (
    id INTEGER PRIMARY KEY CHECK (id = 1),
    json TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS carryover (
    scope TEXT PRIMARY KEY,
    question TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS events (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    at TEXT NOT NULL,
    kind TEXT NOT NULL,
    payload TEXT NOT NULL
);
";

pub struct Store {
    conn: Mutex<Connection>,
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::init(Connection::open(path)?)
    }

    pub fn in_memory() -> Result<Self, StoreError> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self, StoreError> {
        conn.pragma_update(None, "journal_mode", "WAL").ok();
        conn.pragma_update(None, "synchronous", "NORMAL")?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self { conn: Mutex::new(conn) })
    }

    fn with<T>(&self, f: impl FnOnce(&Connection) -> Result<T, StoreError>) -> Result<T, StoreError> {
        let conn = self.conn.lock().unwrap_or_else(|e| e.into_inner());
        f(&conn)
    }

    pub fn put_assessment(&self, assessment: &PolicyAssessment) -> Result<(), StoreError> {
        let json = serde_json::to_string(assessment)?;
        self.with(|c| {
            c.execute(
                "INSERT INTO assessments (domain, json, created_at, model_id) VALUES (?1, ?2, ?3, ?4)
                 ON CONFLICT(domain) DO UPDATE SET json = excluded.json,
                     created_at = excluded.created_at, model_id = excluded.model_id",
                params![
                    assessment.domain,
                    json,
                    assessment.created_at.to_rfc3339(),
                    assessment.model_id
                ],
            )?;
            Ok(())
        })
    }

    pub fn get_assessment(&self, domain: &str) -> Result<Option<PolicyAssessment>, StoreError> {
        let json: Option<String> = self.with(|c| {
            Ok(
                c.query_row("SELECT json FROM assessments WHERE domain = ?1", [domain], |r| r.get(0))
                    .optional()?,
            )
        })?;
        Ok(json.map(|j| serde_json::from_str(&j)).transpose()?)
    }

    pub fn delete_assessment(&self, domain: &str) -> Result<(), StoreError> {
        self.with(|c| {
            c.execute("DELETE FROM assessments WHERE domain = ?1", [domain])?;
            Ok(())
        })
    }

    pub fn put_policy(&self, policy: &PolicyDocument) -> Result<(), StoreError> {
        let json = serde_json::to_string(policy)?;
        let hash = content_hash(&policy.text);
        self.with(|c| {
            c.execute(
                "INSERT INTO policies (domain, json, content_hash) VALUES (?1, ?2, ?3)
                 ON CONFLICT(domain) DO UPDATE SET json = excluded.json, content_hash = excluded.content_hash",
                params![policy.domain, json, hash],
            )?;
            Ok(())
        })
    }

    pub fn get_policy(&self, domain: &str) -> Result<Option<PolicyDocument>, StoreError> {
        let json: Option<String> = self.with(|c| {
            Ok(
                c.query_row("SELECT json FROM policies WHERE domain = ?1", [domain], |r| r.get(0))
                    .optional()?,
            )
        })?;
        Ok(json.map(|j| serde_json::from_str(&j)).transpose()?)
    }

    pub fn policy_hash(&self, domain: &str) -> Result<Option<String>, StoreError> {
        self.with(|c| {
            Ok(
                c.query_row("SELECT content_hash FROM policies WHERE domain = ?1", [domain], |r| {
                    r.get(0)
                })
                .optional()?,
            )
        })
    }

    /// All threads of a domain in creation order; empty for unknown domains.
    pub fn get_threads(&self, domain: &str) -> Result<Vec<ChatThread>, StoreError> {
        let rows: Vec<String> = self.with(|c| {
            let mut stmt = c.prepare("SELECT json FROM threads WHERE domain = ?1 ORDER BY rowid")?;
            let rows = stmt
                .query_map([domain], |r| r.get(0))?
                .collect::<Result<Vec<String>, _>>()?;
            Ok(rows)
        })?;
        rows.iter()
            .map(|j| serde_json::from_str(j).map_err(StoreError::from))
            .collect()
    }

    pub fn get_thread(&self, domain: &str, scope: &ChatScope) -> Result<Option<ChatThread>, StoreError> {
        let json: Option<String> = self.with(|c| {
            Ok(c.query_row(
                "SELECT json FROM threads WHERE domain = ?1 AND scope = ?2",
                params![domain, scope.key()],
                |r| r.get(0),
            )
            .optional()?)
        })?;
        Ok(json.map(|j| serde_json::from_str(&j)).transpose()?)
    }

    pub fn put_thread(&self, thread: &ChatThread) -> Result<(), StoreError> {
        let json = serde_json::to_string(thread)?;
        self.with(|c| {
            c.execute(
                "INSERT INTO threads (domain, scope, json) VALUES (?1, ?2, ?3)
                 ON CONFLICT(domain, scope) DO UPDATE SET json = excluded.json",
                params![thread.domain, thread.scope.key(), json],
            )?;
            Ok(())
        })
    }

    /// Removes every thread of `domain`. Returns how many were removed.
    pub fn delete_threads(&self, domain: &str) -> Result<usize, StoreError> {
        self.with(|c| Ok(c.execute("DELETE FROM threads WHERE domain = ?1", [domain])?))
    }

    /// Stored settings, or the defaults when none were saved.
    pub fn get_settings(&self) -> Result<UserSettings, StoreError> {
        let json: Option<String> = self.with(|c| {
            Ok(c.query_row("SELECT json FROM settings WHERE id = 1", [], |r| r.get(0))
                .optional()?)
        })?;
        Ok(json.map(|j| serde_json::from_str(&j)).transpose()?.unwrap_or_default())
    }

    pub fn put_settings(&self, settings: &UserSettings) -> Result<(), StoreError> {
        let json = serde_json::to_string(settings)?;
        self.with(|c| {
            c.execute(
                "INSERT INTO settings (id, json) VALUES (1, ?1)
                 ON CONFLICT(id) DO UPDATE SET json = excluded.json",
                [json],
            )?;
            Ok(())
        })
    }

    pub fn get_carryover(&self, scope: &ChatScope) -> Result<Option<String>, StoreError> {
        self.with(|c| {
            Ok(
                c.query_row("SELECT question FROM carryover WHERE scope = ?1", [scope.key()], |r| {
                    r.get(0)
                })
                .optional()?,
            )
        })
    }

    pub fn put_carryover(&self, scope: &ChatScope, question: &str) -> Result<(), StoreError> {
        self.with(|c| {
            c.execute(
                "INSERT INTO carryover (scope, question) VALUES (?1, ?2)
                 ON CONFLICT(scope) DO UPDATE SET question = excluded.question",
                params![scope.key(), question],
            )?;
            Ok(())
        })
    }

    /// Appends an event. Timestamps are clamped so the log never goes
    /// backwards in time.
    pub fn log_event(&self, event: &ActivityEvent) -> Result<(), StoreError> {
        let payload = serde_json::to_string(&event.payload)?;
        let kind = serde_json::to_value(event.kind)?
            .as_str()
            .unwrap_or_default()
            .to_string();
        self.with(|c| {
            let last: Option<String> = c
                .query_row("SELECT at FROM events ORDER BY seq DESC LIMIT 1", [], |r| r.get(0))
                .optional()?;
            let last = last.and_then(|s| DateTime::parse_from_rfc3339(&s).ok());
            let at = match last {
                Some(last) if last > event.at => last.with_timezone(&Utc),
                _ => event.at,
            };
            c.execute(
                "INSERT INTO events (at, kind, payload) VALUES (?1, ?2, ?3)",
                params![at.to_rfc3339(), kind, payload],
            )?;
            Ok(())
        })
    }

    pub fn events(&self) -> Result<Vec<ActivityEvent>, StoreError> {
        let rows: Vec<(String, String, String)> = self.with(|c| {
            let mut stmt = c.prepare("SELECT at, kind, payload FROM events ORDER BY seq")?;
            let rows = stmt
                .query_map([], |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)))?
                .collect::<Result<Vec<_>, _>>()?;
            Ok(rows)
        })?;
        rows.into_iter()
            .map(|(at, kind, payload)| {
                Ok(ActivityEvent {
                    at: serde_json::from_value(serde_json::Value::String(at))?,
                    kind: serde_json::from_value(serde_json::Value::String(kind))?,
                    payload: serde_json::from_str(&payload)?,
                })
            })
            .collect()
    }

    /// Writes the event log as newline-delimited JSON, oldest first.
    pub fn export_events_ndjson(&self, mut out: impl Write) -> Result<usize, StoreError> {
        let events = self.events()?;
        for event in &events {
            serde_json::to_writer(&mut out, event)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(events.len())
    }
}
