//! JSON Lines journal: one `{type, round, payload, timestamp}` object per
//! line.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Event, Session, SessionError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Line", into = "Line")]
pub struct JournalEntry {
    pub event: Event,
    /// Number of completed rounds when the event happened.
    pub round: usize,
    pub timestamp: String,
}

#[derive(Serialize, Deserialize)]
struct Line {
    #[serde(rename = "type")]
    kind: String,
    round: usize,
    payload: Value,
    timestamp: String,
}

impl From<JournalEntry> for Line {
    fn from(e: JournalEntry) -> Self {
        let mut v = serde_json::to_value(&e.event).expect("events serialize");
        Line {
            kind: e.event.name().to_string(),
            round: e.round,
            payload: v.get_mut("payload").map(Value::take).unwrap_or(Value::Null),
            timestamp: e.timestamp,
        }
    }
}

impl TryFrom<Line> for JournalEntry {
    type Error = serde_json::Error;

    fn try_from(l: Line) -> Result<Self, Self::Error> {
        let event =
            serde_json::from_value(serde_json::json!({"type": l.kind, "payload": l.payload}))?;
        Ok(JournalEntry {
            event,
            round: l.round,
            timestamp: l.timestamp,
        })
    }
}

impl JournalEntry {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("journal entries serialize")
    }
}

pub fn to_jsonl(entries: &[JournalEntry]) -> String {
    entries.iter().map(|e| e.to_line() + "\n").collect()
}

/// Parses a journal; blank lines are skipped and errors carry the 1-based
/// line number.
pub fn parse_journal(text: &str) -> Result<Vec<JournalEntry>, SessionError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| SessionError::Journal {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Folds a journal into the session it describes.
pub fn replay(entries: &[JournalEntry]) -> Result<Session, SessionError> {
    let wrap = |index: usize| {
        move |e: SessionError| SessionError::Replay {
            index,
            source: Box::new(e),
        }
    };
    let first = entries
        .first()
        .ok_or_else(|| SessionError::InvalidInput("journal is empty".into()))?;
    let mut session = Session::from_created(first).map_err(wrap(0))?;
    for (i, e) in entries.iter().enumerate().skip(1) {
        session.apply(e).map_err(wrap(i))?;
    }
    Ok(session)
}
