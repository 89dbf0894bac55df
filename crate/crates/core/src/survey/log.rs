//! JSONL event log: one record per line, append-only.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{QuestionnaireResponse, SelectionEvent, SessionConfig, SessionId};

/// A line of the event log. Selection lines carry exactly
/// `{session_id, iteration_index, shown, selected, recorded_at}`; questionnaire
/// lines carry `{session_id, criteria_text, age, occupation}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogRecord {
    Selection(SelectionEvent),
    Questionnaire(QuestionnaireResponse),
}

impl LogRecord {
    pub fn session_id(&self) -> &SessionId {
        match self {
            LogRecord::Selection(e) => &e.session_id,
            LogRecord::Questionnaire(q) => &q.session_id,
        }
    }

    pub fn as_selection(&self) -> Option<&SelectionEvent> {
        match self {
            LogRecord::Selection(e) => Some(e),
            LogRecord::Questionnaire(_) => None,
        }
    }
}

/// Session creation record, kept in a separate manifest so the event log
/// itself holds only selections and questionnaires.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRecord {
    pub session_id: SessionId,
    pub catalog_version: String,
    pub config: SessionConfig,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl LogError {
    /// 1-based line number of a schema violation.
    pub fn line(&self) -> Option<usize> {
        match self {
            LogError::Schema { line, .. } => Some(*line),
            LogError::Io(_) => None,
        }
    }
}

/// Parses a JSONL log. Blank lines are skipped. Selection lines are checked
/// structurally (see [`SelectionEvent::check`]) against `pool_size` when
/// given.
pub fn read_log<R: BufRead>(
    reader: R,
    pool_size: Option<usize>,
) -> Result<Vec<LogRecord>, LogError> {
    read_jsonl(reader, |record: &LogRecord| match record {
        LogRecord::Selection(event) => event.check(pool_size),
        LogRecord::Questionnaire(_) => Ok(()),
    })
}

/// Parses a session manifest (one [`SessionRecord`] per line).
pub fn read_sessions<R: BufRead>(reader: R) -> Result<Vec<SessionRecord>, LogError> {
    read_jsonl(reader, |_: &SessionRecord| Ok(()))
}

pub(crate) fn read_jsonl<R, T, F>(reader: R, check: F) -> Result<Vec<T>, LogError>
where
    R: BufRead,
    T: for<'de> Deserialize<'de>,
    F: Fn(&T) -> Result<(), String>,
{
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| LogError::Schema {
            line: idx + 1,
            message: e.to_string(),
        })?;
        check(&record).map_err(|message| LogError::Schema {
            line: idx + 1,
            message,
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Append-only JSONL writer. Every append is flushed and synced before it
/// returns.
#[derive(Debug)]
pub struct EventLogWriter {
    path: PathBuf,
    file: File,
}

impl EventLogWriter {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append<T: Serialize>(&mut self, record: &T) -> io::Result<()> {
        let mut line = serde_json::to_vec(record).map_err(io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        self.file.sync_data()
    }
}

/// Serializes records as JSONL into a byte buffer.
pub fn to_jsonl<'a, T: Serialize + 'a>(records: impl IntoIterator<Item = &'a T>) -> Vec<u8> {
    let mut out = Vec::new();
    for record in records {
        serde_json::to_writer(&mut out, record).expect("log records serialize");
        out.push(b'\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survey::Occupation;
    use chrono::TimeZone;

    fn event() -> SelectionEvent {
        SelectionEvent {
            session_id: "s1".into(),
            iteration_index: 1,
            shown: vec![3, 1, 2],
            selected: vec![1, 2],
            recorded_at: Utc.with_ymd_and_hms(2024, 5, 1, 12, 0, 0).unwrap(),
        }
    }

    #[test]
    fn selection_line_has_exact_fields() {
        let line = String::from_utf8(to_jsonl([&LogRecord::Selection(event())])).unwrap();
        assert_eq!(
            line,
            "{\"session_id\":\"s1\",\"iteration_index\":1,\"shown\":[3,1,2],\"selected\":[1,2],\"recorded_at\":\"2024-05-01T12:00:00Z\"}\n"
        );
    }

    #[test]
    fn questionnaire_line_round_trips_with_nulls() {
        let q = LogRecord::Questionnaire(QuestionnaireResponse {
            session_id: "s1".into(),
            criteria_text: "circulation".into(),
            age: None,
            occupation: Some(Occupation::UrbanPlanner),
        });
        let bytes = to_jsonl([&q]);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains("\"age\":null"));
        assert!(text.contains("\"occupation\":\"urban_planner\""));
        let back = read_log(bytes.as_slice(), None).unwrap();
        assert_eq!(back, vec![q]);
    }

    #[test]
    fn reports_line_numbers_on_schema_violations() {
        let good = String::from_utf8(to_jsonl([&LogRecord::Selection(event())])).unwrap();
        let input = format!("{good}\n{{\"session_id\":\"s1\",\"bogus\":1}}\n");
        let err = read_log(input.as_bytes(), None).unwrap_err();
        assert_eq!(err.line(), Some(3));

        let mut bad = event();
        bad.selected = vec![9];
        let input = String::from_utf8(to_jsonl([&LogRecord::Selection(bad)])).unwrap();
        assert_eq!(
            read_log(input.as_bytes(), None).unwrap_err().line(),
            Some(1)
        );

        let input = good.clone();
        assert_eq!(
            read_log(input.as_bytes(), Some(3)).unwrap_err().line(),
            Some(1)
        );
        assert!(read_log(input.as_bytes(), Some(4)).is_ok());
    }

    #[test]
    fn writer_appends_lines() {
        let dir = std::env::temp_dir().join(format!("coselect-log-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("events.jsonl");
        let _ = std::fs::remove_file(&path);
        let mut w = EventLogWriter::open(&path).unwrap();
        w.append(&LogRecord::Selection(event())).unwrap();
        w.append(&LogRecord::Selection(event())).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
