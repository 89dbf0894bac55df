//! Durable storage for the survey service: `sessions.jsonl` (one
//! [`SessionRecord`] per created session) and `events.jsonl` (the selection
//! and questionnaire log). Both are append-only and replayed on startup.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, Read};
use std::path::{Path, PathBuf};

use coselect_core::survey::{
    read_log, read_sessions, Catalog, EventLogWriter, LogError, LogRecord, SessionRecord,
    SurveyEngine, SurveyError,
};
use serde::Serialize;

pub const SESSIONS_FILE: &str = "sessions.jsonl";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const CATALOG_FILE: &str = "catalog.json";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Log { path: PathBuf, source: LogError },
    #[error("{path}: {source}")]
    Catalog { path: PathBuf, source: SurveyError },
    #[error("replay failed: {0}")]
    Replay(#[from] SurveyError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Drops a trailing partial line left by a crash mid-append. Such a record
/// was never acknowledged, so discarding it loses nothing a client saw.
fn truncate_torn_tail(path: &Path) -> io::Result<()> {
    let mut file = match OpenOptions::new().read(true).write(true).open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(e),
    };
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    tracing::warn!(path = %path.display(), dropped = bytes.len() - keep, "discarding torn final record");
    file.set_len(keep as u64)?;
    file.sync_data()
}

fn read_records<T>(
    path: &Path,
    parse: impl FnOnce(BufReader<File>) -> Result<T, LogError>,
) -> Result<Option<T>, StoreError> {
    match File::open(path) {
        Ok(f) => parse(BufReader::new(f))
            .map(Some)
            .map_err(|source| StoreError::Log {
                path: path.to_path_buf(),
                source,
            }),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(path)(e)),
    }
}

/// Open log files of a data directory.
#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    sessions: EventLogWriter,
    events: EventLogWriter,
}

impl Store {
    /// Opens (creating if needed) `dir`, loads or writes its catalog, and
    /// replays both logs into `engine`. Returns the store and the catalog.
    pub fn open(
        dir: impl AsRef<Path>,
        engine: &SurveyEngine,
        default_pool: usize,
    ) -> Result<(Self, Catalog), StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;

        let catalog_path = dir.join(CATALOG_FILE);
        let catalog = match fs::read_to_string(&catalog_path) {
            Ok(text) => Catalog::from_json(&text).map_err(|source| StoreError::Catalog {
                path: catalog_path.clone(),
                source,
            })?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                let catalog = Catalog::placeholder(default_pool);
                fs::write(&catalog_path, catalog.to_json()).map_err(io_err(&catalog_path))?;
                catalog
            }
            Err(e) => return Err(io_err(&catalog_path)(e)),
        };
        engine.add_catalog(catalog.clone());

        let sessions_path = dir.join(SESSIONS_FILE);
        let events_path = dir.join(EVENTS_FILE);
        for path in [&sessions_path, &events_path] {
            truncate_torn_tail(path).map_err(io_err(path))?;
        }
        let sessions = read_records(&sessions_path, read_sessions)?.unwrap_or_default();
        let records: Vec<LogRecord> =
            read_records(&events_path, |r| read_log(r, None))?.unwrap_or_default();
        engine.replay(&sessions, &records)?;
        tracing::info!(
            dir = %dir.display(),
            sessions = sessions.len(),
            records = records.len(),
            "replayed data directory"
        );

        Ok((
            Self {
                sessions: EventLogWriter::open(&sessions_path).map_err(io_err(&sessions_path))?,
                events: EventLogWriter::open(&events_path).map_err(io_err(&events_path))?,
                dir,
            },
            catalog,
        ))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append_session(&mut self, record: &SessionRecord) -> io::Result<()> {
        self.sessions.append(record)
    }

    pub fn append_event<T: Serialize>(&mut self, record: &T) -> io::Result<()> {
        self.events.append(record)
    }
}
