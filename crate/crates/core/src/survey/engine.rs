use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};

use super::{Catalog, LogRecord, Session, SessionConfig, SessionId, SessionRecord, SurveyError};

/// Registry of catalogs and live sessions.
///
/// Sessions sit behind their own mutex: callers lock one session at a time,
/// so different sessions proceed concurrently while mutations to a single
/// session are serialized.
#[derive(Debug, Default)]
pub struct SurveyEngine {
    catalogs: RwLock<HashMap<String, Arc<Catalog>>>,
    sessions: RwLock<BTreeMap<SessionId, Arc<Mutex<Session>>>>,
    next_seq: AtomicU64,
}

impl SurveyEngine {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a catalog and returns its version id.
    pub fn add_catalog(&self, catalog: Catalog) -> String {
        let version = catalog.version().to_string();
        self.catalogs
            .write()
            .insert(version.clone(), Arc::new(catalog));
        version
    }

    pub fn catalog(&self, version: &str) -> Result<Arc<Catalog>, SurveyError> {
        self.catalogs
            .read()
            .get(version)
            .cloned()
            .ok_or_else(|| SurveyError::NotFound(format!("catalog {version}")))
    }

    /// Allocates the next sequential id (`s000001`, `s000002`, ...), skipping
    /// ids already in use.
    pub fn allocate_id(&self) -> SessionId {
        loop {
            let seq = self.next_seq.fetch_add(1, Ordering::SeqCst) + 1;
            let id = SessionId::new(format!("s{seq:06}"));
            if !self.sessions.read().contains_key(&id) {
                return id;
            }
        }
    }

    pub fn create_session(
        &self,
        config: SessionConfig,
        catalog_version: &str,
    ) -> Result<Arc<Mutex<Session>>, SurveyError> {
        let id = self.allocate_id();
        self.create_session_with_id(id, config, catalog_version)
    }

    pub fn create_session_with_id(
        &self,
        id: SessionId,
        config: SessionConfig,
        catalog_version: &str,
    ) -> Result<Arc<Mutex<Session>>, SurveyError> {
        config.validate()?;
        let catalog = self.catalog(catalog_version)?;
        if catalog.len() < config.pool_size {
            return Err(SurveyError::InvalidConfig(format!(
                "pool_size {} exceeds catalog size {}",
                config.pool_size,
                catalog.len()
            )));
        }
        let session = Arc::new(Mutex::new(Session::new(
            id.clone(),
            config,
            catalog_version,
        )?));
        let mut sessions = self.sessions.write();
        if sessions.contains_key(&id) {
            return Err(SurveyError::DuplicateSession(id.to_string()));
        }
        sessions.insert(id, session.clone());
        Ok(session)
    }

    pub fn session(&self, id: &SessionId) -> Result<Arc<Mutex<Session>>, SurveyError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| SurveyError::NotFound(format!("session {id}")))
    }

    pub fn session_ids(&self) -> Vec<SessionId> {
        self.sessions.read().keys().cloned().collect()
    }

    /// Rebuilds sessions from a session manifest and an event log. Panels are
    /// redrawn from the session seeds and must match the logged `shown` sets.
    pub fn replay(
        &self,
        sessions: &[SessionRecord],
        records: &[LogRecord],
    ) -> Result<(), SurveyError> {
        for rec in sessions {
            self.create_session_with_id(rec.session_id.clone(), rec.config, &rec.catalog_version)?;
        }
        for record in records {
            let handle = self.session(record.session_id())?;
            let mut session = handle.lock();
            match record {
                LogRecord::Selection(event) => {
                    session.next_panel()?;
                    session.apply_selection(event.clone())?;
                }
                LogRecord::Questionnaire(q) => session.record_questionnaire(q.clone())?,
            }
        }
        Ok(())
    }
}
