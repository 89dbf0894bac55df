//! Survey protocol engine.
//!
//! A respondent works through `iterations` rounds. Each round shows a panel of
//! `panel_size` designs drawn from the pool and records the subset the
//! respondent grouped as similar. After the last round a closing questionnaire
//! captures the criteria they used; earlier rounds stay readable but frozen.

mod catalog;
mod engine;
mod log;
mod session;

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use catalog::{Catalog, DesignItem};
pub use engine::SurveyEngine;
pub use log::{
    read_log, read_sessions, to_jsonl, EventLogWriter, LogError, LogRecord, SessionRecord,
};
pub use session::{Session, SessionState};

/// Dense index of a design in its catalog.
pub type DesignId = u32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SurveyError {
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("wrong state: {0}")]
    WrongState(String),
    #[error("invalid selection: {0}")]
    InvalidSelection(String),
    #[error("session {0} already exists")]
    DuplicateSession(String),
    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),
}

/// Opaque session identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(String);

impl SessionId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SessionId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// Protocol parameters for one respondent session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    /// Number of designs in the pool (N).
    pub pool_size: usize,
    /// Designs shown per iteration (k).
    pub panel_size: usize,
    /// Number of selection rounds (T).
    pub iterations: u32,
    pub rng_seed: u64,
    /// Draw the least-shown designs first (ties broken at random) instead of
    /// sampling uniformly.
    pub exposure_balanced: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            pool_size: 72,
            panel_size: 12,
            iterations: 10,
            rng_seed: 0,
            exposure_balanced: false,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SurveyError> {
        if self.panel_size < 2 {
            return Err(SurveyError::InvalidConfig(format!(
                "panel_size must be at least 2, got {}",
                self.panel_size
            )));
        }
        if self.panel_size > self.pool_size {
            return Err(SurveyError::InvalidConfig(format!(
                "panel_size {} exceeds pool_size {}",
                self.panel_size, self.pool_size
            )));
        }
        if self.iterations == 0 {
            return Err(SurveyError::InvalidConfig(
                "iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One completed round: the panel that was shown and the subset grouped as
/// similar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionEvent {
    pub session_id: SessionId,
    pub iteration_index: u32,
    pub shown: Vec<DesignId>,
    pub selected: Vec<DesignId>,
    pub recorded_at: DateTime<Utc>,
}

impl SelectionEvent {
    /// Structural checks that hold for every event the engine accepts:
    /// iteration index from 1, distinct shown ids, distinct selected ids that
    /// are all shown, and (when `pool_size` is given) every id in range.
    pub fn check(&self, pool_size: Option<usize>) -> Result<(), String> {
        if self.iteration_index == 0 {
            return Err("iteration_index starts at 1".into());
        }
        if let Some(n) = pool_size {
            if let Some(&id) = self.shown.iter().find(|&&id| id as usize >= n) {
                return Err(format!("shown id {id} out of range for pool of {n}"));
            }
        }
        if has_duplicates(&self.shown) {
            return Err("shown contains duplicate ids".into());
        }
        if has_duplicates(&self.selected) {
            return Err("selected contains duplicate ids".into());
        }
        if let Some(id) = self.selected.iter().find(|id| !self.shown.contains(id)) {
            return Err(format!("selected id {id} was not shown"));
        }
        Ok(())
    }
}

fn has_duplicates(ids: &[DesignId]) -> bool {
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).any(|w| w[0] == w[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occupation {
    Architect,
    Student,
    #[serde(alias = "civil engineer")]
    CivilEngineer,
    #[serde(alias = "urban planner")]
    UrbanPlanner,
    Other,
}

/// The closing form: the criteria the respondent used, plus optional
/// demographics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionnaireResponse {
    pub session_id: SessionId,
    pub criteria_text: String,
    pub age: Option<u32>,
    pub occupation: Option<Occupation>,
}
