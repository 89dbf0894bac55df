use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{
    DesignId, QuestionnaireResponse, SelectionEvent, SessionConfig, SessionId, SurveyError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum SessionState {
    InProgress { next_iteration: u32 },
    AwaitingQuestionnaire,
    Completed,
}

/// One respondent's pass through the protocol.
///
/// All randomness comes from a ChaCha stream seeded by the config seed and the
/// session id, so a session rebuilt from the same inputs draws the same panels.
#[derive(Debug, Clone)]
pub struct Session {
    id: SessionId,
    config: SessionConfig,
    catalog_version: String,
    state: SessionState,
    events: Vec<SelectionEvent>,
    questionnaire: Option<QuestionnaireResponse>,
    pending_panel: Option<Vec<DesignId>>,
    exposure: Vec<u32>,
    rng: ChaCha8Rng,
}

/// Mixes the configured seed with a hash of the session id.
pub(crate) fn session_seed(rng_seed: u64, id: &SessionId) -> u64 {
    let digest = Sha256::digest(id.as_str().as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    rng_seed.wrapping_add(u64::from_le_bytes(bytes))
}

impl Session {
    pub fn new(
        id: SessionId,
        config: SessionConfig,
        catalog_version: impl Into<String>,
    ) -> Result<Self, SurveyError> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(session_seed(config.rng_seed, &id));
        Ok(Self {
            id,
            config,
            catalog_version: catalog_version.into(),
            state: SessionState::InProgress { next_iteration: 1 },
            events: Vec::new(),
            questionnaire: None,
            pending_panel: None,
            exposure: vec![0; config.pool_size],
            rng,
        })
    }

    pub fn id(&self) -> &SessionId {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn catalog_version(&self) -> &str {
        &self.catalog_version
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn events(&self) -> &[SelectionEvent] {
        &self.events
    }

    pub fn questionnaire(&self) -> Option<&QuestionnaireResponse> {
        self.questionnaire.as_ref()
    }

    fn pending_iteration(&self) -> Result<u32, SurveyError> {
        match self.state {
            SessionState::InProgress { next_iteration } => Ok(next_iteration),
            other => Err(SurveyError::WrongState(format!(
                "session {} is {other:?}, not in progress",
                self.id
            ))),
        }
    }

    /// The panel for the pending iteration. Drawn on first call and stored,
    /// so repeated calls before a selection is recorded return the same ids.
    pub fn next_panel(&mut self) -> Result<&[DesignId], SurveyError> {
        self.pending_iteration()?;
        if self.pending_panel.is_none() {
            let panel = self.draw_panel();
            self.pending_panel = Some(panel);
        }
        Ok(self.pending_panel.as_deref().unwrap_or_default())
    }

    fn draw_panel(&mut self) -> Vec<DesignId> {
        let n = self.config.pool_size;
        let k = self.config.panel_size;
        if self.config.exposure_balanced {
            let mut ids: Vec<usize> = (0..n).collect();
            ids.shuffle(&mut self.rng);
            // stable: shuffled order breaks ties among equally exposed ids
            ids.sort_by_key(|&id| self.exposure[id]);
            ids.truncate(k);
            ids.into_iter().map(|id| id as DesignId).collect()
        } else {
            rand::seq::index::sample(&mut self.rng, n, k)
                .into_iter()
                .map(|id| id as DesignId)
                .collect()
        }
    }

    /// Validates a selection for the pending iteration and builds its event
    /// without advancing the session. Pair with [`Session::apply_selection`]
    /// once the event is durably stored.
    pub fn prepare_selection(
        &mut self,
        iteration_index: u32,
        selected: &[DesignId],
        recorded_at: DateTime<Utc>,
    ) -> Result<SelectionEvent, SurveyError> {
        let pending = self.pending_iteration()?;
        if iteration_index != pending {
            return Err(SurveyError::WrongState(format!(
                "iteration {iteration_index} submitted but iteration {pending} is pending"
            )));
        }
        let shown = self.next_panel()?.to_vec();
        let event = SelectionEvent {
            session_id: self.id.clone(),
            iteration_index,
            shown,
            selected: selected.to_vec(),
            recorded_at,
        };
        event
            .check(Some(self.config.pool_size))
            .map_err(SurveyError::InvalidSelection)?;
        Ok(event)
    }

    /// Commits an event built by [`Session::prepare_selection`].
    pub fn apply_selection(&mut self, event: SelectionEvent) -> Result<(), SurveyError> {
        let pending = self.pending_iteration()?;
        if event.iteration_index != pending || event.session_id != self.id {
            return Err(SurveyError::WrongState(format!(
                "event for {} iteration {} does not match pending iteration {pending}",
                event.session_id, event.iteration_index
            )));
        }
        if self.pending_panel.as_deref() != Some(event.shown.as_slice()) {
            return Err(SurveyError::ReplayMismatch(format!(
                "session {} iteration {pending}: shown panel differs from the drawn panel",
                self.id
            )));
        }
        event
            .check(Some(self.config.pool_size))
            .map_err(SurveyError::InvalidSelection)?;
        for &id in &event.shown {
            self.exposure[id as usize] += 1;
        }
        self.pending_panel = None;
        self.events.push(event);
        self.state = if pending >= self.config.iterations {
            SessionState::AwaitingQuestionnaire
        } else {
            SessionState::InProgress {
                next_iteration: pending + 1,
            }
        };
        Ok(())
    }

    pub fn record_selection(
        &mut self,
        iteration_index: u32,
        selected: &[DesignId],
        recorded_at: DateTime<Utc>,
    ) -> Result<SelectionEvent, SurveyError> {
        let event = self.prepare_selection(iteration_index, selected, recorded_at)?;
        self.apply_selection(event.clone())?;
        Ok(event)
    }

    /// Checks that a questionnaire would be accepted right now.
    pub fn check_questionnaire(&self, response: &QuestionnaireResponse) -> Result<(), SurveyError> {
        if response.session_id != self.id {
            return Err(SurveyError::InvalidSelection(format!(
                "questionnaire for {} sent to session {}",
                response.session_id, self.id
            )));
        }
        match self.state {
            SessionState::AwaitingQuestionnaire => Ok(()),
            other => Err(SurveyError::WrongState(format!(
                "session {} is {other:?}; questionnaire accepted only after the last iteration",
                self.id
            ))),
        }
    }

    pub fn record_questionnaire(
        &mut self,
        response: QuestionnaireResponse,
    ) -> Result<(), SurveyError> {
        self.check_questionnaire(&response)?;
        self.questionnaire = Some(response);
        self.state = SessionState::Completed;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn at() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
    }

    fn config(n: usize, k: usize, t: u32) -> SessionConfig {
        SessionConfig {
            pool_size: n,
            panel_size: k,
            iterations: t,
            rng_seed: 7,
            exposure_balanced: false,
        }
    }

    fn questionnaire(id: &str) -> QuestionnaireResponse {
        QuestionnaireResponse {
            session_id: id.into(),
            criteria_text: "room layout".into(),
            age: Some(30),
            occupation: None,
        }
    }

    #[test]
    fn default_protocol_starts_in_progress() {
        let s = Session::new("a".into(), SessionConfig::default(), "v").unwrap();
        assert_eq!(s.state(), SessionState::InProgress { next_iteration: 1 });
    }

    #[test]
    fn panel_equal_to_pool_is_valid() {
        let mut s = Session::new("a".into(), config(12, 12, 1), "v").unwrap();
        let mut panel = s.next_panel().unwrap().to_vec();
        panel.sort_unstable();
        assert_eq!(panel, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn panel_larger_than_pool_is_rejected() {
        let err = Session::new("a".into(), config(10, 12, 10), "v").unwrap_err();
        assert!(matches!(err, SurveyError::InvalidConfig(_)));
        assert!(Session::new("a".into(), config(10, 1, 10), "v").is_err());
        assert!(Session::new("a".into(), config(10, 5, 0), "v").is_err());
    }

    #[test]
    fn panel_is_distinct_in_range_and_idempotent() {
        let mut s = Session::new("a".into(), SessionConfig::default(), "v").unwrap();
        let first = s.next_panel().unwrap().to_vec();
        let second = s.next_panel().unwrap().to_vec();
        assert_eq!(first, second);
        assert_eq!(first.len(), 12);
        assert!(first.iter().all(|&id| id < 72));
        let mut sorted = first.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 12);
    }

    #[test]
    fn selection_advances_and_rejects_unshown_ids() {
        let mut s = Session::new("a".into(), config(72, 12, 2), "v").unwrap();
        let panel = s.next_panel().unwrap().to_vec();
        let unshown = (0..72).find(|id| !panel.contains(id)).unwrap();
        let err = s
            .record_selection(1, &[panel[0], unshown], at())
            .unwrap_err();
        assert!(matches!(err, SurveyError::InvalidSelection(_)));
        assert_eq!(s.state(), SessionState::InProgress { next_iteration: 1 });

        let event = s.record_selection(1, &panel[..3], at()).unwrap();
        assert_eq!(event.selected, panel[..3].to_vec());
        assert_eq!(s.state(), SessionState::InProgress { next_iteration: 2 });

        let err = s.record_selection(1, &[], at()).unwrap_err();
        assert!(matches!(err, SurveyError::WrongState(_)));
        s.record_selection(2, &[], at()).unwrap();
        assert_eq!(s.state(), SessionState::AwaitingQuestionnaire);
        assert!(matches!(s.next_panel(), Err(SurveyError::WrongState(_))));
    }

    #[test]
    fn duplicate_selected_ids_are_rejected() {
        let mut s = Session::new("a".into(), config(20, 5, 1), "v").unwrap();
        let p = s.next_panel().unwrap().to_vec();
        assert!(s.record_selection(1, &[p[0], p[0]], at()).is_err());
    }

    #[test]
    fn questionnaire_ordering() {
        let mut s = Session::new("a".into(), config(20, 5, 10), "v").unwrap();
        for i in 1..=9 {
            s.record_selection(i, &[], at()).unwrap();
        }
        assert!(matches!(
            s.record_questionnaire(questionnaire("a")),
            Err(SurveyError::WrongState(_))
        ));
        s.record_selection(10, &[], at()).unwrap();
        s.record_questionnaire(questionnaire("a")).unwrap();
        assert_eq!(s.state(), SessionState::Completed);
        assert!(matches!(
            s.record_questionnaire(questionnaire("a")),
            Err(SurveyError::WrongState(_))
        ));
        assert!(s.record_selection(11, &[], at()).is_err());
        assert_eq!(s.events().len(), 10);
    }

    #[test]
    fn same_seed_and_id_draw_same_panels() {
        let mut a = Session::new("x".into(), config(72, 12, 3), "v").unwrap();
        let mut b = Session::new("x".into(), config(72, 12, 3), "v").unwrap();
        let mut c = Session::new("y".into(), config(72, 12, 3), "v").unwrap();
        for i in 1..=3 {
            let pa = a.next_panel().unwrap().to_vec();
            assert_eq!(pa, b.next_panel().unwrap());
            if i == 1 {
                assert_ne!(pa, c.next_panel().unwrap());
            }
            a.record_selection(i, &pa[..2], at()).unwrap();
            b.record_selection(i, &pa[..2], at()).unwrap();
        }
        assert_eq!(a.events(), b.events());
    }

    #[test]
    fn exposure_balanced_mode_covers_pool_before_repeating() {
        let mut cfg = config(24, 6, 4);
        cfg.exposure_balanced = true;
        let mut s = Session::new("a".into(), cfg, "v").unwrap();
        let mut seen = Vec::new();
        for i in 1..=4 {
            seen.extend(s.next_panel().unwrap().to_vec());
            s.record_selection(i, &[], at()).unwrap();
        }
        seen.sort_unstable();
        assert_eq!(seen, (0..24).collect::<Vec<_>>());
    }
}
