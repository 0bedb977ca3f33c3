//! Central records memory: the per-session store of what the patient has
//! said, what was asked, and where the consultation stands.
//!
//! Every update appends entity triples to the turn-indexed history, so the
//! history alone is enough to audit a consultation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::canonical::to_canonical_json;
use crate::kg::{EntityId, EntityKind, KnowledgeGraph};
use crate::nlu::{LinkedEntity, Polarity};

/// Opaque session identifier. Never derived from patient content.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(String);

impl SessionId {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConsultationPhase {
    Elicitation,
    Examination,
    DrugRecommendation,
    Closed,
}

impl ConsultationPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            ConsultationPhase::Elicitation => "Elicitation",
            ConsultationPhase::Examination => "Examination",
            ConsultationPhase::DrugRecommendation => "DrugRecommendation",
            ConsultationPhase::Closed => "Closed",
        }
    }
}

impl fmt::Display for ConsultationPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `Unknown` is what [`CrmState::status_of`] reports for symptoms that are
/// absent from the status map; it is never stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymptomStatus {
    Confirmed,
    Denied,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    HasSymptomConfirmed,
    HasSymptomDenied,
    SuspectedDisease,
    ConfirmedDisease,
    RecommendedExamination,
    RecommendedDrug,
    /// A non-symptom entity the patient mentioned.
    Mentioned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripleObject {
    Entity(EntityId),
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: Relation,
    pub object: TripleObject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnTriples {
    pub turn: u32,
    pub triples: Vec<Triple>,
}

/// Subject of every patient-side triple.
pub const PATIENT: &str = "patient";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CrmError {
    #[error("session is closed")]
    SessionClosed,
    #[error("operation needs phase {expected}, session is in {actual}")]
    WrongPhase { expected: ConsultationPhase, actual: ConsultationPhase },
    #[error("`{0}` is not a candidate disease")]
    NotACandidate(EntityId),
    #[error("cannot move from {from} back to {to}")]
    PhaseRegression { from: ConsultationPhase, to: ConsultationPhase },
    #[error("symptom `{0}` has already been answered")]
    AlreadyAnswered(EntityId),
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("malformed snapshot: {0}")]
    Json(#[from] serde_json::Error),
    #[error("snapshot violates an invariant: {0}")]
    Invariant(&'static str),
}

/// Side information from [`CrmState::record_entities`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordDiagnostics {
    /// Symptoms whose new answer contradicted an earlier one; the earlier
    /// answer was kept.
    pub conflicts: Vec<EntityId>,
    pub answered_pending: Option<(EntityId, SymptomStatus)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrmState {
    pub session_id: SessionId,
    pub phase: ConsultationPhase,
    pub symptom_status: BTreeMap<EntityId, SymptomStatus>,
    pub pending_symptom: Option<EntityId>,
    /// Symptoms that were answered while pending.
    pub asked_symptoms: BTreeSet<EntityId>,
    pub candidate_diseases: BTreeSet<EntityId>,
    pub confirmed_disease: Option<EntityId>,
    pub recommended_examinations: Vec<EntityId>,
    pub recommended_drugs: Vec<EntityId>,
    pub history: Vec<TurnTriples>,
    pub turn: u32,
}

impl CrmState {
    pub fn new(kg: &KnowledgeGraph, session_id: SessionId) -> Self {
        Self {
            session_id,
            phase: ConsultationPhase::Elicitation,
            symptom_status: BTreeMap::new(),
            pending_symptom: None,
            asked_symptoms: BTreeSet::new(),
            candidate_diseases: kg.disease_ids().cloned().collect(),
            confirmed_disease: None,
            recommended_examinations: Vec::new(),
            recommended_drugs: Vec::new(),
            history: Vec::new(),
            turn: 0,
        }
    }

    pub fn status_of(&self, symptom: &EntityId) -> SymptomStatus {
        self.symptom_status.get(symptom).copied().unwrap_or(SymptomStatus::Unknown)
    }

    fn with_status(&self, wanted: SymptomStatus) -> BTreeSet<EntityId> {
        self.symptom_status.iter().filter(|(_, s)| **s == wanted).map(|(id, _)| id.clone()).collect()
    }

    pub fn confirmed(&self) -> BTreeSet<EntityId> {
        self.with_status(SymptomStatus::Confirmed)
    }

    pub fn denied(&self) -> BTreeSet<EntityId> {
        self.with_status(SymptomStatus::Denied)
    }

    fn ensure_open(&self) -> Result<(), CrmError> {
        if self.phase == ConsultationPhase::Closed {
            Err(CrmError::SessionClosed)
        } else {
            Ok(())
        }
    }

    fn ensure_phase(&self, expected: ConsultationPhase) -> Result<(), CrmError> {
        self.ensure_open()?;
        if self.phase != expected {
            return Err(CrmError::WrongPhase { expected, actual: self.phase });
        }
        Ok(())
    }

    /// Appends to the history entry of `turn`, creating it if needed.
    fn push_triple(&mut self, turn: u32, relation: Relation, object: EntityId) {
        let triple = Triple { subject: EntityId::new(PATIENT), relation, object: TripleObject::Entity(object) };
        match self.history.last_mut() {
            Some(last) if last.turn == turn => last.triples.push(triple),
            _ => self.history.push(TurnTriples { turn, triples: alloc::vec![triple] }),
        }
    }

    /// Turn that reasoning results belong to: the one most recently recorded.
    fn reasoning_turn(&self) -> u32 {
        self.turn.saturating_sub(1)
    }

    /// Stores this turn's linked entities and advances the turn counter.
    ///
    /// The first answer about a symptom wins; a contradicting later answer is
    /// reported in the diagnostics and otherwise ignored.
    pub fn record_entities(&mut self, linked: &[LinkedEntity]) -> Result<RecordDiagnostics, CrmError> {
        self.ensure_open()?;
        let turn = self.turn;
        let mut diagnostics = RecordDiagnostics::default();
        if self.history.last().map_or(true, |last| last.turn != turn) {
            self.history.push(TurnTriples { turn, triples: Vec::new() });
        }
        for entity in linked {
            let relation = match (entity.kind, entity.polarity) {
                (EntityKind::Symptom, Polarity::Affirmed) => Relation::HasSymptomConfirmed,
                (EntityKind::Symptom, Polarity::Denied) => Relation::HasSymptomDenied,
                _ => Relation::Mentioned,
            };
            self.push_triple(turn, relation, entity.entity.clone());
            if entity.kind != EntityKind::Symptom {
                continue;
            }
            let status = match entity.polarity {
                Polarity::Affirmed => SymptomStatus::Confirmed,
                Polarity::Denied => SymptomStatus::Denied,
            };
            match self.symptom_status.get(&entity.entity) {
                Some(existing) if *existing != status => {
                    if !diagnostics.conflicts.contains(&entity.entity) {
                        diagnostics.conflicts.push(entity.entity.clone());
                    }
                }
                Some(_) => {}
                None => {
                    self.symptom_status.insert(entity.entity.clone(), status);
                }
            }
            if self.pending_symptom.as_ref() == Some(&entity.entity) {
                let pending = self.pending_symptom.take().expect("checked above");
                diagnostics.answered_pending = Some((pending.clone(), self.status_of(&pending)));
                self.asked_symptoms.insert(pending);
            }
        }
        self.turn += 1;
        Ok(diagnostics)
    }

    /// Narrows the candidate diseases to those sharing a confirmed symptom and
    /// not ruled out by a denied answer to an asked question. With no
    /// confirmed symptom every disease stays a candidate. The set never grows
    /// once a symptom is confirmed.
    pub fn update_candidates(&mut self, kg: &KnowledgeGraph) -> Result<(), CrmError> {
        self.ensure_phase(ConsultationPhase::Elicitation)?;
        let confirmed = self.confirmed();
        if confirmed.is_empty() {
            self.candidate_diseases = kg.disease_ids().cloned().collect();
            return Ok(());
        }
        let ruled_out: BTreeSet<&EntityId> = self
            .asked_symptoms
            .iter()
            .filter(|s| self.status_of(s) == SymptomStatus::Denied)
            .collect();
        let retained: BTreeSet<EntityId> = self
            .candidate_diseases
            .iter()
            .filter(|id| {
                kg.disease(id).is_some_and(|d| {
                    d.symptoms.iter().any(|s| confirmed.contains(s))
                        && !d.symptoms.iter().any(|s| ruled_out.contains(s))
                })
            })
            .cloned()
            .collect();
        if retained != self.candidate_diseases {
            let turn = self.reasoning_turn();
            for disease in &retained {
                self.push_triple(turn, Relation::SuspectedDisease, disease.clone());
            }
            self.candidate_diseases = retained;
        }
        Ok(())
    }

    /// Marks `symptom` as the question currently put to the patient.
    pub fn set_pending(&mut self, symptom: EntityId) -> Result<(), CrmError> {
        self.ensure_phase(ConsultationPhase::Elicitation)?;
        if self.symptom_status.contains_key(&symptom) {
            return Err(CrmError::AlreadyAnswered(symptom));
        }
        self.pending_symptom = Some(symptom);
        Ok(())
    }

    pub fn confirm_disease(&mut self, disease: EntityId) -> Result<(), CrmError> {
        self.ensure_phase(ConsultationPhase::Elicitation)?;
        if !self.candidate_diseases.contains(&disease) {
            return Err(CrmError::NotACandidate(disease));
        }
        let turn = self.reasoning_turn();
        self.push_triple(turn, Relation::ConfirmedDisease, disease.clone());
        self.confirmed_disease = Some(disease);
        self.pending_symptom = None;
        self.phase = ConsultationPhase::Examination;
        Ok(())
    }

    pub fn recommend_examinations(&mut self, examinations: &[EntityId]) -> Result<(), CrmError> {
        self.ensure_open()?;
        let turn = self.reasoning_turn();
        for exam in examinations {
            if !self.recommended_examinations.contains(exam) {
                self.recommended_examinations.push(exam.clone());
                self.push_triple(turn, Relation::RecommendedExamination, exam.clone());
            }
        }
        Ok(())
    }

    pub fn recommend_drugs(&mut self, drugs: &[EntityId]) -> Result<(), CrmError> {
        self.ensure_open()?;
        let turn = self.reasoning_turn();
        for drug in drugs {
            if !self.recommended_drugs.contains(drug) {
                self.recommended_drugs.push(drug.clone());
                self.push_triple(turn, Relation::RecommendedDrug, drug.clone());
            }
        }
        Ok(())
    }

    /// Moves the phase forward. Staying in the same phase is allowed.
    pub fn advance(&mut self, next: ConsultationPhase) -> Result<(), CrmError> {
        self.ensure_open()?;
        if next < self.phase {
            return Err(CrmError::PhaseRegression { from: self.phase, to: next });
        }
        if next > ConsultationPhase::Elicitation && self.confirmed_disease.is_none() {
            return Err(CrmError::WrongPhase { expected: ConsultationPhase::Elicitation, actual: next });
        }
        self.pending_symptom = None;
        self.phase = next;
        Ok(())
    }

    /// Canonical JSON: sorted keys, no insignificant whitespace. Identical
    /// states give identical bytes.
    pub fn snapshot(&self) -> String {
        to_canonical_json(self)
    }

    pub fn restore(document: &str) -> Result<Self, SnapshotError> {
        let state: CrmState = serde_json::from_str(document)?;
        state.check_invariants().map_err(SnapshotError::Invariant)?;
        Ok(state)
    }

    /// Checks the structural invariants that hold for every reachable state.
    pub fn check_invariants(&self) -> Result<(), &'static str> {
        if self.confirmed_disease.is_some() && self.phase == ConsultationPhase::Elicitation {
            return Err("confirmed disease during elicitation");
        }
        if self.symptom_status.values().any(|s| *s == SymptomStatus::Unknown) {
            return Err("unknown status stored explicitly");
        }
        if let Some(pending) = &self.pending_symptom {
            if self.symptom_status.contains_key(pending) {
                return Err("pending symptom already answered");
            }
        }
        if self.history.windows(2).any(|w| w[0].turn >= w[1].turn) {
            return Err("history turns not strictly increasing");
        }
        if self.history.last().is_some_and(|last| last.turn > self.turn) {
            return Err("history ahead of turn counter");
        }
        Ok(())
    }

    /// Checks `candidate_diseases` against a graph.
    pub fn check_candidates(&self, kg: &KnowledgeGraph) -> bool {
        self.candidate_diseases.iter().all(|d| kg.disease(d).is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::tests::small_graph;
    use crate::nlu::LinkedEntity;
    use alloc::vec;
    use alloc::vec::Vec;

    fn sid() -> SessionId {
        SessionId::new("s-1")
    }

    fn symptom(id: &str, polarity: Polarity) -> LinkedEntity {
        LinkedEntity::implied(id.into(), EntityKind::Symptom, polarity)
    }

    fn ids(list: &[&str]) -> BTreeSet<EntityId> {
        list.iter().map(|s| EntityId::from(*s)).collect()
    }

    #[test]
    fn new_session_is_empty() {
        let kg = small_graph();
        let state = CrmState::new(&kg, sid());
        assert_eq!(state.phase, ConsultationPhase::Elicitation);
        assert_eq!(state.turn, 0);
        assert_eq!(state.candidate_diseases.len(), kg.disease_count());
        assert!(state.history.is_empty() && state.symptom_status.is_empty());
    }

    #[test]
    fn empty_record_still_advances_turn() {
        let kg = small_graph();
        let mut state = CrmState::new(&kg, sid());
        let before = state.clone();
        state.record_entities(&[]).unwrap();
        assert_eq!(state.turn, 1);
        assert_eq!(state.history, vec![TurnTriples { turn: 0, triples: vec![] }]);
        assert_eq!(state.symptom_status, before.symptom_status);
    }

    #[test]
    fn denied_on_fresh_state() {
        let kg = small_graph();
        let mut state = CrmState::new(&kg, sid());
        state.record_entities(&[symptom("bloating", Polarity::Denied)]).unwrap();
        assert_eq!(state.symptom_status, [("bloating".into(), SymptomStatus::Denied)].into_iter().collect());
    }

    #[test]
    fn reaffirming_is_idempotent_but_logged() {
        let kg = small_graph();
        let mut state = CrmState::new(&kg, sid());
        state.record_entities(&[symptom("rash", Polarity::Affirmed)]).unwrap();
        let statuses = state.symptom_status.clone();
        state.record_entities(&[symptom("rash", Polarity::Affirmed)]).unwrap();
        assert_eq!(state.symptom_status, statuses);
        assert_eq!(state.history.len(), 2);
    }

    #[test]
    fn first_answer_wins() {
        let kg = small_graph();
        let mut state = CrmState::new(&kg, sid());
        state.record_entities(&[symptom("rash", Polarity::Affirmed)]).unwrap();
        let diag = state.record_entities(&[symptom("rash", Polarity::Denied)]).unwrap();
        assert_eq!(diag.conflicts, vec![EntityId::from("rash")]);
        assert_eq!(state.status_of(&"rash".into()), SymptomStatus::Confirmed);
    }

    #[test]
    fn pending_cleared_when_answered() {
        let kg = small_graph();
        let mut state = CrmState::new(&kg, sid());
        state.set_pending("melena".into()).unwrap();
        let diag = state.record_entities(&[symptom("melena", Polarity::Denied)]).unwrap();
        assert_eq!(diag.answered_pending, Some(("melena".into(), SymptomStatus::Denied)));
        assert!(state.pending_symptom.is_none());
        assert!(state.asked_symptoms.contains(&EntityId::from("melena")));
        assert_eq!(state.set_pending("melena".into()), Err(CrmError::AlreadyAnswered("melena".into())));
    }

    #[test]
    fn candidates_follow_confirmed_symptoms() {
        let kg = small_graph();
        let mut state = CrmState::new(&kg, sid());
        state.update_candidates(&kg).unwrap();
        assert_eq!(state.candidate_diseases.len(), kg.disease_count());
        state.record_entities(&[symptom("gassralgia", Polarity::Affirmed)]).unwrap();
        state.update_candidates(&kg).unwrap();
        assert_eq!(state.candidate_diseases, ids(&["gastritis", "gastric_ulcer", "gastric_cancer"]));
    }

    #[test]
    fn asked_denial_rules_out() {
        let kg = small_graph();
        let mut state = CrmState::new(&kg, sid());
        state.record_entities(&[symptom("gassralgia", Polarity::Affirmed)]).unwrap();
        state.update_candidates(&kg).unwrap();
        state.set_pending("melena".into()).unwrap();
        state.record_entities(&[symptom("melena", Polarity::Denied)]).unwrap();
        state.update_candidates(&kg).unwrap();
        assert_eq!(state.candidate_diseases, ids(&["gastritis"]));
        let once = state.candidate_diseases.clone();
        state.update_candidates(&kg).unwrap();
        assert_eq!(state.candidate_diseases, once);
    }

    #[test]
    fn incidental_denial_does_not_rule_out() {
        let kg = small_graph();
        let mut state = CrmState::new(&kg, sid());
        state
            .record_entities(&[symptom("gassralgia", Polarity::Affirmed), symptom("melena", Polarity::Denied)])
            .unwrap();
        state.update_candidates(&kg).unwrap();
        assert_eq!(state.candidate_diseases.len(), 3);
    }

    #[test]
    fn confirm_disease_rules() {
        let kg = small_graph();
        let mut state = CrmState::new(&kg, sid());
        state.record_entities(&[symptom("rash", Polarity::Affirmed)]).unwrap();
        state.update_candidates(&kg).unwrap();
        assert_eq!(state.candidate_diseases, ids(&["eczema"]));
        assert_eq!(state.confirm_disease("gastritis".into()), Err(CrmError::NotACandidate("gastritis".into())));
        state.confirm_disease("eczema".into()).unwrap();
        assert_eq!(state.phase, ConsultationPhase::Examination);
        assert_eq!(
            state.confirm_disease("eczema".into()),
            Err(CrmError::WrongPhase { expected: ConsultationPhase::Elicitation, actual: ConsultationPhase::Examination })
        );
        assert!(matches!(state.update_candidates(&kg), Err(CrmError::WrongPhase { .. })));
    }

    #[test]
    fn closed_session_rejects_updates_and_phases_never_regress() {
        let kg = small_graph();
        let mut state = CrmState::new(&kg, sid());
        assert!(state.advance(ConsultationPhase::Examination).is_err());
        state.record_entities(&[symptom("rash", Polarity::Affirmed)]).unwrap();
        state.update_candidates(&kg).unwrap();
        state.confirm_disease("eczema".into()).unwrap();
        state.advance(ConsultationPhase::DrugRecommendation).unwrap();
        assert_eq!(
            state.advance(ConsultationPhase::Examination),
            Err(CrmError::PhaseRegression {
                from: ConsultationPhase::DrugRecommendation,
                to: ConsultationPhase::Examination
            })
        );
        state.advance(ConsultationPhase::Closed).unwrap();
        assert_eq!(state.record_entities(&[]), Err(CrmError::SessionClosed));
    }

    #[test]
    fn history_turns_strictly_increase() {
        let kg = small_graph();
        let mut state = CrmState::new(&kg, sid());
        state.record_entities(&[symptom("gassralgia", Polarity::Affirmed)]).unwrap();
        state.update_candidates(&kg).unwrap();
        state.record_entities(&[]).unwrap();
        state.record_entities(&[symptom("bloating", Polarity::Affirmed)]).unwrap();
        let turns: Vec<u32> = state.history.iter().map(|t| t.turn).collect();
        assert_eq!(turns, vec![0, 1, 2]);
        assert!(state.history[0].triples.iter().any(|t| t.relation == Relation::SuspectedDisease));
    }

    #[test]
    fn snapshot_round_trip_and_canonical_form() {
        let kg = small_graph();
        let fresh = CrmState::new(&kg, sid());
        let doc = fresh.snapshot();
        assert!(doc.contains("\"phase\":\"Elicitation\""));
        assert!(doc.starts_with("{\"asked_symptoms\":[]"));
        let mut state = fresh.clone();
        state.record_entities(&[symptom("rash", Polarity::Affirmed)]).unwrap();
        state.update_candidates(&kg).unwrap();
        state.confirm_disease("eczema".into()).unwrap();
        state.recommend_examinations(&["gastroscopy".into()]).unwrap();
        state.advance(ConsultationPhase::Closed).unwrap();
        let doc = state.snapshot();
        let restored = CrmState::restore(&doc).unwrap();
        assert_eq!(restored, state);
        assert_eq!(restored.snapshot(), doc);
        assert_eq!(restored.history.len(), 1);
    }

    #[test]
    fn restore_rejects_broken_invariants() {
        let kg = small_graph();
        let mut state = CrmState::new(&kg, sid());
        state.confirmed_disease = Some("eczema".into());
        assert!(matches!(CrmState::restore(&state.snapshot()), Err(SnapshotError::Invariant(_))));
        assert!(matches!(CrmState::restore("{"), Err(SnapshotError::Json(_))));
    }
}
