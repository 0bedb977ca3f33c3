//! Consultation orchestration.
//!
//! [`Engine::step`] runs one patient turn through the whole pipeline:
//! recognition and linking, records memory update, symptom selection or
//! treatment reasoning depending on the phase, prompt assembly and response
//! generation. Responses come from a [`Generator`]; the template backend is
//! always available and takes over when an external generator fails.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::canonical::to_canonical_json;
use crate::crm::{ConsultationPhase, CrmError, CrmState, SessionId, SnapshotError};
use crate::intents::{Answer, Intent, IntentLexicon};
use crate::kg::{DrugImage, EntityId, EntityKind, KnowledgeGraph};
use crate::nlu::{self, LinkedEntity, NluConfig, NluError, Polarity, TriageResult};
use crate::reasoner::{self, ReasonerError, SelectionOutcome};
use crate::record::{self, MedicalRecord, RecordError};
use crate::templates::{TemplateError, TemplateTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Speaker {
    Patient,
    System,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
    pub turn: u32,
    pub attachments: Vec<DrugImage>,
}

impl Utterance {
    fn new(speaker: Speaker, text: impl Into<String>, turn: u32) -> Self {
        Self { speaker, text: text.into(), turn, attachments: Vec::new() }
    }
}

/// The part an entity plays in a response. Doubles as the template slot name.
/// Declared in alphabetical order of the slot names, so the derived order
/// matches string order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    AskedSymptom,
    AvoidFood,
    ConfirmedDisease,
    ConfirmedSymptom,
    DeniedSymptom,
    Department,
    RecommendedDrug,
    RecommendedExamination,
    SuspectedDisease,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::AskedSymptom => "asked_symptom",
            Role::AvoidFood => "avoid_food",
            Role::ConfirmedDisease => "confirmed_disease",
            Role::ConfirmedSymptom => "confirmed_symptom",
            Role::DeniedSymptom => "denied_symptom",
            Role::Department => "department",
            Role::RecommendedDrug => "recommended_drug",
            Role::RecommendedExamination => "recommended_examination",
            Role::SuspectedDisease => "suspected_disease",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonedEntity {
    pub entity: EntityId,
    pub role: Role,
    pub name: String,
}

/// Everything a generator is conditioned on for one response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub history: Vec<Utterance>,
    #[serde(rename = "entities")]
    pub reasoned_entities: Vec<ReasonedEntity>,
    pub prefix_id: String,
}

/// What a system response does; together with the phase it selects the
/// template prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResponseKind {
    AskSymptom,
    Undecidable,
    RecommendExaminations,
    RecommendExaminationsNone,
    Clarify,
    RecommendDrugs,
    RecommendDrugsAvoidFood,
    NoDrugs,
    Farewell,
}

/// Template id for a response of `kind` emitted in `phase`.
pub fn prefix_for(phase: ConsultationPhase, kind: ResponseKind) -> Result<&'static str, TemplateError> {
    use ConsultationPhase as P;
    use ResponseKind as K;
    let id = match (phase, kind) {
        (P::Elicitation, K::AskSymptom) => "elicit.ask_symptom",
        (P::Elicitation, K::Undecidable) => "elicit.undecidable",
        (P::Examination, K::RecommendExaminations) => "exam.recommend",
        (P::Examination, K::RecommendExaminationsNone) => "exam.recommend_no_examination",
        (P::Examination, K::Clarify) => "exam.clarify",
        (P::DrugRecommendation, K::RecommendDrugs) => "drug.recommend",
        (P::DrugRecommendation, K::RecommendDrugsAvoidFood) => "drug.recommend_avoid_food",
        (P::DrugRecommendation, K::NoDrugs) => "drug.none",
        (P::Closed, K::Farewell) => "close.farewell",
        (phase, kind) => return Err(TemplateError::UnknownTemplate(alloc::format!("{phase}/{kind:?}"))),
    };
    Ok(id)
}

/// Assembles the prompt for one response: the last `history_window`
/// utterances, the reasoned entities ordered by role then id, and the prefix
/// template for `(phase, kind)`.
pub fn build_prompt(
    kg: &KnowledgeGraph,
    templates: &TemplateTable,
    phase: ConsultationPhase,
    kind: ResponseKind,
    history: &[Utterance],
    reasoned: &[(EntityId, Role)],
    history_window: usize,
) -> Result<PromptBundle, TemplateError> {
    let prefix_id = prefix_for(phase, kind)?;
    if !templates.contains(prefix_id) {
        return Err(TemplateError::UnknownTemplate(prefix_id.to_string()));
    }
    let mut pairs: Vec<&(EntityId, Role)> = reasoned.iter().collect();
    pairs.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    pairs.dedup();
    let reasoned_entities = pairs
        .into_iter()
        .map(|(id, role)| ReasonedEntity { entity: id.clone(), role: *role, name: kg.name_of(id).to_string() })
        .collect();
    let start = history.len().saturating_sub(history_window);
    Ok(PromptBundle { history: history[start..].to_vec(), reasoned_entities, prefix_id: prefix_id.to_string() })
}

/// Fills the bundle's prefix template with entity display names.
pub fn render_template(bundle: &PromptBundle, templates: &TemplateTable) -> Result<String, TemplateError> {
    let mut slots: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for entity in &bundle.reasoned_entities {
        slots.entry(entity.role.as_str()).or_default().push(entity.name.clone());
    }
    templates.fill(&bundle.prefix_id, &slots)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("generator failed: {0}")]
pub struct GeneratorError(pub String);

/// A response generator conditioned on a prompt bundle.
pub trait Generator {
    fn generate(&self, bundle: &PromptBundle) -> Result<String, GeneratorError>;
}

/// Deterministic slot-filling backend.
#[derive(Debug, Clone, Copy)]
pub struct TemplateBackend<'a> {
    pub templates: &'a TemplateTable,
}

impl Generator for TemplateBackend<'_> {
    fn generate(&self, bundle: &PromptBundle) -> Result<String, GeneratorError> {
        render_template(bundle, self.templates).map_err(|e| GeneratorError(e.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DialogueError {
    #[error(transparent)]
    Crm(#[from] CrmError),
    #[error(transparent)]
    Nlu(#[from] NluError),
    #[error(transparent)]
    Reasoner(#[from] ReasonerError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// A session: records memory plus the transcript so far.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consultation {
    pub state: CrmState,
    pub transcript: Vec<Utterance>,
}

impl Consultation {
    pub fn new(kg: &KnowledgeGraph, session_id: SessionId) -> Self {
        Self { state: CrmState::new(kg, session_id), transcript: Vec::new() }
    }

    pub fn snapshot(&self) -> String {
        to_canonical_json(self)
    }

    pub fn restore(document: &str) -> Result<Self, SnapshotError> {
        let c: Consultation = serde_json::from_str(document)?;
        c.state.check_invariants().map_err(SnapshotError::Invariant)?;
        Ok(c)
    }

    /// Phase sequence implied by the transcript is not stored; this is the
    /// current phase.
    pub fn phase(&self) -> ConsultationPhase {
        self.state.phase
    }
}

/// Result of one [`Engine::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reply: Utterance,
    pub phase: ConsultationPhase,
    pub kind: ResponseKind,
    pub asked_symptom: Option<EntityId>,
    pub candidates_count: usize,
    pub bundle: PromptBundle,
    /// The external generator failed and the template backend answered.
    pub fallback: bool,
    /// The diagnosis won only on the id tie-break.
    pub hedged: bool,
    pub dropped_mentions: usize,
    pub conflicts: Vec<EntityId>,
    pub triage: Option<TriageResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub history_window: usize,
    pub nlu: NluConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { history_window: 8, nlu: NluConfig::default() }
    }
}

/// Graph-independent dialogue configuration. Cheap to share across sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct Engine {
    pub templates: TemplateTable,
    pub intents: IntentLexicon,
    pub config: EngineConfig,
}

struct Plan {
    kind: ResponseKind,
    reasoned: Vec<(EntityId, Role)>,
    attachments: Vec<DrugImage>,
    asked: Option<EntityId>,
    hedged: bool,
}

impl Plan {
    fn new(kind: ResponseKind) -> Self {
        Self { kind, reasoned: Vec::new(), attachments: Vec::new(), asked: None, hedged: false }
    }
}

impl Engine {
    pub fn new(templates: TemplateTable, intents: IntentLexicon, config: EngineConfig) -> Self {
        Self { templates, intents, config }
    }

    pub fn english() -> Self {
        Self::new(TemplateTable::english(), IntentLexicon::default(), EngineConfig::default())
    }

    pub fn template_backend(&self) -> TemplateBackend<'_> {
        TemplateBackend { templates: &self.templates }
    }

    /// Runs one patient turn. On error the consultation is left untouched.
    pub fn step(
        &self,
        kg: &KnowledgeGraph,
        consultation: &mut Consultation,
        patient_text: &str,
        generator: Option<&dyn Generator>,
    ) -> Result<StepOutcome, DialogueError> {
        let mut state = consultation.state.clone();
        if state.phase == ConsultationPhase::Closed {
            return Err(CrmError::SessionClosed.into());
        }
        let turn = state.turn;
        let report = nlu::understand(kg, patient_text, &self.config.nlu)?;
        let mut linked = report.linked;

        let conflicts;
        let plan = match state.phase {
            ConsultationPhase::Elicitation => {
                self.attach_pending_answer(&state, &mut linked, patient_text);
                conflicts = state.record_entities(&linked)?.conflicts;
                state.update_candidates(kg)?;
                self.elicit(kg, &mut state)?
            }
            ConsultationPhase::Examination => {
                conflicts = state.record_entities(&linked)?.conflicts;
                match self.intents.follow_up(patient_text) {
                    Some(Intent::DrugRequest) | Some(Intent::Acknowledge) => self.recommend_drugs(kg, &mut state)?,
                    Some(Intent::Decline) => self.close(&mut state)?,
                    _ => {
                        let mut plan = Plan::new(ResponseKind::Clarify);
                        plan.reasoned.push((confirmed_disease(&state)?, Role::ConfirmedDisease));
                        plan
                    }
                }
            }
            ConsultationPhase::DrugRecommendation => {
                conflicts = state.record_entities(&linked)?.conflicts;
                self.close(&mut state)?
            }
            ConsultationPhase::Closed => unreachable!("checked above"),
        };

        let mut transcript = consultation.transcript.clone();
        transcript.push(Utterance::new(Speaker::Patient, patient_text, turn));
        let bundle = build_prompt(
            kg,
            &self.templates,
            state.phase,
            plan.kind,
            &transcript,
            &plan.reasoned,
            self.config.history_window,
        )?;
        let backend = self.template_backend();
        let (text, fallback) = match generator {
            Some(external) => match external.generate(&bundle) {
                Ok(text) => (text, false),
                Err(_) => (backend.generate(&bundle).map_err(|_| render_error(&bundle, &self.templates))?, true),
            },
            None => (render_template(&bundle, &self.templates)?, false),
        };
        let mut reply = Utterance::new(Speaker::System, text, turn);
        reply.attachments = plan.attachments;
        transcript.push(reply.clone());

        let confirmed: Vec<LinkedEntity> = state
            .confirmed()
            .into_iter()
            .map(|s| LinkedEntity::implied(s, EntityKind::Symptom, Polarity::Affirmed))
            .collect();
        let triage = nlu::triage(kg, &confirmed).ok();

        let outcome = StepOutcome {
            reply,
            phase: state.phase,
            kind: plan.kind,
            asked_symptom: plan.asked,
            candidates_count: state.candidate_diseases.len(),
            bundle,
            fallback,
            hedged: plan.hedged,
            dropped_mentions: report.dropped,
            conflicts,
            triage,
        };
        consultation.state = state;
        consultation.transcript = transcript;
        Ok(outcome)
    }

    /// A bare yes/no reply answers the pending question.
    fn attach_pending_answer(&self, state: &CrmState, linked: &mut Vec<LinkedEntity>, text: &str) {
        let Some(pending) = &state.pending_symptom else { return };
        if linked.iter().any(|l| &l.entity == pending) {
            return;
        }
        let polarity = match self.intents.answer(text) {
            Some(Answer::Yes) => Polarity::Affirmed,
            Some(Answer::No) => Polarity::Denied,
            None => return,
        };
        linked.push(LinkedEntity::implied(pending.clone(), EntityKind::Symptom, polarity));
    }

    fn elicit(&self, kg: &KnowledgeGraph, state: &mut CrmState) -> Result<Plan, DialogueError> {
        let confirmed = state.confirmed();
        let denied = state.denied();
        let outcome = if state.candidate_diseases.len() == 1 && !confirmed.is_empty() {
            let only = state.candidate_diseases.iter().next().expect("len is 1").clone();
            SelectionOutcome::Diagnose { disease: only, hedged: false }
        } else {
            match reasoner::select_next_symptom(kg, &confirmed, &denied)? {
                SelectionOutcome::Diagnose { disease, .. } if !state.candidate_diseases.contains(&disease) => {
                    reasoner::best_candidate(kg, &state.candidate_diseases, &confirmed)
                        .unwrap_or_else(|| SelectionOutcome::Undecidable(BTreeSet::new()))
                }
                other => other,
            }
        };
        match outcome {
            SelectionOutcome::Ask(symptom) => {
                state.set_pending(symptom.clone())?;
                let mut plan = Plan::new(ResponseKind::AskSymptom);
                plan.reasoned.push((symptom.clone(), Role::AskedSymptom));
                plan.asked = Some(symptom);
                Ok(plan)
            }
            SelectionOutcome::Diagnose { disease, hedged } if !confirmed.is_empty() => {
                state.confirm_disease(disease.clone())?;
                let treatment = reasoner::plan_treatment(kg, &disease)?;
                state.recommend_examinations(&treatment.examinations)?;
                let kind = if treatment.examinations.is_empty() {
                    ResponseKind::RecommendExaminationsNone
                } else {
                    ResponseKind::RecommendExaminations
                };
                let mut plan = Plan::new(kind);
                plan.hedged = hedged;
                plan.reasoned.extend(confirmed.into_iter().map(|s| (s, Role::ConfirmedSymptom)));
                plan.reasoned.push((disease, Role::ConfirmedDisease));
                plan.reasoned.push((treatment.department, Role::Department));
                plan.reasoned.extend(treatment.examinations.into_iter().map(|e| (e, Role::RecommendedExamination)));
                Ok(plan)
            }
            // No evidence to diagnose on (single-disease graph, nothing
            // confirmed) or nothing left to ask.
            SelectionOutcome::Diagnose { .. } | SelectionOutcome::Undecidable(_) => {
                state.pending_symptom = None;
                Ok(Plan::new(ResponseKind::Undecidable))
            }
        }
    }

    fn recommend_drugs(&self, kg: &KnowledgeGraph, state: &mut CrmState) -> Result<Plan, DialogueError> {
        let disease = confirmed_disease(state)?;
        state.advance(ConsultationPhase::DrugRecommendation)?;
        let treatment = reasoner::plan_treatment(kg, &disease)?;
        state.recommend_drugs(&treatment.drug_ids())?;
        let kind = match (treatment.drugs.is_empty(), treatment.foods_avoid.is_empty()) {
            (true, _) => ResponseKind::NoDrugs,
            (false, true) => ResponseKind::RecommendDrugs,
            (false, false) => ResponseKind::RecommendDrugsAvoidFood,
        };
        let mut plan = Plan::new(kind);
        plan.attachments = treatment.images();
        plan.reasoned.push((disease, Role::ConfirmedDisease));
        if kind != ResponseKind::NoDrugs {
            plan.reasoned.extend(treatment.drug_ids().into_iter().map(|d| (d, Role::RecommendedDrug)));
        }
        if kind == ResponseKind::RecommendDrugsAvoidFood {
            plan.reasoned.extend(treatment.foods_avoid.into_iter().map(|f| (f, Role::AvoidFood)));
        }
        Ok(plan)
    }

    fn close(&self, state: &mut CrmState) -> Result<Plan, DialogueError> {
        let disease = confirmed_disease(state)?;
        state.advance(ConsultationPhase::Closed)?;
        let mut plan = Plan::new(ResponseKind::Farewell);
        plan.reasoned.push((disease, Role::ConfirmedDisease));
        Ok(plan)
    }

    /// Medical record of a closed consultation.
    pub fn record(&self, kg: &KnowledgeGraph, consultation: &Consultation) -> Result<MedicalRecord, RecordError> {
        record::generate_record(kg, &consultation.state, &consultation.transcript, &self.templates)
    }
}

fn confirmed_disease(state: &CrmState) -> Result<EntityId, DialogueError> {
    state.confirmed_disease.clone().ok_or(DialogueError::Crm(CrmError::WrongPhase {
        expected: ConsultationPhase::Examination,
        actual: state.phase,
    }))
}

fn render_error(bundle: &PromptBundle, templates: &TemplateTable) -> TemplateError {
    match render_template(bundle, templates) {
        Err(e) => e,
        Ok(_) => TemplateError::UnknownTemplate(bundle.prefix_id.clone()),
    }
}

/// A generator that always fails; handy for exercising the fallback path.
pub struct FailingGenerator;

impl Generator for FailingGenerator {
    fn generate(&self, _bundle: &PromptBundle) -> Result<String, GeneratorError> {
        Err(GeneratorError("backend unavailable".into()))
    }
}

/// Boxed generator alias used by callers that pick a backend at runtime.
pub type DynGenerator = Box<dyn Generator + Send + Sync>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::tests::small_graph;
    use alloc::vec;

    fn run(engine: &Engine, kg: &KnowledgeGraph, lines: &[&str]) -> (Consultation, Vec<StepOutcome>) {
        let mut c = Consultation::new(kg, SessionId::new("s-1"));
        let outcomes = lines.iter().map(|l| engine.step(kg, &mut c, l, None).unwrap()).collect();
        (c, outcomes)
    }

    const SCRIPT: [&str; 5] = ["I am sick in my stomach", "yes", "no", "What medicine can I take?", "thanks"];

    #[test]
    fn full_consultation_walks_every_phase() {
        let kg = small_graph();
        let engine = Engine::english();
        let (c, out) = run(&engine, &kg, &SCRIPT);
        assert_eq!(out[0].asked_symptom, Some(EntityId::from("acid_reflux")));
        assert_eq!(out[0].candidates_count, 3);
        assert_eq!(out[1].asked_symptom, Some(EntityId::from("melena")));
        assert_eq!(out[2].phase, ConsultationPhase::Examination);
        assert!(out[2].reply.text.contains("gastroscopy"), "{}", out[2].reply.text);
        assert!(out[2].reply.text.contains("pathological biopsy of gastric mucosa"));
        assert_eq!(out[3].phase, ConsultationPhase::DrugRecommendation);
        assert_eq!(out[3].reply.attachments.len(), 2);
        assert_eq!(out[4].phase, ConsultationPhase::Closed);
        assert_eq!(c.transcript.len(), 10);

        let record = engine.record(&kg, &c).unwrap();
        assert_eq!(record.disease.id, EntityId::from("gastritis"));
        assert_eq!(record.department.name, "Gastroenterology");
        assert_eq!(record.chief_complaint, "I am sick in my stomach");
        assert_eq!(record.confirmed_symptoms.len(), 2);
        assert_eq!(record.denied_symptoms.len(), 1);
        assert_eq!(record.examinations.len(), 2);
        assert_eq!(record.drugs.len(), 2);
        assert!(record.narrative.starts_with("Chief complaint: I am sick in my stomach."));
        assert!(record.narrative.contains("Denied symptoms: melena."), "{}", record.narrative);
    }

    #[test]
    fn runs_are_deterministic() {
        let kg = small_graph();
        let engine = Engine::english();
        let (a, _) = run(&engine, &kg, &SCRIPT);
        let (b, _) = run(&engine, &kg, &SCRIPT);
        assert_eq!(a.snapshot(), b.snapshot());
        assert_eq!(engine.record(&kg, &a).unwrap().to_json(), engine.record(&kg, &b).unwrap().to_json());
    }

    #[test]
    fn reasoned_entities_are_sourced_from_state_or_graph() {
        let kg = small_graph();
        let engine = Engine::english();
        let mut c = Consultation::new(&kg, SessionId::new("s"));
        for line in SCRIPT {
            let out = engine.step(&kg, &mut c, line, None).unwrap();
            for e in &out.bundle.reasoned_entities {
                assert!(kg.entity(&e.entity).is_some(), "{}", e.entity);
                assert_eq!(e.name, kg.name_of(&e.entity));
            }
            let roles: Vec<_> = out.bundle.reasoned_entities.iter().map(|e| (e.role, e.entity.clone())).collect();
            let mut sorted = roles.clone();
            sorted.sort();
            assert_eq!(roles, sorted);
            for image in &out.reply.attachments {
                assert!(c.state.recommended_drugs.contains(&image.drug));
            }
        }
    }

    #[test]
    fn denial_answers_pending_question() {
        let kg = small_graph();
        let engine = Engine::english();
        let (c, out) = run(&engine, &kg, &["I am sick in my stomach", "no"]);
        assert_eq!(c.state.status_of(&EntityId::from("acid_reflux")), crate::crm::SymptomStatus::Denied);
        assert_eq!(out[1].phase, ConsultationPhase::Examination);
        assert_eq!(c.state.confirmed_disease, Some(EntityId::from("gastric_cancer")));
    }

    #[test]
    fn closed_session_rejects_messages_and_state_is_untouched_on_error() {
        let kg = small_graph();
        let engine = Engine::english();
        let (mut c, _) = run(&engine, &kg, &SCRIPT);
        let before = c.clone();
        assert!(matches!(engine.step(&kg, &mut c, "hello", None), Err(DialogueError::Crm(CrmError::SessionClosed))));
        assert!(matches!(engine.step(&kg, &mut c, "   ", None), Err(DialogueError::Crm(CrmError::SessionClosed))));
        assert_eq!(c, before);

        let mut fresh = Consultation::new(&kg, SessionId::new("t"));
        assert!(matches!(engine.step(&kg, &mut fresh, "  ", None), Err(DialogueError::Nlu(_))));
        assert!(fresh.transcript.is_empty());
    }

    #[test]
    fn record_requires_closed_session() {
        let kg = small_graph();
        let engine = Engine::english();
        let (c, _) = run(&engine, &kg, &SCRIPT[..3]);
        assert_eq!(engine.record(&kg, &c), Err(RecordError::SessionNotClosed(ConsultationPhase::Examination)));
    }

    #[test]
    fn failing_generator_falls_back_to_templates() {
        let kg = small_graph();
        let engine = Engine::english();
        let mut a = Consultation::new(&kg, SessionId::new("s"));
        let mut b = a.clone();
        let plain = engine.step(&kg, &mut a, SCRIPT[0], None).unwrap();
        let fallback = engine.step(&kg, &mut b, SCRIPT[0], Some(&FailingGenerator)).unwrap();
        assert!(fallback.fallback && !plain.fallback);
        assert_eq!(plain.reply, fallback.reply);
    }

    #[test]
    fn unrecognised_text_without_question_is_undecidable() {
        let kg = small_graph();
        let engine = Engine::english();
        let (c, out) = run(&engine, &kg, &["hello there"]);
        assert_eq!(out[0].kind, ResponseKind::AskSymptom);
        assert_eq!(out[0].candidates_count, 5);
        assert_eq!(c.state.phase, ConsultationPhase::Elicitation);
    }

    #[test]
    fn examination_phase_clarifies_then_declines() {
        let kg = small_graph();
        let engine = Engine::english();
        let (c, out) = run(&engine, &kg, &["I am sick in my stomach", "yes", "no", "hmm", "no thanks"]);
        assert_eq!(out[3].kind, ResponseKind::Clarify);
        assert_eq!(out[4].phase, ConsultationPhase::Closed);
        assert!(c.state.recommended_drugs.is_empty());
    }

    #[test]
    fn history_window_limits_prompt() {
        let kg = small_graph();
        let mut engine = Engine::english();
        engine.config.history_window = 3;
        let (_, out) = run(&engine, &kg, &SCRIPT);
        assert_eq!(out[4].bundle.history.len(), 3);
        assert_eq!(out[0].bundle.history.len(), 1);
    }

    #[test]
    fn snapshot_round_trips() {
        let kg = small_graph();
        let engine = Engine::english();
        let (c, _) = run(&engine, &kg, &SCRIPT[..2]);
        let restored = Consultation::restore(&c.snapshot()).unwrap();
        assert_eq!(restored, c);
        let mut a = c.clone();
        let mut b = restored;
        let x = engine.step(&kg, &mut a, "yes", None).unwrap();
        let y = engine.step(&kg, &mut b, "yes", None).unwrap();
        assert_eq!(x.reply, y.reply);
        assert_eq!(a, b);
        let _ = vec![0u8];
    }
}
