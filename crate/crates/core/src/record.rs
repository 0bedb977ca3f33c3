//! Structured medical record of a finished consultation.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::canonical::{to_canonical_json, to_canonical_json_pretty};
use crate::crm::{ConsultationPhase, CrmState, SessionId};
use crate::dialogue::{Speaker, Utterance};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::templates::{TemplateError, TemplateTable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordError {
    #[error("session is still in phase {0}")]
    SessionNotClosed(ConsultationPhase),
    #[error("session closed without a diagnosis")]
    NoDiagnosis,
    #[error(transparent)]
    Template(#[from] TemplateError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedEntity {
    pub id: EntityId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedicalRecord {
    pub session_id: SessionId,
    pub department: NamedEntity,
    pub chief_complaint: String,
    pub confirmed_symptoms: Vec<NamedEntity>,
    pub denied_symptoms: Vec<NamedEntity>,
    pub disease: NamedEntity,
    pub examinations: Vec<NamedEntity>,
    pub drugs: Vec<NamedEntity>,
    pub narrative: String,
}

impl MedicalRecord {
    pub fn to_json(&self) -> String {
        to_canonical_json(self)
    }

    pub fn to_json_pretty(&self) -> String {
        to_canonical_json_pretty(self)
    }
}

fn named(kg: &KnowledgeGraph, id: &EntityId) -> NamedEntity {
    NamedEntity { id: id.clone(), name: kg.name_of(id).to_string() }
}

/// Builds the record from records memory and the transcript. The department
/// is the confirmed disease's department; the chief complaint is the first
/// patient utterance. Narrative sections with nothing to report are skipped.
pub fn generate_record(
    kg: &KnowledgeGraph,
    state: &CrmState,
    transcript: &[Utterance],
    templates: &TemplateTable,
) -> Result<MedicalRecord, RecordError> {
    if state.phase != ConsultationPhase::Closed {
        return Err(RecordError::SessionNotClosed(state.phase));
    }
    let disease_id = state.confirmed_disease.as_ref().ok_or(RecordError::NoDiagnosis)?;
    let disease_record = kg.disease(disease_id).ok_or(RecordError::NoDiagnosis)?;
    let department = named(kg, &disease_record.department);
    let chief_complaint = transcript
        .iter()
        .find(|u| u.speaker == Speaker::Patient)
        .map(|u| u.text.trim().to_string())
        .unwrap_or_default();
    let confirmed: Vec<NamedEntity> = state.confirmed().iter().map(|s| named(kg, s)).collect();
    let denied: Vec<NamedEntity> = state.denied().iter().map(|s| named(kg, s)).collect();
    let examinations: Vec<NamedEntity> = state.recommended_examinations.iter().map(|e| named(kg, e)).collect();
    let drugs: Vec<NamedEntity> = state.recommended_drugs.iter().map(|d| named(kg, d)).collect();
    let disease = named(kg, disease_id);

    let names = |list: &[NamedEntity]| list.iter().map(|n| n.name.clone()).collect::<Vec<_>>();
    let sections: [(&str, &str, Vec<String>); 5] = [
        ("record.complaint", "chief_complaint", if chief_complaint.is_empty() { Vec::new() } else { alloc::vec![chief_complaint.clone()] }),
        ("record.symptoms", "confirmed_symptom", names(&confirmed)),
        ("record.denied", "denied_symptom", names(&denied)),
        ("record.examinations", "recommended_examination", names(&examinations)),
        ("record.drugs", "recommended_drug", names(&drugs)),
    ];
    let mut sentences = Vec::new();
    for (index, (id, slot, values)) in sections.into_iter().enumerate() {
        if !values.is_empty() {
            let mut slots = BTreeMap::new();
            slots.insert(slot, values);
            sentences.push(templates.fill(id, &slots)?);
        }
        // The diagnosis sentence follows the denied symptoms.
        if index == 2 {
            let mut slots = BTreeMap::new();
            slots.insert("confirmed_disease", alloc::vec![disease.name.clone()]);
            slots.insert("department", alloc::vec![department.name.clone()]);
            sentences.push(templates.fill("record.diagnosis", &slots)?);
        }
    }
    let narrative = sentences.join(templates.sentence_separator());

    Ok(MedicalRecord {
        session_id: state.session_id.clone(),
        department,
        chief_complaint,
        confirmed_symptoms: confirmed,
        denied_symptoms: denied,
        disease,
        examinations,
        drugs,
        narrative,
    })
}
