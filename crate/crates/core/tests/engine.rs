use medconsult_core::crm::{ConsultationPhase, SessionId};
use medconsult_core::dialogue::{Consultation, Engine};
use medconsult_core::kg::{DiseaseRow, EntityRow, KgTables, KnowledgeGraph, LoadOptions, RawAlias};

fn row(line: usize, id: &str, name: &str) -> EntityRow {
    EntityRow { line, id: id.into(), name: name.into(), ..EntityRow::default() }
}

fn disease(line: usize, id: &str, symptoms: &[&str]) -> DiseaseRow {
    DiseaseRow {
        line,
        id: id.into(),
        name: id.replace('_', " "),
        department: "general".into(),
        symptoms: symptoms.iter().map(|s| s.to_string()).collect(),
        examinations: vec!["blood_test".into()],
        drugs: vec!["rest".into()],
        ..DiseaseRow::default()
    }
}

fn small_graph() -> KnowledgeGraph {
    let mut cough = row(2, "cough", "cough");
    cough.aliases.push(RawAlias { surface: "coughing".into(), weight: 1.0 });
    let tables = KgTables {
        symptoms: vec![cough, row(3, "fever", "fever"), row(4, "sneezing", "sneezing"), row(5, "chest_pain", "chest pain")],
        examinations: vec![row(2, "blood_test", "blood test")],
        drugs: vec![row(2, "rest", "bed rest")],
        departments: vec![row(2, "general", "General Medicine")],
        diseases: vec![
            disease(2, "common_cold", &["cough", "sneezing"]),
            disease(3, "influenza", &["cough", "fever"]),
            disease(4, "pneumonia", &["cough", "fever", "chest_pain"]),
        ],
        ..KgTables::default()
    };
    KnowledgeGraph::from_tables(&tables, LoadOptions::default()).unwrap()
}

#[test]
fn consultation_reaches_a_record_through_the_public_api() {
    let kg = small_graph();
    let engine = Engine::english();
    let mut c = Consultation::new(&kg, SessionId::new("it"));
    let hidden = ["cough", "fever", "chest_pain"];
    let mut outcome = engine.step(&kg, &mut c, "I keep coughing", None).unwrap();
    assert_eq!(outcome.candidates_count, 3);
    while outcome.phase == ConsultationPhase::Elicitation {
        let asked = outcome.asked_symptom.clone().expect("elicitation asks a question");
        let answer = if hidden.contains(&asked.as_str()) { "yes" } else { "no" };
        outcome = engine.step(&kg, &mut c, answer, None).unwrap();
    }
    assert_eq!(c.state.confirmed_disease.as_ref().map(|d| d.as_str()), Some("pneumonia"));
    engine.step(&kg, &mut c, "what medicine should I take", None).unwrap();
    let last = engine.step(&kg, &mut c, "thanks", None).unwrap();
    assert_eq!(last.phase, ConsultationPhase::Closed);

    let record = engine.record(&kg, &c).unwrap();
    assert_eq!(record.department.id.as_str(), "general");
    assert!(record.examinations.iter().any(|e| e.id.as_str() == "blood_test"));
    assert_eq!(record.to_json(), engine.record(&kg, &c).unwrap().to_json());
}

#[test]
fn snapshot_restore_resumes_identically() {
    let kg = small_graph();
    let engine = Engine::english();
    let mut a = Consultation::new(&kg, SessionId::new("snap"));
    engine.step(&kg, &mut a, "I keep coughing", None).unwrap();
    let mut b = Consultation::restore(&a.snapshot()).unwrap();
    let ra = engine.step(&kg, &mut a, "yes", None).unwrap();
    let rb = engine.step(&kg, &mut b, "yes", None).unwrap();
    assert_eq!(ra.reply.text, rb.reply.text);
    assert_eq!(a.snapshot(), b.snapshot());
}
