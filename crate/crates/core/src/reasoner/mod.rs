//! Symptom selection and staged treatment reasoning.
//!
//! Selection is greedy: among the diseases that share at least one confirmed
//! symptom (the suspected set), count for every still-unanswered symptom how
//! many suspected diseases list it, and ask about the most shared one. Ties
//! go to the lowest symptom id so the outcome never depends on iteration
//! order. When nothing is left to ask, the suspected disease with the
//! largest confirmed overlap is diagnosed.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::kg::{DrugImage, EntityId, EntityKind, KnowledgeGraph, LookupError};

#[cfg(feature = "oracle")]
pub mod oracle;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionOutcome {
    /// Ask the patient whether they have this symptom.
    Ask(EntityId),
    /// `hedged` is set when another suspected disease matched the confirmed
    /// symptoms equally well and lost only on the id tie-break (identical or
    /// nested symptom sets).
    Diagnose { disease: EntityId, hedged: bool },
    /// Nothing confirmed and nothing left to ask.
    Undecidable(BTreeSet<EntityId>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReasonerError {
    #[error("symptoms both confirmed and denied: {0:?}")]
    InconsistentEvidence(Vec<EntityId>),
    #[error(transparent)]
    Lookup(#[from] LookupError),
}

pub(crate) fn check_evidence(confirmed: &BTreeSet<EntityId>, denied: &BTreeSet<EntityId>) -> Result<(), ReasonerError> {
    let overlap: Vec<EntityId> = confirmed.intersection(denied).cloned().collect();
    if overlap.is_empty() {
        Ok(())
    } else {
        Err(ReasonerError::InconsistentEvidence(overlap))
    }
}

/// Chooses the next question, or a diagnosis when no question is left.
pub fn select_next_symptom(
    kg: &KnowledgeGraph,
    confirmed: &BTreeSet<EntityId>,
    denied: &BTreeSet<EntityId>,
) -> Result<SelectionOutcome, ReasonerError> {
    check_evidence(confirmed, denied)?;

    let suspected: BTreeSet<&EntityId> = if confirmed.is_empty() {
        kg.disease_ids().collect()
    } else {
        confirmed.iter().filter_map(|s| kg.diseases_of(s)).flatten().collect()
    };
    if suspected.len() == 1 {
        let disease = (*suspected.iter().next().expect("len is 1")).clone();
        return Ok(SelectionOutcome::Diagnose { disease, hedged: false });
    }

    // symptom -> number of suspected diseases listing it
    let mut shared: BTreeMap<&EntityId, usize> = BTreeMap::new();
    for disease in suspected.iter().filter_map(|id| kg.disease(id)) {
        for symptom in &disease.symptoms {
            if !confirmed.contains(symptom) && !denied.contains(symptom) {
                *shared.entry(symptom).or_insert(0) += 1;
            }
        }
    }
    let mut best: Option<(&EntityId, usize)> = None;
    for (symptom, count) in &shared {
        if best.map_or(true, |(_, top)| *count > top) {
            best = Some((symptom, *count));
        }
    }
    if let Some((symptom, _)) = best {
        return Ok(SelectionOutcome::Ask(symptom.clone()));
    }

    if confirmed.is_empty() {
        return Ok(SelectionOutcome::Undecidable(suspected.into_iter().cloned().collect()));
    }
    Ok(diagnose_by_overlap(kg, suspected.into_iter(), confirmed))
}

/// Largest confirmed overlap wins, lowest id on ties.
fn diagnose_by_overlap<'a>(
    kg: &'a KnowledgeGraph,
    suspected: impl Iterator<Item = &'a EntityId>,
    confirmed: &BTreeSet<EntityId>,
) -> SelectionOutcome {
    let mut best: Option<(&EntityId, usize)> = None;
    let mut ties = 0;
    for id in suspected {
        let overlap = kg.disease(id).map_or(0, |d| d.symptom_set().intersection(confirmed).count());
        match best {
            Some((_, top)) if overlap < top => {}
            Some((_, top)) if overlap == top => ties += 1,
            _ => {
                best = Some((id, overlap));
                ties = 0;
            }
        }
    }
    match best {
        Some((disease, _)) => SelectionOutcome::Diagnose { disease: disease.clone(), hedged: ties > 0 },
        None => SelectionOutcome::Undecidable(BTreeSet::new()),
    }
}

/// Picks the disease to confirm when selection ends on a disease that is not
/// (or no longer) a candidate: largest confirmed overlap among `candidates`.
pub fn best_candidate(
    kg: &KnowledgeGraph,
    candidates: &BTreeSet<EntityId>,
    confirmed: &BTreeSet<EntityId>,
) -> Option<SelectionOutcome> {
    if candidates.is_empty() {
        return None;
    }
    Some(diagnose_by_overlap(kg, candidates.iter(), confirmed))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrugSuggestion {
    pub drug: EntityId,
    pub images: Vec<DrugImage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreatmentPlan {
    pub disease: EntityId,
    pub department: EntityId,
    pub examinations: Vec<EntityId>,
    pub drugs: Vec<DrugSuggestion>,
    pub foods_avoid: Vec<EntityId>,
}

impl TreatmentPlan {
    pub fn drug_ids(&self) -> Vec<EntityId> {
        self.drugs.iter().map(|d| d.drug.clone()).collect()
    }

    pub fn images(&self) -> Vec<DrugImage> {
        self.drugs.iter().flat_map(|d| d.images.iter().cloned()).collect()
    }
}

/// Examinations, drugs (with their images) and foods to avoid for `disease`,
/// in table order.
pub fn plan_treatment(kg: &KnowledgeGraph, disease: &EntityId) -> Result<TreatmentPlan, ReasonerError> {
    let record = match kg.kind_of(disease) {
        None => return Err(LookupError::UnknownEntity(disease.clone()).into()),
        Some(EntityKind::Disease) => kg.disease(disease).expect("every Disease entity has a record"),
        Some(actual) => {
            return Err(LookupError::WrongKind { id: disease.clone(), expected: EntityKind::Disease, actual }.into())
        }
    };
    let mut drugs = Vec::with_capacity(record.drugs.len());
    for drug in &record.drugs {
        drugs.push(DrugSuggestion { drug: drug.clone(), images: kg.drug_images(drug)?.to_vec() });
    }
    Ok(TreatmentPlan {
        disease: record.id.clone(),
        department: record.department.clone(),
        examinations: record.examinations.clone(),
        drugs,
        foods_avoid: record.foods_avoid.clone(),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::kg::tests::{disease, row, small_graph};
    use crate::kg::{KgTables, LoadOptions};
    use alloc::format;
    use alloc::string::String;
    use alloc::vec;
    use proptest::prelude::*;

    fn set(ids: &[&str]) -> BTreeSet<EntityId> {
        ids.iter().map(|s| EntityId::from(*s)).collect()
    }

    /// Builds a graph from `(disease, symptom indices)` pairs; symptoms are
    /// named `s00`, `s01`, ... and diseases `d00`, `d01`, ...
    pub(crate) fn graph_from_sets(sets: &[Vec<usize>]) -> KnowledgeGraph {
        let used: BTreeSet<usize> = sets.iter().flatten().copied().collect();
        let tables = KgTables {
            symptoms: used.iter().map(|s| row(s + 2, &format!("s{s:02}"), &format!("symptom {s}"), &[])).collect(),
            departments: vec![row(2, "dept", "General", &[])],
            diseases: sets
                .iter()
                .enumerate()
                .map(|(i, syms)| {
                    let names: Vec<String> = syms.iter().map(|s| format!("s{s:02}")).collect();
                    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
                    disease(i + 2, &format!("d{i:02}"), "dept", &refs)
                })
                .collect(),
            ..Default::default()
        };
        KnowledgeGraph::from_tables(&tables, LoadOptions::default()).unwrap()
    }

    #[test]
    fn stomach_trio_asks_most_shared() {
        let kg = small_graph();
        // acid_reflux: gastritis+ulcer, melena: ulcer+cancer; tie -> lowest id
        let out = select_next_symptom(&kg, &set(&["gassralgia"]), &set(&[])).unwrap();
        assert_eq!(out, SelectionOutcome::Ask("acid_reflux".into()));
        let out = select_next_symptom(&kg, &set(&["gassralgia", "acid_reflux"]), &set(&[])).unwrap();
        assert_eq!(out, SelectionOutcome::Ask("melena".into()));
    }

    #[test]
    fn single_suspect_is_diagnosed() {
        let kg = small_graph();
        let out = select_next_symptom(&kg, &set(&["rash"]), &set(&[])).unwrap();
        assert_eq!(out, SelectionOutcome::Diagnose { disease: "eczema".into(), hedged: false });
    }

    #[test]
    fn exhausted_questions_diagnose_by_overlap() {
        let kg = small_graph();
        let confirmed = set(&["gassralgia", "acid_reflux", "bloating"]);
        let denied = set(&["melena", "weight_loss"]);
        let out = select_next_symptom(&kg, &confirmed, &denied).unwrap();
        assert_eq!(out, SelectionOutcome::Diagnose { disease: "gastritis".into(), hedged: false });
    }

    #[test]
    fn nested_sets_are_hedged() {
        let kg = graph_from_sets(&[vec![0, 1], vec![0, 1, 2]]);
        let out = select_next_symptom(&kg, &set(&["s00", "s01"]), &set(&["s02"])).unwrap();
        assert_eq!(out, SelectionOutcome::Diagnose { disease: "d00".into(), hedged: true });
    }

    #[test]
    fn nothing_confirmed_and_all_denied_is_undecidable() {
        let kg = graph_from_sets(&[vec![0], vec![1]]);
        let out = select_next_symptom(&kg, &set(&[]), &set(&["s00", "s01"])).unwrap();
        assert_eq!(out, SelectionOutcome::Undecidable(set(&["d00", "d01"])));
        // nothing known yet: ask the first of two equally shared symptoms
        let out = select_next_symptom(&kg, &set(&[]), &set(&[])).unwrap();
        assert_eq!(out, SelectionOutcome::Ask("s00".into()));
    }

    #[test]
    fn minimal_graph() {
        let kg = graph_from_sets(&[vec![0]]);
        let out = select_next_symptom(&kg, &set(&[]), &set(&[])).unwrap();
        assert_eq!(out, SelectionOutcome::Diagnose { disease: "d00".into(), hedged: false });
    }

    #[test]
    fn inconsistent_evidence_rejected() {
        let kg = small_graph();
        let err = select_next_symptom(&kg, &set(&["rash"]), &set(&["rash"])).unwrap_err();
        assert_eq!(err, ReasonerError::InconsistentEvidence(vec!["rash".into()]));
    }

    #[test]
    fn gastritis_plan() {
        let kg = small_graph();
        let plan = plan_treatment(&kg, &"gastritis".into()).unwrap();
        assert_eq!(plan.examinations, vec![EntityId::from("gastroscopy"), "gastric_mucosa_biopsy".into()]);
        assert_eq!(kg.name_of(&plan.examinations[1]), "pathological biopsy of gastric mucosa");
        assert_eq!(plan.drugs.len(), 2);
        assert_eq!(plan.drugs[0].images.len(), 2);
        assert!(plan.drugs[1].images.is_empty());
        assert_eq!(plan.department, EntityId::from("gastro"));
        assert_eq!(plan, plan_treatment(&kg, &"gastritis".into()).unwrap());
    }

    #[test]
    fn plan_without_drugs_and_unknown_disease() {
        let kg = small_graph();
        assert!(plan_treatment(&kg, &"eczema".into()).unwrap().drugs.is_empty());
        assert!(matches!(
            plan_treatment(&kg, &"nope".into()),
            Err(ReasonerError::Lookup(LookupError::UnknownEntity(_)))
        ));
        assert!(matches!(
            plan_treatment(&kg, &"rash".into()),
            Err(ReasonerError::Lookup(LookupError::WrongKind { .. }))
        ));
    }

    fn arb_sets(max_d: usize, max_s: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
        proptest::collection::vec(proptest::collection::btree_set(0..max_s, 1..=max_s.min(5)), 1..=max_d)
            .prop_map(|sets| sets.into_iter().map(|s| s.into_iter().collect()).collect())
    }

    /// Runs a truthful patient with hidden disease `hidden` straight against
    /// the selector; returns the diagnosis and number of questions asked.
    pub(crate) fn simulate(kg: &KnowledgeGraph, hidden: &EntityId, opening: &EntityId) -> (SelectionOutcome, usize) {
        let truth = kg.disease(hidden).unwrap().symptom_set().clone();
        let mut confirmed = set(&[]);
        let mut denied = set(&[]);
        confirmed.insert(opening.clone());
        let mut asked = 0;
        loop {
            match select_next_symptom(kg, &confirmed, &denied).unwrap() {
                SelectionOutcome::Ask(s) => {
                    asked += 1;
                    if truth.contains(&s) {
                        confirmed.insert(s);
                    } else {
                        denied.insert(s);
                    }
                }
                other => return (other, asked),
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn denial_strictly_shrinks_unresolved_pairs(sets in arb_sets(6, 8), answers in proptest::collection::vec(any::<bool>(), 0..8)) {
            let kg = graph_from_sets(&sets);
            let all: Vec<EntityId> = kg.linked_symptoms().cloned().collect();
            let mut confirmed = set(&[]);
            let mut denied = set(&[]);
            for (s, yes) in all.iter().zip(answers) {
                if yes { confirmed.insert(s.clone()); } else { denied.insert(s.clone()); }
            }
            let unresolved = |c: &BTreeSet<EntityId>, d: &BTreeSet<EntityId>| -> usize {
                let suspected: Vec<_> = kg.diseases().filter(|x| c.is_empty() || x.symptoms.iter().any(|s| c.contains(s))).collect();
                suspected.iter().map(|x| x.symptoms.iter().filter(|s| !c.contains(*s) && !d.contains(*s)).count()).sum()
            };
            if let SelectionOutcome::Ask(s) = select_next_symptom(&kg, &confirmed, &denied).unwrap() {
                prop_assert_eq!(confirmed.contains(&s) || denied.contains(&s), false);
                let before = unresolved(&confirmed, &denied);
                let mut d2 = denied.clone();
                d2.insert(s.clone());
                prop_assert!(unresolved(&confirmed, &d2) < before);
                // an affirmation always removes one unanswered symptom overall
                let mut c2 = confirmed.clone();
                c2.insert(s);
                prop_assert!(all.iter().filter(|x| !c2.contains(*x) && !denied.contains(*x)).count()
                    < all.iter().filter(|x| !confirmed.contains(*x) && !denied.contains(*x)).count());
            }
        }

        #[test]
        fn truthful_patient_terminates(sets in arb_sets(8, 10), pick in 0usize..100, open in 0usize..100) {
            let kg = graph_from_sets(&sets);
            let ids: Vec<EntityId> = kg.disease_ids().cloned().collect();
            let hidden = &ids[pick % ids.len()];
            let symptoms = &kg.disease(hidden).unwrap().symptoms;
            let opening = &symptoms[open % symptoms.len()];
            let (outcome, asked) = simulate(&kg, hidden, opening);
            prop_assert!(asked < kg.linked_symptoms().count());
            let SelectionOutcome::Diagnose { disease, .. } = outcome else {
                return Err(TestCaseError::fail("truthful session must end in a diagnosis"));
            };
            let target = kg.disease(hidden).unwrap().symptom_set();
            let distinct_and_unnested = kg.diseases().all(|d| d.id == *hidden || !target.is_subset(d.symptom_set()));
            if distinct_and_unnested {
                prop_assert_eq!(&disease, hidden);
            }
        }

        #[test]
        fn row_order_never_changes_outcome(sets in arb_sets(6, 8), rot in 0usize..6, answers in proptest::collection::vec(0u8..3, 8)) {
            let kg = graph_from_sets(&sets);
            let mut tables_rotated = sets.clone();
            let len = tables_rotated.len();
            tables_rotated.rotate_left(rot % len);
            // rotate rows but keep ids: rebuild with explicit ids
            let used: BTreeSet<usize> = sets.iter().flatten().copied().collect();
            let mut symptoms: Vec<_> = used.iter().map(|s| row(0, &format!("s{s:02}"), &format!("symptom {s}"), &[])).collect();
            symptoms.reverse();
            let mut diseases: Vec<_> = sets.iter().enumerate().map(|(i, syms)| {
                let mut names: Vec<String> = syms.iter().map(|s| format!("s{s:02}")).collect();
                names.reverse();
                let refs: Vec<&str> = names.iter().map(String::as_str).collect();
                disease(0, &format!("d{i:02}"), "dept", &refs)
            }).collect();
            diseases.rotate_left(rot % len);
            let permuted = KnowledgeGraph::from_tables(&KgTables {
                symptoms, departments: vec![row(0, "dept", "General", &[])], diseases, ..Default::default()
            }, LoadOptions::default()).unwrap();
            let mut confirmed = set(&[]);
            let mut denied = set(&[]);
            for (s, a) in used.iter().zip(answers) {
                let id = EntityId::new(format!("s{s:02}"));
                match a { 0 => { confirmed.insert(id); } 1 => { denied.insert(id); } _ => {} }
            }
            prop_assert_eq!(
                select_next_symptom(&kg, &confirmed, &denied).unwrap(),
                select_next_symptom(&permuted, &confirmed, &denied).unwrap()
            );
        }
    }
}
