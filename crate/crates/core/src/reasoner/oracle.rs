//! Exhaustive reference for [`select_next_symptom`](super::select_next_symptom).
//!
//! Scans every (symptom, disease) pair of the graph with plain linear
//! membership tests. No symptom index, no per-disease sets, no maps. Only
//! meant for tests, where its output is compared with the indexed selector.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use super::{check_evidence, ReasonerError, SelectionOutcome};
use crate::kg::{EntityId, EntityKind, KnowledgeGraph};

pub fn oracle_select(
    kg: &KnowledgeGraph,
    confirmed: &BTreeSet<EntityId>,
    denied: &BTreeSet<EntityId>,
) -> Result<SelectionOutcome, ReasonerError> {
    check_evidence(confirmed, denied)?;

    let known = |s: &EntityId| confirmed.iter().any(|c| c == s) || denied.iter().any(|d| d == s);
    let lists = |disease: &&crate::kg::DiseaseRecord, s: &EntityId| disease.symptoms.iter().any(|x| x == s);

    let suspected: Vec<&crate::kg::DiseaseRecord> = kg
        .diseases()
        .filter(|d| confirmed.is_empty() || confirmed.iter().any(|c| lists(d, c)))
        .collect();
    if suspected.len() == 1 {
        return Ok(SelectionOutcome::Diagnose { disease: suspected[0].id.clone(), hedged: false });
    }

    let mut symptoms: Vec<&EntityId> =
        kg.entities().filter(|(_, e)| e.kind == EntityKind::Symptom).map(|(id, _)| id).collect();
    symptoms.sort();

    let mut best: Option<(&EntityId, usize)> = None;
    for symptom in symptoms {
        if known(symptom) {
            continue;
        }
        let count = suspected.iter().filter(|d| lists(d, symptom)).count();
        if count == 0 {
            continue;
        }
        let better = match best {
            None => true,
            Some((id, top)) => count > top || (count == top && symptom < id),
        };
        if better {
            best = Some((symptom, count));
        }
    }
    if let Some((symptom, _)) = best {
        return Ok(SelectionOutcome::Ask(symptom.clone()));
    }

    if confirmed.is_empty() {
        return Ok(SelectionOutcome::Undecidable(suspected.iter().map(|d| d.id.clone()).collect()));
    }

    let overlap = |d: &crate::kg::DiseaseRecord| confirmed.iter().filter(|c| lists(&d, c)).count();
    let top = suspected.iter().map(|d| overlap(d)).max().unwrap_or(0);
    let mut winners: Vec<&EntityId> = suspected.iter().filter(|d| overlap(d) == top).map(|d| &d.id).collect();
    winners.sort();
    match winners.first() {
        Some(first) => Ok(SelectionOutcome::Diagnose { disease: (*first).clone(), hedged: winners.len() > 1 }),
        None => Ok(SelectionOutcome::Undecidable(BTreeSet::new())),
    }
}
