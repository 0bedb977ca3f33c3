//! Simulated-patient benchmark for the symptom selection policy.
//!
//! Each run hides a disease, opens the consultation with the canonical name
//! of one of its symptoms and answers every question truthfully with a bare
//! "yes" or "no". A run's rounds are the patient turns spent in elicitation,
//! opening included. The full dialogue engine is exercised, not just the
//! reasoner.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use medconsult_core::canonical::to_canonical_json_pretty;
use medconsult_core::crm::{ConsultationPhase, SessionId};
use medconsult_core::dialogue::{Consultation, DialogueError, Engine, ResponseKind};
use medconsult_core::kg::{EntityId, EntityKind, KnowledgeGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A truthful patient with one hidden disease.
#[derive(Debug, Clone)]
pub struct SimulatedPatient {
    pub hidden_disease: EntityId,
    symptoms: Vec<EntityId>,
}

impl SimulatedPatient {
    pub fn new(kg: &KnowledgeGraph, hidden_disease: EntityId) -> Option<Self> {
        let symptoms = kg.disease(&hidden_disease)?.symptoms.clone();
        Some(Self { hidden_disease, symptoms })
    }

    /// Canonical name of a uniformly drawn symptom of the hidden disease.
    pub fn opening(&self, kg: &KnowledgeGraph, rng: &mut impl Rng) -> String {
        let symptom = &self.symptoms[rng.random_range(0..self.symptoms.len())];
        kg.name_of(symptom).to_string()
    }

    pub fn answer(&self, asked: &EntityId) -> &'static str {
        if self.symptoms.contains(asked) {
            "yes"
        } else {
            "no"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub hidden: String,
    pub diagnosed: Option<String>,
    pub rounds: usize,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub source: String,
    pub diseases: usize,
    pub symptoms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub graph: GraphSummary,
    pub seed: u64,
    pub runs: usize,
    pub accuracy: f64,
    pub mean_rounds: f64,
    pub median_rounds: f64,
    pub max_rounds: usize,
    /// Rounds of every run, grouped by hidden disease.
    pub rounds_by_disease: BTreeMap<String, Vec<usize>>,
    pub results: Vec<RunResult>,
    pub warnings: Vec<String>,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        let mut text = to_canonical_json_pretty(self);
        text.push('\n');
        text
    }

    /// Plain-text summary table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "graph      {} ({} diseases, {} symptoms)", self.graph.source, self.graph.diseases, self.graph.symptoms);
        let _ = writeln!(out, "runs       {} (seed {})", self.runs, self.seed);
        let _ = writeln!(out, "accuracy   {:.4}", self.accuracy);
        let _ = writeln!(out, "rounds     mean {:.3}  median {:.1}  max {}", self.mean_rounds, self.median_rounds, self.max_rounds);
        let _ = writeln!(out, "{:<24} {:>6} {:>10} {:>6}", "disease", "runs", "mean", "max");
        for (disease, rounds) in &self.rounds_by_disease {
            let mean = rounds.iter().sum::<usize>() as f64 / rounds.len() as f64;
            let max = rounds.iter().max().copied().unwrap_or(0);
            let _ = writeln!(out, "{:<24} {:>6} {:>10.3} {:>6}", disease, rounds.len(), mean, max);
        }
        for warning in &self.warnings {
            let _ = writeln!(out, "warning: {warning}");
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid bench request: {0}")]
    InvalidSpec(String),
    #[error("run {run}: {source}")]
    Dialogue { run: usize, source: DialogueError },
}

/// Plays one consultation and reports how it ended.
pub fn simulate(
    kg: &KnowledgeGraph,
    engine: &Engine,
    patient: &SimulatedPatient,
    opening: &str,
    run: usize,
) -> Result<RunResult, DialogueError> {
    let mut consultation = Consultation::new(kg, SessionId::new(format!("bench-{run}")));
    let limit = kg.stats().get(EntityKind::Symptom) + 2;
    let mut outcome = engine.step(kg, &mut consultation, opening, None)?;
    let mut rounds = 1;
    while outcome.phase == ConsultationPhase::Elicitation && outcome.kind != ResponseKind::Undecidable && rounds < limit {
        let Some(asked) = outcome.asked_symptom.as_ref() else { break };
        let reply = patient.answer(asked);
        outcome = engine.step(kg, &mut consultation, reply, None)?;
        rounds += 1;
    }
    let diagnosed = consultation.state.confirmed_disease.clone();
    Ok(RunResult {
        run,
        hidden: patient.hidden_disease.as_str().to_string(),
        correct: diagnosed.as_ref() == Some(&patient.hidden_disease),
        diagnosed: diagnosed.map(|d| d.as_str().to_string()),
        rounds,
    })
}

/// Groups of diseases that share an identical symptom set.
pub fn duplicate_symptom_sets(kg: &KnowledgeGraph) -> Vec<Vec<EntityId>> {
    let mut groups: BTreeMap<Vec<EntityId>, Vec<EntityId>> = BTreeMap::new();
    for id in kg.disease_ids() {
        let set: Vec<EntityId> = kg.disease(id).expect("listed disease").symptom_set().iter().cloned().collect();
        groups.entry(set).or_default().push(id.clone());
    }
    groups.into_values().filter(|g| g.len() > 1).collect()
}

pub fn run_bench(kg: &KnowledgeGraph, engine: &Engine, source: &str, runs: usize, seed: u64) -> Result<BenchReport, BenchError> {
    if runs == 0 {
        return Err(BenchError::InvalidSpec("runs must be at least 1".into()));
    }
    let diseases: Vec<EntityId> = kg.disease_ids().cloned().collect();
    if diseases.is_empty() {
        return Err(BenchError::InvalidSpec("graph has no diseases".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::with_capacity(runs);
    for run in 0..runs {
        let hidden = diseases[rng.random_range(0..diseases.len())].clone();
        let patient = SimulatedPatient::new(kg, hidden).expect("drawn from the graph");
        let opening = patient.opening(kg, &mut rng);
        let result = simulate(kg, engine, &patient, &opening, run).map_err(|source| BenchError::Dialogue { run, source })?;
        results.push(result);
    }

    let mut rounds_by_disease: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for r in &results {
        rounds_by_disease.entry(r.hidden.clone()).or_default().push(r.rounds);
    }
    let mut rounds: Vec<usize> = results.iter().map(|r| r.rounds).collect();
    rounds.sort_unstable();
    let median_rounds = if rounds.len() % 2 == 1 {
        rounds[rounds.len() / 2] as f64
    } else {
        (rounds[rounds.len() / 2 - 1] + rounds[rounds.len() / 2]) as f64 / 2.0
    };
    let warnings = duplicate_symptom_sets(kg)
        .into_iter()
        .map(|group| {
            let ids: Vec<&str> = group.iter().map(EntityId::as_str).collect();
            format!("diseases {} share an identical symptom set and cannot be told apart", ids.join(", "))
        })
        .collect();
    Ok(BenchReport {
        graph: GraphSummary {
            source: source.to_string(),
            diseases: diseases.len(),
            symptoms: kg.stats().get(EntityKind::Symptom),
        },
        seed,
        runs,
        accuracy: results.iter().filter(|r| r.correct).count() as f64 / runs as f64,
        mean_rounds: rounds.iter().sum::<usize>() as f64 / runs as f64,
        median_rounds,
        max_rounds: rounds.last().copied().unwrap_or(0),
        rounds_by_disease,
        results,
        warnings,
    })
}
