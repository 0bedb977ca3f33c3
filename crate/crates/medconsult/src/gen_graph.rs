//! Seeded synthetic graphs for benchmarking the symptom selection policy.
//!
//! Diseases get exactly `symptoms_per_disease` distinct symptoms drawn
//! uniformly from `symptoms` candidates. With `distinct`, symptom sets are
//! re-drawn until all are pairwise different. Only symptoms that some disease
//! uses are emitted, so the result always loads with orphan checks on.

use std::collections::BTreeSet;

use medconsult_core::kg::{DiseaseRow, EntityRow, KgTables};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub diseases: usize,
    pub symptoms: usize,
    pub symptoms_per_disease: usize,
    pub seed: u64,
    pub distinct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("infeasible spec: {diseases} diseases need distinct symptom sets but only {available} {k}-subsets of {m} symptoms exist")]
    InfeasibleSpec { diseases: usize, available: u128, k: usize, m: usize },
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

impl GraphSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.diseases == 0 || self.symptoms == 0 || self.symptoms_per_disease == 0 {
            return Err(SpecError::InvalidSpec("diseases, symptoms and symptoms per disease must be at least 1".into()));
        }
        if self.symptoms_per_disease > self.symptoms {
            return Err(SpecError::InvalidSpec(format!(
                "{} symptoms per disease exceeds the {} available symptoms",
                self.symptoms_per_disease, self.symptoms
            )));
        }
        if self.distinct {
            let available = binomial(self.symptoms, self.symptoms_per_disease);
            if (self.diseases as u128) > available {
                return Err(SpecError::InfeasibleSpec {
                    diseases: self.diseases,
                    available,
                    k: self.symptoms_per_disease,
                    m: self.symptoms,
                });
            }
        }
        Ok(())
    }
}

fn width(n: usize) -> usize {
    n.saturating_sub(1).max(1).to_string().len().max(2)
}

pub fn symptom_id(i: usize, m: usize) -> String {
    format!("s{i:0w$}", w = width(m))
}

pub fn disease_id(i: usize, n: usize) -> String {
    format!("d{i:0w$}", w = width(n))
}

/// Symptom sets per disease, as indices into `0..spec.symptoms`.
pub fn draw_symptom_sets(spec: &GraphSpec) -> Result<Vec<Vec<usize>>, SpecError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut seen = BTreeSet::new();
    let mut sets = Vec::with_capacity(spec.diseases);
    while sets.len() < spec.diseases {
        let mut set = index::sample(&mut rng, spec.symptoms, spec.symptoms_per_disease).into_vec();
        set.sort_unstable();
        if spec.distinct && !seen.insert(set.clone()) {
            continue;
        }
        sets.push(set);
    }
    Ok(sets)
}

pub fn generate(spec: &GraphSpec) -> Result<KgTables, SpecError> {
    let sets = draw_symptom_sets(spec)?;
    Ok(tables_from_sets(&sets, spec.symptoms))
}

/// Builds tables for diseases with the given symptom index sets; `m` only
/// fixes the id width. Unused symptoms are left out.
pub fn tables_from_sets(sets: &[Vec<usize>], m: usize) -> KgTables {
    let n = sets.len();
    let used: BTreeSet<usize> = sets.iter().flatten().copied().collect();
    let symptoms = used
        .iter()
        .enumerate()
        .map(|(row, &i)| EntityRow {
            line: row + 2,
            id: symptom_id(i, m),
            name: format!("symptom {i}"),
            ..EntityRow::default()
        })
        .collect();
    let diseases = sets
        .iter()
        .enumerate()
        .map(|(i, set)| DiseaseRow {
            line: i + 2,
            id: disease_id(i, n),
            name: format!("disease {i}"),
            department: "general".into(),
            symptoms: set.iter().map(|&s| symptom_id(s, m)).collect(),
            ..DiseaseRow::default()
        })
        .collect();
    KgTables {
        symptoms,
        departments: vec![EntityRow { line: 2, id: "general".into(), name: "General Medicine".into(), ..EntityRow::default() }],
        diseases,
        ..KgTables::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, m: usize, k: usize, distinct: bool) -> GraphSpec {
        GraphSpec { diseases: n, symptoms: m, symptoms_per_disease: k, seed: 7, distinct }
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(15, 4), 1365);
        assert_eq!(binomial(5, 5), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(200, 100), u128::MAX);
    }

    #[test]
    fn infeasible_and_invalid_specs() {
        assert!(matches!(draw_symptom_sets(&spec(20, 5, 5, true)), Err(SpecError::InfeasibleSpec { available: 1, .. })));
        assert!(matches!(draw_symptom_sets(&spec(2, 3, 4, false)), Err(SpecError::InvalidSpec(_))));
        assert!(matches!(draw_symptom_sets(&spec(0, 3, 1, false)), Err(SpecError::InvalidSpec(_))));
        assert_eq!(draw_symptom_sets(&spec(20, 5, 5, false)).unwrap().len(), 20);
    }

    #[test]
    fn distinct_sets_have_exact_size() {
        let sets = draw_symptom_sets(&spec(10, 15, 4, true)).unwrap();
        let unique: BTreeSet<_> = sets.iter().collect();
        assert_eq!(unique.len(), 10);
        assert!(sets.iter().all(|s| s.len() == 4 && s.iter().all(|&i| i < 15)));
        assert_eq!(sets, draw_symptom_sets(&spec(10, 15, 4, true)).unwrap());
    }

    #[test]
    fn ids_sort_numerically() {
        assert_eq!(symptom_id(3, 15), "s03");
        assert_eq!(disease_id(10, 120), "d010");
    }
}
