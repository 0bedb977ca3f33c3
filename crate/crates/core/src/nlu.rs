//! Mention recognition, entity linking and department triage.
//!
//! Recognition is dictionary driven: the longest alias surface starting at
//! each position wins, scanning left to right. Linking goes through an
//! [`EntityMatcher`]; the bundled [`AliasMatcher`] scores exact alias hits by
//! their weight and everything else by normalized edit similarity.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::kg::{EntityId, EntityKind, KnowledgeGraph};
use crate::normalize::{contains_at_boundary, is_word_char, normalize};

/// A recognized span. Offsets count characters, half-open.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub surface: String,
    pub start: usize,
    pub end: usize,
    pub normalized: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Affirmed,
    Denied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedEntity {
    pub mention: Mention,
    pub entity: EntityId,
    pub kind: EntityKind,
    pub score: f64,
    pub polarity: Polarity,
}

impl LinkedEntity {
    /// An entity asserted without a textual mention, e.g. a yes/no answer to
    /// a pending question.
    pub fn implied(entity: EntityId, kind: EntityKind, polarity: Polarity) -> Self {
        Self {
            mention: Mention { surface: String::new(), start: 0, end: 0, normalized: String::new() },
            entity,
            kind,
            score: 1.0,
            polarity,
        }
    }

    pub fn is_affirmed_symptom(&self) -> bool {
        self.kind == EntityKind::Symptom && self.polarity == Polarity::Affirmed
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinkReport {
    pub linked: Vec<LinkedEntity>,
    /// Mentions whose best candidate scored below the threshold.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NluError {
    #[error("utterance is empty")]
    EmptyUtterance,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TriageError {
    #[error("no affirmed symptom to triage on")]
    NoSymptoms,
}

/// Negation cue lexicon, stored normalized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegationCues {
    cues: Vec<String>,
}

pub const DEFAULT_NEGATION_CUES: &str = include_str!("../assets/negation_cues.txt");

impl NegationCues {
    /// One cue per line. Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Self {
        let mut cues: Vec<String> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cue = normalize(line);
            if !cue.is_empty() && !cues.contains(&cue) {
                cues.push(cue);
            }
        }
        Self { cues }
    }

    pub fn cues(&self) -> &[String] {
        &self.cues
    }

    /// True if any cue occurs in `normalized_text` on word boundaries.
    pub fn matches(&self, normalized_text: &str) -> bool {
        self.cues.iter().any(|cue| contains_at_boundary(normalized_text, cue))
    }
}

impl Default for NegationCues {
    fn default() -> Self {
        Self::parse(DEFAULT_NEGATION_CUES)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NluConfig {
    pub link_threshold: f64,
    pub negation: NegationCues,
}

impl Default for NluConfig {
    fn default() -> Self {
        Self { link_threshold: 0.85, negation: NegationCues::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub entity: EntityId,
    pub score: f64,
}

/// Scores a normalized mention surface against the graph.
pub trait EntityMatcher {
    fn best_match(&self, kg: &KnowledgeGraph, surface: &str) -> Option<Candidate>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AliasMatcher;

impl EntityMatcher for AliasMatcher {
    fn best_match(&self, kg: &KnowledgeGraph, surface: &str) -> Option<Candidate> {
        if let Some(top) = kg.alias_entries(surface).first() {
            return Some(Candidate { entity: top.entity.clone(), score: top.weight });
        }
        let mut best: Option<(f64, f64, &EntityId)> = None;
        for (alias, entries) in kg.alias_surfaces() {
            let similarity = edit_similarity(surface, alias);
            for entry in entries {
                let score = similarity * entry.weight;
                let better = match best {
                    None => true,
                    Some((s, w, id)) => {
                        score > s || (score == s && (entry.weight > w || (entry.weight == w && &entry.entity < id)))
                    }
                };
                if better {
                    best = Some((score, entry.weight, &entry.entity));
                }
            }
        }
        best.map(|(score, _, id)| Candidate { entity: id.clone(), score })
    }
}

/// `1 - levenshtein(a, b) / max(|a|, |b|)` over characters; 1.0 for two
/// empty strings.
pub fn edit_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = alloc::vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    1.0 - prev[b.len()] as f64 / longest as f64
}

/// Longest-match recognition against the alias index.
pub fn recognize(kg: &KnowledgeGraph, utterance: &str) -> Result<Vec<Mention>, NluError> {
    if utterance.trim().is_empty() {
        return Err(NluError::EmptyUtterance);
    }
    let chars: Vec<(usize, char)> = utterance.char_indices().collect();
    let n = chars.len();
    let byte_at = |i: usize| if i == n { utterance.len() } else { chars[i].0 };
    // NFKC may fold several code points into one; 4x the longest alias is a
    // generous bound on the raw span that can normalize onto an alias.
    let span_limit = 4 * kg.max_alias_chars().max(1);
    let mut mentions = Vec::new();
    let mut i = 0;
    while i < n {
        let c = chars[i].1;
        let mid_word = i > 0 && is_word_char(chars[i - 1].1) && is_word_char(c);
        if c.is_whitespace() || mid_word {
            i += 1;
            continue;
        }
        let mut best: Option<(usize, String)> = None;
        let mut visible = 0;
        for j in i + 1..=n {
            let last = chars[j - 1].1;
            if !last.is_whitespace() {
                visible += 1;
            }
            if visible > span_limit {
                break;
            }
            if last.is_whitespace() || (j < n && is_word_char(last) && is_word_char(chars[j].1)) {
                continue;
            }
            let normalized = normalize(&utterance[byte_at(i)..byte_at(j)]);
            if !kg.alias_entries(&normalized).is_empty() {
                best = Some((j, normalized));
            }
        }
        match best {
            Some((j, normalized)) => {
                mentions.push(Mention {
                    surface: utterance[byte_at(i)..byte_at(j)].to_string(),
                    start: i,
                    end: j,
                    normalized,
                });
                i = j;
            }
            None => i += 1,
        }
    }
    Ok(mentions)
}

fn is_clause_break(c: char) -> bool {
    matches!(
        c,
        '.' | ',' | ';' | ':' | '!' | '?' | '\n' | '。' | '，' | '；' | '：' | '！' | '？' | '、' | '．'
    )
}

/// Whether a negation cue precedes the mention inside its clause.
pub fn polarity_of(mention: &Mention, utterance: &str, cues: &NegationCues) -> Polarity {
    let before: Vec<char> = utterance.chars().take(mention.start).collect();
    let clause_start = before.iter().rposition(|c| is_clause_break(*c)).map_or(0, |p| p + 1);
    let clause: String = before[clause_start..].iter().collect();
    if cues.matches(&normalize(&clause)) {
        Polarity::Denied
    } else {
        Polarity::Affirmed
    }
}

/// Links mentions with the bundled [`AliasMatcher`].
pub fn link(kg: &KnowledgeGraph, mentions: &[Mention], utterance: &str, config: &NluConfig) -> LinkReport {
    link_with(kg, mentions, utterance, config, &AliasMatcher)
}

pub fn link_with(
    kg: &KnowledgeGraph,
    mentions: &[Mention],
    utterance: &str,
    config: &NluConfig,
    matcher: &dyn EntityMatcher,
) -> LinkReport {
    let mut report = LinkReport::default();
    for mention in mentions {
        let candidate = matcher
            .best_match(kg, &mention.normalized)
            .filter(|c| c.score >= config.link_threshold)
            .and_then(|c| kg.kind_of(&c.entity).map(|kind| (c, kind)));
        match candidate {
            Some((c, kind)) => report.linked.push(LinkedEntity {
                mention: mention.clone(),
                entity: c.entity,
                kind,
                score: c.score,
                polarity: polarity_of(mention, utterance, &config.negation),
            }),
            None => report.dropped += 1,
        }
    }
    report
}

/// Recognizes and links in one call.
pub fn understand(kg: &KnowledgeGraph, utterance: &str, config: &NluConfig) -> Result<LinkReport, NluError> {
    let mentions = recognize(kg, utterance)?;
    Ok(link(kg, &mentions, utterance, config))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageResult {
    pub department: EntityId,
    pub scores: BTreeMap<EntityId, f64>,
    pub confidence: f64,
}

/// Department vote over the diseases of every affirmed symptom.
pub fn triage(kg: &KnowledgeGraph, linked: &[LinkedEntity]) -> Result<TriageResult, TriageError> {
    triage_weighted(kg, linked, 1.0)
}

/// As [`triage`], with each vote worth `vote` instead of 1.
pub fn triage_weighted(kg: &KnowledgeGraph, linked: &[LinkedEntity], vote: f64) -> Result<TriageResult, TriageError> {
    let symptoms: BTreeSet<&EntityId> =
        linked.iter().filter(|l| l.is_affirmed_symptom()).map(|l| &l.entity).collect();
    if symptoms.is_empty() {
        return Err(TriageError::NoSymptoms);
    }
    let mut scores: BTreeMap<EntityId, f64> = BTreeMap::new();
    for symptom in symptoms {
        for disease in kg.diseases_of(symptom).into_iter().flatten() {
            if let Some(record) = kg.disease(disease) {
                *scores.entry(record.department.clone()).or_insert(0.0) += vote;
            }
        }
    }
    let (department, top) = scores
        .iter()
        .fold(None::<(&EntityId, f64)>, |best, (id, s)| match best {
            Some((_, b)) if *s <= b => best,
            _ => Some((id, *s)),
        })
        .ok_or(TriageError::NoSymptoms)?;
    let total: f64 = scores.values().sum();
    let confidence = if total > 0.0 { top / total } else { 0.0 };
    Ok(TriageResult { department: department.clone(), scores, confidence })
}
