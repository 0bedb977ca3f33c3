//! Keyword intents for yes/no answers and phase transitions.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::normalize::{contains_at_boundary, normalize};

pub const DEFAULT_INTENTS: &str = include_str!("../assets/intents.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Intent {
    Affirm,
    Deny,
    DrugRequest,
    Acknowledge,
    Decline,
}

impl Intent {
    fn key(self) -> &'static str {
        match self {
            Intent::Affirm => "affirm",
            Intent::Deny => "deny",
            Intent::DrugRequest => "drug_request",
            Intent::Acknowledge => "acknowledge",
            Intent::Decline => "decline",
        }
    }

    const ALL: [Intent; 5] = [Intent::Affirm, Intent::Deny, Intent::DrugRequest, Intent::Acknowledge, Intent::Decline];
}

/// How a patient answered a yes/no question.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Answer {
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("intent lexicon line {line}: {message}")]
pub struct LexiconError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntentLexicon {
    phrases: BTreeMap<Intent, Vec<String>>,
}

impl IntentLexicon {
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut phrases: BTreeMap<Intent, Vec<String>> = BTreeMap::new();
        for (index, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| LexiconError { line: index + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected `intent = a|b|c`".to_string()))?;
            let intent = Intent::ALL
                .into_iter()
                .find(|i| i.key() == key.trim())
                .ok_or_else(|| err(alloc::format!("unknown intent `{}`", key.trim())))?;
            let list = phrases.entry(intent).or_default();
            for phrase in value.split('|').map(normalize).filter(|p| !p.is_empty()) {
                if !list.contains(&phrase) {
                    list.push(phrase);
                }
            }
        }
        Ok(Self { phrases })
    }

    fn has(&self, intent: Intent, normalized: &str) -> bool {
        self.phrases
            .get(&intent)
            .is_some_and(|list| list.iter().any(|p| contains_at_boundary(normalized, p)))
    }

    /// Yes/no reading of `text`; a denial phrase takes precedence.
    pub fn answer(&self, text: &str) -> Option<Answer> {
        let text = normalize(text);
        if self.has(Intent::Deny, &text) {
            Some(Answer::No)
        } else if self.has(Intent::Affirm, &text) {
            Some(Answer::Yes)
        } else {
            None
        }
    }

    /// The intent of a reply to an examination recommendation: drug request,
    /// then decline, then acknowledgment.
    pub fn follow_up(&self, text: &str) -> Option<Intent> {
        let text = normalize(text);
        [Intent::DrugRequest, Intent::Decline, Intent::Acknowledge]
            .into_iter()
            .find(|intent| self.has(*intent, &text))
    }
}

impl Default for IntentLexicon {
    fn default() -> Self {
        Self::parse(DEFAULT_INTENTS).expect("bundled intent lexicon parses")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yes_no_answers() {
        let lex = IntentLexicon::default();
        assert_eq!(lex.answer("Yes, I do"), Some(Answer::Yes));
        assert_eq!(lex.answer("no"), Some(Answer::No));
        assert_eq!(lex.answer("Nope."), Some(Answer::No));
        assert_eq!(lex.answer("I haven't"), Some(Answer::No));
        assert_eq!(lex.answer("没有"), Some(Answer::No));
        assert_eq!(lex.answer("有"), Some(Answer::Yes));
        assert_eq!(lex.answer("what is this"), None);
        assert_eq!(lex.answer("nobody knows"), None);
    }

    #[test]
    fn follow_up_priority() {
        let lex = IntentLexicon::default();
        assert_eq!(lex.follow_up("Is there any medicine I can take?"), Some(Intent::DrugRequest));
        assert_eq!(lex.follow_up("no thanks"), Some(Intent::Decline));
        assert_eq!(lex.follow_up("ok, thank you"), Some(Intent::Acknowledge));
        assert_eq!(lex.follow_up("有什么药可以吃"), Some(Intent::DrugRequest));
        assert_eq!(lex.follow_up("hmm"), None);
    }

    #[test]
    fn rejects_unknown_intent() {
        assert_eq!(IntentLexicon::parse("maybe = perhaps").unwrap_err().line, 1);
        assert!(IntentLexicon::parse("affirm yes").is_err());
    }
}
