//! Response template tables.
//!
//! A table is a UTF-8 text file of `template_id = text` lines. Text may hold
//! `{slot}` placeholders, where the slot name is a reasoned-entity role (or a
//! record field). Lines starting with `#` are comments; lines starting with
//! `@` set table options:
//!
//! ```text
//! @locale = en
//! @list_separator = ", "
//! @sentence_separator = " "
//! elicit.ask_symptom = Do you have {asked_symptom}?
//! ```
//!
//! Option values may be double-quoted to keep surrounding spaces.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

pub const ENGLISH_TEMPLATES: &str = include_str!("../assets/templates.en.txt");
pub const CHINESE_TEMPLATES: &str = include_str!("../assets/templates.zh.txt");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template `{template}` has no filler for slot `{slot}`")]
    MissingSlotFiller { template: String, slot: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateTable {
    locale: String,
    list_separator: String,
    sentence_separator: String,
    entries: BTreeMap<String, String>,
}

fn unquote(value: &str) -> &str {
    let value = value.trim();
    if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
        &value[1..value.len() - 1]
    } else {
        value
    }
}

impl TemplateTable {
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let mut table = TemplateTable {
            locale: "en".to_string(),
            list_separator: ", ".to_string(),
            sentence_separator: " ".to_string(),
            entries: BTreeMap::new(),
        };
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(TemplateError::Parse { line, message: "expected `id = text`".to_string() });
            };
            let key = key.trim();
            if let Some(option) = key.strip_prefix('@') {
                let value = unquote(value).to_string();
                match option {
                    "locale" => table.locale = value,
                    "list_separator" => table.list_separator = value,
                    "sentence_separator" => table.sentence_separator = value,
                    other => {
                        return Err(TemplateError::Parse { line, message: alloc::format!("unknown option `@{other}`") })
                    }
                }
                continue;
            }
            if key.is_empty() {
                return Err(TemplateError::Parse { line, message: "empty template id".to_string() });
            }
            if table.entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(TemplateError::Parse { line, message: alloc::format!("duplicate template `{key}`") });
            }
        }
        Ok(table)
    }

    pub fn english() -> Self {
        Self::parse(ENGLISH_TEMPLATES).expect("bundled English table parses")
    }

    pub fn chinese() -> Self {
        Self::parse(CHINESE_TEMPLATES).expect("bundled Chinese table parses")
    }

    pub fn locale(&self) -> &str {
        &self.locale
    }

    pub fn list_separator(&self) -> &str {
        &self.list_separator
    }

    pub fn sentence_separator(&self) -> &str {
        &self.sentence_separator
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Result<&str, TemplateError> {
        self.entries.get(id).map(String::as_str).ok_or_else(|| TemplateError::UnknownTemplate(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Substitutes every `{slot}` of template `id` with the slot's values
    /// joined by the list separator. A slot that is absent or has no values
    /// is an error.
    pub fn fill(&self, id: &str, slots: &BTreeMap<&str, Vec<String>>) -> Result<String, TemplateError> {
        let template = self.get(id)?;
        let mut out = String::with_capacity(template.len() + 32);
        let mut rest = template;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let close = after.find('}');
            let name = close.map(|c| &after[..c]);
            match name {
                Some(name) if !name.is_empty() && name.chars().all(|c| c.is_ascii_lowercase() || c == '_') => {
                    let values = slots.get(name).filter(|v| !v.is_empty()).ok_or_else(|| {
                        TemplateError::MissingSlotFiller { template: id.to_string(), slot: name.to_string() }
                    })?;
                    out.push_str(&values.join(self.list_separator.as_str()));
                    rest = &after[name.len() + 1..];
                }
                _ => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        Ok(out)
    }

    /// Slot names used by template `id`.
    pub fn slots_of(&self, id: &str) -> Result<Vec<&str>, TemplateError> {
        let template = self.get(id)?;
        let mut slots = Vec::new();
        let mut rest = template;
        while let Some(open) = rest.find('{') {
            let after = &rest[open + 1..];
            match after.find('}') {
                Some(c) if c > 0 && after[..c].chars().all(|ch| ch.is_ascii_lowercase() || ch == '_') => {
                    if !slots.contains(&&after[..c]) {
                        slots.push(&after[..c]);
                    }
                    rest = &after[c + 1..];
                }
                _ => rest = after,
            }
        }
        Ok(slots)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn slots<'a>(pairs: &[(&'a str, &[&str])]) -> BTreeMap<&'a str, Vec<String>> {
        pairs.iter().map(|(k, v)| (*k, v.iter().map(|s| s.to_string()).collect())).collect()
    }

    #[test]
    fn parses_options_and_entries() {
        let t = TemplateTable::parse("# c\n@locale = zh\n@list_separator = \"、\"\na.b = hi {x}\n").unwrap();
        assert_eq!(t.locale(), "zh");
        assert_eq!(t.list_separator(), "、");
        assert_eq!(t.get("a.b").unwrap(), "hi {x}");
        assert!(matches!(t.get("nope"), Err(TemplateError::UnknownTemplate(_))));
    }

    #[test]
    fn rejects_garbage_lines() {
        assert!(matches!(TemplateTable::parse("no equals sign"), Err(TemplateError::Parse { line: 1, .. })));
        assert!(matches!(TemplateTable::parse("a = 1\na = 2"), Err(TemplateError::Parse { line: 2, .. })));
        assert!(matches!(TemplateTable::parse("@colour = red"), Err(TemplateError::Parse { .. })));
    }

    #[test]
    fn fills_lists_with_separator() {
        let t = TemplateTable::parse("d = Take {drug}.\n").unwrap();
        let text = t.fill("d", &slots(&[("drug", &["omeprazole", "sucralfate"])])).unwrap();
        assert_eq!(text, "Take omeprazole, sucralfate.");
    }

    #[test]
    fn missing_filler_is_an_error() {
        let t = TemplateTable::parse("d = Take {drug}.\n").unwrap();
        assert_eq!(
            t.fill("d", &slots(&[("drug", &[])])),
            Err(TemplateError::MissingSlotFiller { template: "d".into(), slot: "drug".into() })
        );
    }

    #[test]
    fn stray_braces_are_literal() {
        let t = TemplateTable::parse("d = a { b {} {X} {x}\n").unwrap();
        assert_eq!(t.fill("d", &slots(&[("x", &["1"])])).unwrap(), "a { b {} {X} 1");
        assert_eq!(t.slots_of("d").unwrap(), vec!["x"]);
    }

    #[test]
    fn bundled_tables_share_ids() {
        let en = TemplateTable::english();
        let zh = TemplateTable::chinese();
        assert_eq!(en.ids().collect::<Vec<_>>(), zh.ids().collect::<Vec<_>>());
        assert_eq!(zh.locale(), "zh");
        for id in en.ids() {
            assert_eq!(en.slots_of(id).unwrap().len(), zh.slots_of(id).unwrap().len(), "{id}");
        }
    }
}
