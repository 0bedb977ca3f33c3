//! The multi-modal medical knowledge graph.
//!
//! A [`KnowledgeGraph`] is assembled once from raw table rows by
//! [`KnowledgeGraph::from_tables`], validated, and never mutated afterwards.
//! Reading the rows from disk is the caller's job; this module only checks
//! them and builds the indexes (alias surfaces, symptom to disease, drug
//! images).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::normalize::normalize;

/// Opaque, non-empty identifier of a graph entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(String);

impl EntityId {
    /// Wraps `value`. Panics if it is empty; use [`EntityId::try_new`] for
    /// untrusted input.
    pub fn new(value: impl Into<String>) -> Self {
        Self::try_new(value).expect("entity id must be non-empty")
    }

    pub fn try_new(value: impl Into<String>) -> Option<Self> {
        let value = value.into();
        if value.is_empty() {
            None
        } else {
            Some(Self(value))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(value: &str) -> Self {
        Self::new(value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    Disease,
    Symptom,
    Examination,
    Drug,
    Food,
    Department,
    Image,
}

impl EntityKind {
    pub const ALL: [EntityKind; 7] = [
        EntityKind::Disease,
        EntityKind::Symptom,
        EntityKind::Examination,
        EntityKind::Drug,
        EntityKind::Food,
        EntityKind::Department,
        EntityKind::Image,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Disease => "Disease",
            EntityKind::Symptom => "Symptom",
            EntityKind::Examination => "Examination",
            EntityKind::Drug => "Drug",
            EntityKind::Food => "Food",
            EntityKind::Department => "Department",
            EntityKind::Image => "Image",
        }
    }

    /// Name of the table that declares entities of this kind.
    pub fn table(self) -> &'static str {
        match self {
            EntityKind::Disease => "diseases",
            EntityKind::Symptom => "symptoms",
            EntityKind::Examination => "examinations",
            EntityKind::Drug => "drugs",
            EntityKind::Food => "foods",
            EntityKind::Department => "departments",
            EntityKind::Image => "drugs",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for EntityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown entity kind `{s}`"))
    }
}

/// An entity's kind and display name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub kind: EntityKind,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiseaseRecord {
    pub id: EntityId,
    pub name: String,
    /// Unique, in table order. Never empty.
    pub symptoms: Vec<EntityId>,
    pub examinations: Vec<EntityId>,
    pub drugs: Vec<EntityId>,
    pub foods_avoid: Vec<EntityId>,
    pub department: EntityId,
    pub description: String,
    symptom_set: BTreeSet<EntityId>,
}

impl DiseaseRecord {
    pub fn has_symptom(&self, symptom: &EntityId) -> bool {
        self.symptom_set.contains(symptom)
    }

    pub fn symptom_set(&self) -> &BTreeSet<EntityId> {
        &self.symptom_set
    }
}

/// An image attached to a drug. `image` is the id of the Image entity that
/// represents it in the graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DrugImage {
    pub drug: EntityId,
    pub image: EntityId,
    pub image_uri: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliasEntry {
    pub surface: String,
    pub entity: EntityId,
    pub weight: f64,
}

/// Per-kind entity counts. Every kind is always present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KgStats(BTreeMap<EntityKind, usize>);

impl KgStats {
    fn zeroed() -> Self {
        Self(EntityKind::ALL.into_iter().map(|k| (k, 0)).collect())
    }

    pub fn get(&self, kind: EntityKind) -> usize {
        self.0.get(&kind).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (EntityKind, usize)> + '_ {
        self.0.iter().map(|(k, v)| (*k, *v))
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (EntityKind, usize)>) -> Self {
        let mut stats = Self::zeroed();
        for (kind, n) in counts {
            stats.0.insert(kind, n);
        }
        stats
    }
}

/// A declared alias before normalization. The weight defaults to 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct RawAlias {
    pub surface: String,
    pub weight: f64,
}

impl RawAlias {
    pub fn new(surface: impl Into<String>) -> Self {
        Self { surface: surface.into(), weight: 1.0 }
    }

    pub fn weighted(surface: impl Into<String>, weight: f64) -> Self {
        Self { surface: surface.into(), weight }
    }
}

/// One row of a plain entity table (symptoms, examinations, drugs, foods,
/// departments). `line` is the 1-based line number used in error reports.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntityRow {
    pub line: usize,
    pub id: String,
    pub name: String,
    pub aliases: Vec<RawAlias>,
    /// Only meaningful for drugs.
    pub image_uris: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiseaseRow {
    pub line: usize,
    pub id: String,
    pub name: String,
    pub department: String,
    pub symptoms: Vec<String>,
    pub examinations: Vec<String>,
    pub drugs: Vec<String>,
    pub foods_avoid: Vec<String>,
    pub description: String,
}

/// Raw contents of every table, as read from disk.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KgTables {
    pub symptoms: Vec<EntityRow>,
    pub examinations: Vec<EntityRow>,
    pub drugs: Vec<EntityRow>,
    pub foods: Vec<EntityRow>,
    pub departments: Vec<EntityRow>,
    pub diseases: Vec<DiseaseRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Reject symptoms that no disease lists.
    pub reject_orphan_symptoms: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { reject_orphan_symptoms: true }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KgError {
    #[error("missing required table `{0}`")]
    MissingTable(String),
    #[error("{table} line {line}: column `{column}` references unknown {expected} `{id}`")]
    DanglingReference { table: String, line: usize, column: String, id: String, expected: EntityKind },
    #[error("{table} line {line}: duplicate id `{id}`")]
    DuplicateId { table: String, line: usize, id: String },
    #[error("diseases line {line}: disease `{id}` has no symptoms")]
    EmptySymptomSet { line: usize, id: String },
    #[error("symptoms line {line}: symptom `{id}` is not listed by any disease")]
    OrphanSymptom { line: usize, id: String },
    #[error("{table} line {line}: {message}")]
    Malformed { table: String, line: usize, message: String },
    #[error("manifest count for {kind} is {expected}, graph has {actual}")]
    ManifestMismatch { kind: EntityKind, expected: usize, actual: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LookupError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(EntityId),
    #[error("entity `{id}` is a {actual}, expected a {expected}")]
    WrongKind { id: EntityId, expected: EntityKind, actual: EntityKind },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    entities: BTreeMap<EntityId, Entity>,
    diseases: BTreeMap<EntityId, DiseaseRecord>,
    aliases: BTreeMap<String, Vec<AliasEntry>>,
    declared_aliases: BTreeMap<EntityId, Vec<AliasEntry>>,
    images: BTreeMap<EntityId, Vec<DrugImage>>,
    image_index: BTreeMap<EntityId, DrugImage>,
    symptom_index: BTreeMap<EntityId, BTreeSet<EntityId>>,
    /// Table order of entity ids per kind, kept for export.
    order: BTreeMap<EntityKind, Vec<EntityId>>,
    stats: KgStats,
    max_alias_chars: usize,
}

impl KnowledgeGraph {
    /// Validates `tables` and builds the graph.
    pub fn from_tables(tables: &KgTables, options: LoadOptions) -> Result<Self, KgError> {
        let mut builder = Builder::default();
        let plain = [
            (EntityKind::Symptom, &tables.symptoms),
            (EntityKind::Examination, &tables.examinations),
            (EntityKind::Drug, &tables.drugs),
            (EntityKind::Food, &tables.foods),
            (EntityKind::Department, &tables.departments),
        ];
        for (kind, rows) in plain {
            for row in rows {
                builder.add_plain(kind, row)?;
            }
        }
        for row in &tables.diseases {
            builder.declare(EntityKind::Disease, row.line, &row.id, &row.name)?;
        }
        for row in &tables.diseases {
            builder.add_disease(row)?;
        }
        for row in &tables.drugs {
            builder.add_images(row)?;
        }
        if options.reject_orphan_symptoms {
            for row in &tables.symptoms {
                let id = EntityId::new(row.id.as_str());
                if !builder.graph.symptom_index.contains_key(&id) {
                    return Err(KgError::OrphanSymptom { line: row.line, id: row.id.clone() });
                }
            }
        }
        Ok(builder.finish())
    }

    pub fn stats(&self) -> &KgStats {
        &self.stats
    }

    pub fn entity(&self, id: &EntityId) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn kind_of(&self, id: &EntityId) -> Option<EntityKind> {
        self.entities.get(id).map(|e| e.kind)
    }

    /// Display name, falling back to the raw id for unknown entities.
    pub fn name_of<'a>(&'a self, id: &'a EntityId) -> &'a str {
        self.entities.get(id).map(|e| e.name.as_str()).unwrap_or(id.as_str())
    }

    pub fn entities(&self) -> impl Iterator<Item = (&EntityId, &Entity)> {
        self.entities.iter()
    }

    /// Entity ids of `kind` in the order their rows appeared.
    pub fn ids_in_table_order(&self, kind: EntityKind) -> &[EntityId] {
        self.order.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn disease(&self, id: &EntityId) -> Option<&DiseaseRecord> {
        self.diseases.get(id)
    }

    /// Diseases ordered by id.
    pub fn diseases(&self) -> impl Iterator<Item = &DiseaseRecord> {
        self.diseases.values()
    }

    pub fn disease_ids(&self) -> impl Iterator<Item = &EntityId> {
        self.diseases.keys()
    }

    pub fn disease_count(&self) -> usize {
        self.diseases.len()
    }

    /// Symptom ids that at least one disease lists, ordered by id.
    pub fn linked_symptoms(&self) -> impl Iterator<Item = &EntityId> {
        self.symptom_index.keys()
    }

    /// Diseases listing `symptom`, without kind checks. Empty for unknown ids.
    pub fn diseases_of(&self, symptom: &EntityId) -> Option<&BTreeSet<EntityId>> {
        self.symptom_index.get(symptom)
    }

    /// Aliases declared for `id` in its table row (canonical self-alias
    /// excluded), in row order.
    pub fn declared_aliases(&self, id: &EntityId) -> &[AliasEntry] {
        self.declared_aliases.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Every (surface, entries) pair of the alias index.
    pub fn alias_surfaces(&self) -> impl Iterator<Item = (&str, &[AliasEntry])> {
        self.aliases.iter().map(|(s, e)| (s.as_str(), e.as_slice()))
    }

    /// Length in characters of the longest alias surface.
    pub fn max_alias_chars(&self) -> usize {
        self.max_alias_chars
    }

    /// Exact lookup of an already-normalized surface. Entries come sorted by
    /// weight descending, then id ascending.
    pub fn lookup_alias(&self, surface: &str) -> Vec<(EntityId, f64)> {
        self.aliases
            .get(surface)
            .map(|entries| entries.iter().map(|e| (e.entity.clone(), e.weight)).collect())
            .unwrap_or_default()
    }

    pub fn alias_entries(&self, surface: &str) -> &[AliasEntry] {
        self.aliases.get(surface).map(Vec::as_slice).unwrap_or(&[])
    }

    fn expect_kind(&self, id: &EntityId, expected: EntityKind) -> Result<(), LookupError> {
        match self.kind_of(id) {
            None => Err(LookupError::UnknownEntity(id.clone())),
            Some(actual) if actual != expected => {
                Err(LookupError::WrongKind { id: id.clone(), expected, actual })
            }
            Some(_) => Ok(()),
        }
    }

    pub fn diseases_with_symptom(&self, symptom: &EntityId) -> Result<BTreeSet<EntityId>, LookupError> {
        self.expect_kind(symptom, EntityKind::Symptom)?;
        Ok(self.symptom_index.get(symptom).cloned().unwrap_or_default())
    }

    /// Images of `drug` in table order.
    pub fn drug_images(&self, drug: &EntityId) -> Result<&[DrugImage], LookupError> {
        self.expect_kind(drug, EntityKind::Drug)?;
        Ok(self.images.get(drug).map(Vec::as_slice).unwrap_or(&[]))
    }

    /// Resolves an Image entity id to its attachment.
    pub fn image(&self, image: &EntityId) -> Option<&DrugImage> {
        self.image_index.get(image)
    }

    /// Checks the graph's stats against externally declared counts. Kinds
    /// absent from `expected` are not checked.
    pub fn check_counts(
        &self,
        expected: impl IntoIterator<Item = (EntityKind, usize)>,
    ) -> Result<(), KgError> {
        for (kind, expected) in expected {
            let actual = self.stats.get(kind);
            if actual != expected {
                return Err(KgError::ManifestMismatch { kind, expected, actual });
            }
        }
        Ok(())
    }
}

/// Image entity id for the `index`-th image of `drug`.
pub fn image_entity_id(drug: &EntityId, index: usize) -> EntityId {
    EntityId::new(format!("{drug}~img{index}"))
}

#[derive(Default)]
struct Builder {
    graph: Partial,
}

#[derive(Default)]
struct Partial {
    entities: BTreeMap<EntityId, Entity>,
    diseases: BTreeMap<EntityId, DiseaseRecord>,
    aliases: BTreeMap<String, Vec<AliasEntry>>,
    declared_aliases: BTreeMap<EntityId, Vec<AliasEntry>>,
    images: BTreeMap<EntityId, Vec<DrugImage>>,
    image_index: BTreeMap<EntityId, DrugImage>,
    symptom_index: BTreeMap<EntityId, BTreeSet<EntityId>>,
    order: BTreeMap<EntityKind, Vec<EntityId>>,
}

impl Builder {
    fn declare(&mut self, kind: EntityKind, line: usize, id: &str, name: &str) -> Result<EntityId, KgError> {
        let table = kind.table();
        let id = id.trim();
        let entity_id = EntityId::try_new(id).ok_or_else(|| KgError::Malformed {
            table: table.to_string(),
            line,
            message: "empty id".to_string(),
        })?;
        let name = name.trim();
        if name.is_empty() && kind != EntityKind::Image {
            return Err(KgError::Malformed {
                table: table.to_string(),
                line,
                message: format!("entity `{id}` has an empty name"),
            });
        }
        if self.graph.entities.contains_key(&entity_id) {
            return Err(KgError::DuplicateId { table: table.to_string(), line, id: id.to_string() });
        }
        self.graph.entities.insert(entity_id.clone(), Entity { kind, name: name.to_string() });
        self.graph.order.entry(kind).or_default().push(entity_id.clone());
        if kind != EntityKind::Image {
            self.insert_alias(name, &entity_id, 1.0);
        }
        Ok(entity_id)
    }

    /// Inserts `(normalize(surface), id)`. On a repeated pair the larger
    /// weight is kept. Returns the normalized surface when it is non-empty.
    fn insert_alias(&mut self, surface: &str, id: &EntityId, weight: f64) -> Option<String> {
        let surface = normalize(surface);
        if surface.is_empty() {
            return None;
        }
        let entries = self.graph.aliases.entry(surface.clone()).or_default();
        match entries.iter_mut().find(|e| &e.entity == id) {
            Some(existing) => {
                if weight > existing.weight {
                    existing.weight = weight;
                }
            }
            None => entries.push(AliasEntry { surface: surface.clone(), entity: id.clone(), weight }),
        }
        Some(surface)
    }

    fn add_plain(&mut self, kind: EntityKind, row: &EntityRow) -> Result<(), KgError> {
        let id = self.declare(kind, row.line, &row.id, &row.name)?;
        let mut declared: Vec<AliasEntry> = Vec::new();
        for alias in &row.aliases {
            if !(0.0..=1.0).contains(&alias.weight) {
                return Err(KgError::Malformed {
                    table: kind.table().to_string(),
                    line: row.line,
                    message: format!("alias `{}` has weight {} outside [0, 1]", alias.surface, alias.weight),
                });
            }
            if let Some(surface) = self.insert_alias(&alias.surface, &id, alias.weight) {
                if !declared.iter().any(|d| d.surface == surface) {
                    declared.push(AliasEntry { surface, entity: id.clone(), weight: alias.weight });
                }
            }
        }
        if !declared.is_empty() {
            self.graph.declared_aliases.insert(id, declared);
        }
        Ok(())
    }

    fn resolve(
        &self,
        row: &DiseaseRow,
        column: &str,
        raw: &str,
        expected: EntityKind,
    ) -> Result<EntityId, KgError> {
        let dangling = || KgError::DanglingReference {
            table: "diseases".to_string(),
            line: row.line,
            column: column.to_string(),
            id: raw.to_string(),
            expected,
        };
        let id = EntityId::try_new(raw.trim()).ok_or_else(dangling)?;
        match self.graph.entities.get(&id) {
            Some(entity) if entity.kind == expected => Ok(id),
            _ => Err(dangling()),
        }
    }

    fn resolve_all(
        &self,
        row: &DiseaseRow,
        column: &str,
        raw: &[String],
        expected: EntityKind,
    ) -> Result<Vec<EntityId>, KgError> {
        let mut out: Vec<EntityId> = Vec::with_capacity(raw.len());
        for value in raw.iter().filter(|v| !v.trim().is_empty()) {
            let id = self.resolve(row, column, value, expected)?;
            if !out.contains(&id) {
                out.push(id);
            }
        }
        Ok(out)
    }

    fn add_disease(&mut self, row: &DiseaseRow) -> Result<(), KgError> {
        let id = EntityId::new(row.id.trim());
        let symptoms = self.resolve_all(row, "symptoms", &row.symptoms, EntityKind::Symptom)?;
        if symptoms.is_empty() {
            return Err(KgError::EmptySymptomSet { line: row.line, id: row.id.clone() });
        }
        let examinations = self.resolve_all(row, "examinations", &row.examinations, EntityKind::Examination)?;
        let drugs = self.resolve_all(row, "drugs", &row.drugs, EntityKind::Drug)?;
        let foods_avoid = self.resolve_all(row, "foods_avoid", &row.foods_avoid, EntityKind::Food)?;
        let department = self.resolve(row, "department", &row.department, EntityKind::Department)?;
        for symptom in &symptoms {
            self.graph.symptom_index.entry(symptom.clone()).or_default().insert(id.clone());
        }
        let description = row.description.trim().to_string();
        let record = DiseaseRecord {
            id: id.clone(),
            name: row.name.trim().to_string(),
            symptom_set: symptoms.iter().cloned().collect(),
            symptoms,
            examinations,
            drugs,
            foods_avoid,
            department,
            description,
        };
        self.graph.diseases.insert(id, record);
        Ok(())
    }

    fn add_images(&mut self, row: &EntityRow) -> Result<(), KgError> {
        let drug = EntityId::new(row.id.trim());
        let uris: Vec<&str> = row.image_uris.iter().map(|u| u.trim()).filter(|u| !u.is_empty()).collect();
        for (index, uri) in uris.into_iter().enumerate() {
            let image = image_entity_id(&drug, index);
            self.declare(EntityKind::Image, row.line, image.as_str(), uri)?;
            let attachment = DrugImage { drug: drug.clone(), image: image.clone(), image_uri: uri.to_string() };
            self.graph.images.entry(drug.clone()).or_default().push(attachment.clone());
            self.graph.image_index.insert(image, attachment);
        }
        Ok(())
    }

    fn finish(self) -> KnowledgeGraph {
        let Partial {
            entities,
            diseases,
            mut aliases,
            declared_aliases,
            images,
            image_index,
            symptom_index,
            order,
        } = self.graph;
        for entries in aliases.values_mut() {
            entries.sort_by(alias_order);
        }
        let mut stats = KgStats::zeroed();
        for entity in entities.values() {
            *stats.0.entry(entity.kind).or_insert(0) += 1;
        }
        let max_alias_chars = aliases.keys().map(|s| s.chars().count()).max().unwrap_or(0);
        KnowledgeGraph {
            entities,
            diseases,
            aliases,
            declared_aliases,
            images,
            image_index,
            symptom_index,
            order,
            stats,
            max_alias_chars,
        }
    }
}

/// Weight descending, then entity id ascending.
pub fn alias_order(a: &AliasEntry, b: &AliasEntry) -> Ordering {
    b.weight.total_cmp(&a.weight).then_with(|| a.entity.cmp(&b.entity))
}
