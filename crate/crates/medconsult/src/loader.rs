//! CSV graph directories.
//!
//! A graph directory holds one UTF-8 CSV file per entity kind:
//!
//! | file               | columns                                                                    |
//! |--------------------|----------------------------------------------------------------------------|
//! | `symptoms.csv`     | `id,name,aliases`                                                          |
//! | `examinations.csv` | `id,name,aliases`                                                          |
//! | `drugs.csv`        | `id,name,aliases,image_uris`                                               |
//! | `foods.csv`        | `id,name`                                                                  |
//! | `departments.csv`  | `id,name`                                                                  |
//! | `diseases.csv`     | `id,name,department,symptoms,examinations,drugs,foods_avoid,description`   |
//!
//! Multi-valued cells separate values with `|`. An alias may carry a
//! confidence weight as a `=0.8` suffix. An optional `manifest.json` maps
//! entity kinds to expected counts and is cross-checked after loading.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use medconsult_core::kg::{
    DiseaseRow, EntityKind, EntityRow, KgError, KgTables, KnowledgeGraph, LoadOptions, RawAlias,
};

pub const MANIFEST_FILE: &str = "manifest.json";

const ENTITY_TABLES: [(&str, EntityKind); 5] = [
    ("symptoms", EntityKind::Symptom),
    ("examinations", EntityKind::Examination),
    ("drugs", EntityKind::Drug),
    ("foods", EntityKind::Food),
    ("departments", EntityKind::Department),
];

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: invalid manifest: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error(transparent)]
    Graph(#[from] KgError),
}

/// A loaded graph together with the tables it was built from.
#[derive(Debug)]
pub struct LoadedGraph {
    pub graph: KnowledgeGraph,
    pub tables: KgTables,
    /// Manifest counts, when a manifest was present (already verified).
    pub manifest: Option<BTreeMap<EntityKind, usize>>,
}

/// Reads, validates and indexes the graph in `dir`.
pub fn load_dir(dir: &Path, options: LoadOptions) -> Result<LoadedGraph, LoadError> {
    let tables = read_tables(dir)?;
    let graph = KnowledgeGraph::from_tables(&tables, options)?;
    let manifest = read_manifest(dir)?;
    if let Some(counts) = &manifest {
        graph.check_counts(counts.iter().map(|(k, v)| (*k, *v)))?;
    }
    Ok(LoadedGraph { graph, tables, manifest })
}

pub fn load_graph(dir: &Path) -> Result<KnowledgeGraph, LoadError> {
    Ok(load_dir(dir, LoadOptions::default())?.graph)
}

/// Parses every table in `dir` without building the graph.
pub fn read_tables(dir: &Path) -> Result<KgTables, LoadError> {
    let mut tables = KgTables::default();
    for (table, _) in ENTITY_TABLES {
        let rows = read_entity_table(dir, table)?;
        match table {
            "symptoms" => tables.symptoms = rows,
            "examinations" => tables.examinations = rows,
            "drugs" => tables.drugs = rows,
            "foods" => tables.foods = rows,
            _ => tables.departments = rows,
        }
    }
    tables.diseases = read_disease_table(dir)?;
    Ok(tables)
}

/// Reads `manifest.json` if present. Keys are entity kind names
/// (`Disease`, `Symptom`, ...), values are counts.
pub fn read_manifest(dir: &Path) -> Result<Option<BTreeMap<EntityKind, usize>>, LoadError> {
    let path = dir.join(MANIFEST_FILE);
    let text = match fs::read_to_string(&path) {
        Ok(text) => text,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(source) => return Err(LoadError::Io { path, source }),
    };
    let raw: BTreeMap<String, usize> = serde_json::from_str(&text)
        .map_err(|e| LoadError::Manifest { path: path.clone(), message: e.to_string() })?;
    let mut counts = BTreeMap::new();
    for (key, value) in raw {
        let kind = key.parse::<EntityKind>().map_err(|message| LoadError::Manifest { path: path.clone(), message })?;
        counts.insert(kind, value);
    }
    Ok(Some(counts))
}

/// Computes a manifest document for `graph` (sorted keys, one per kind).
pub fn manifest_json(graph: &KnowledgeGraph) -> String {
    let counts: BTreeMap<&str, usize> = EntityKind::ALL.iter().map(|k| (k.as_str(), graph.stats().get(*k))).collect();
    let mut text = serde_json::to_string_pretty(&counts).expect("counts serialize");
    text.push('\n');
    text
}

struct Table {
    name: &'static str,
    headers: csv::StringRecord,
    records: Vec<(usize, csv::StringRecord)>,
}

impl Table {
    fn column(&self, column: &str) -> Option<usize> {
        self.headers.iter().position(|h| h.trim() == column)
    }

    fn require(&self, column: &str) -> Result<usize, KgError> {
        self.column(column).ok_or_else(|| KgError::Malformed {
            table: self.name.to_string(),
            line: 1,
            message: format!("missing column `{column}`"),
        })
    }
}

fn open_table(dir: &Path, name: &'static str) -> Result<Table, LoadError> {
    let path = dir.join(format!("{name}.csv"));
    let bytes = match fs::read(&path) {
        Ok(bytes) => bytes,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(KgError::MissingTable(name.to_string()).into()),
        Err(source) => return Err(LoadError::Io { path, source }),
    };
    let malformed = |line: usize, message: String| KgError::Malformed { table: name.to_string(), line, message };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes.as_slice());
    let headers = reader.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    let mut records = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            malformed(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        records.push((line, record));
    }
    Ok(Table { name, headers, records })
}

fn multi(value: &str) -> Vec<String> {
    value.split('|').map(str::trim).filter(|v| !v.is_empty()).map(str::to_string).collect()
}

fn parse_alias(table: &str, line: usize, raw: &str) -> Result<RawAlias, KgError> {
    if let Some((surface, weight)) = raw.rsplit_once('=') {
        let weight: f64 = weight.trim().parse().map_err(|_| KgError::Malformed {
            table: table.to_string(),
            line,
            message: format!("alias `{raw}` has a non-numeric weight"),
        })?;
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(KgError::Malformed {
                table: table.to_string(),
                line,
                message: format!("alias `{raw}` weight must be in (0, 1]"),
            });
        }
        Ok(RawAlias::weighted(surface.trim(), weight))
    } else {
        Ok(RawAlias::new(raw))
    }
}

fn read_entity_table(dir: &Path, name: &'static str) -> Result<Vec<EntityRow>, LoadError> {
    let table = open_table(dir, name)?;
    let id = table.require("id")?;
    let label = table.require("name")?;
    let aliases = table.column("aliases");
    let images = table.column("image_uris");
    let mut rows = Vec::with_capacity(table.records.len());
    for (line, record) in &table.records {
        let field = |i: Option<usize>| i.and_then(|i| record.get(i)).unwrap_or("").trim();
        let alias_list = multi(field(aliases))
            .iter()
            .map(|a| parse_alias(name, *line, a))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(EntityRow {
            line: *line,
            id: field(Some(id)).to_string(),
            name: field(Some(label)).to_string(),
            aliases: alias_list,
            image_uris: multi(field(images)),
        });
    }
    Ok(rows)
}

fn read_disease_table(dir: &Path) -> Result<Vec<DiseaseRow>, LoadError> {
    let table = open_table(dir, "diseases")?;
    let id = table.require("id")?;
    let name = table.require("name")?;
    let department = table.require("department")?;
    let symptoms = table.require("symptoms")?;
    let examinations = table.column("examinations");
    let drugs = table.column("drugs");
    let foods = table.column("foods_avoid");
    let description = table.column("description");
    let mut rows = Vec::with_capacity(table.records.len());
    for (line, record) in &table.records {
        let field = |i: Option<usize>| i.and_then(|i| record.get(i)).unwrap_or("").trim();
        rows.push(DiseaseRow {
            line: *line,
            id: field(Some(id)).to_string(),
            name: field(Some(name)).to_string(),
            department: field(Some(department)).to_string(),
            symptoms: multi(field(Some(symptoms))),
            examinations: multi(field(examinations)),
            drugs: multi(field(drugs)),
            foods_avoid: multi(field(foods)),
            description: field(description).to_string(),
        });
    }
    Ok(rows)
}

fn format_aliases(aliases: &[RawAlias]) -> String {
    aliases
        .iter()
        .map(|a| if a.weight == 1.0 { a.surface.clone() } else { format!("{}={}", a.surface, a.weight) })
        .collect::<Vec<_>>()
        .join("|")
}

/// Writes `tables` as a graph directory (creating it if needed). Reading the
/// directory back yields the same tables up to line numbers.
pub fn write_tables(dir: &Path, tables: &KgTables) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let to_io = |e: csv::Error| io::Error::other(e);
    for (name, kind) in ENTITY_TABLES {
        let rows = match kind {
            EntityKind::Symptom => &tables.symptoms,
            EntityKind::Examination => &tables.examinations,
            EntityKind::Drug => &tables.drugs,
            EntityKind::Food => &tables.foods,
            _ => &tables.departments,
        };
        let mut writer = csv::Writer::from_path(dir.join(format!("{name}.csv"))).map_err(to_io)?;
        match kind {
            EntityKind::Drug => writer.write_record(["id", "name", "aliases", "image_uris"]).map_err(to_io)?,
            _ => writer.write_record(["id", "name", "aliases"]).map_err(to_io)?,
        }
        for row in rows {
            let aliases = format_aliases(&row.aliases);
            if kind == EntityKind::Drug {
                writer.write_record([&row.id, &row.name, &aliases, &row.image_uris.join("|")]).map_err(to_io)?;
            } else {
                writer.write_record([&row.id, &row.name, &aliases]).map_err(to_io)?;
            }
        }
        writer.flush()?;
    }
    let mut writer = csv::Writer::from_path(dir.join("diseases.csv")).map_err(to_io)?;
    writer
        .write_record(["id", "name", "department", "symptoms", "examinations", "drugs", "foods_avoid", "description"])
        .map_err(to_io)?;
    for d in &tables.diseases {
        writer
            .write_record([
                d.id.as_str(),
                d.name.as_str(),
                d.department.as_str(),
                &d.symptoms.join("|"),
                &d.examinations.join("|"),
                &d.drugs.join("|"),
                &d.foods_avoid.join("|"),
                d.description.as_str(),
            ])
            .map_err(to_io)?;
    }
    writer.flush()
}
