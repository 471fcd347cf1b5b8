//! Natively built inverted indices over the table corpus and the knowledge
//! base, plus the corpus-wide statistics the estimators need.
//!
//! Tables and entities are addressed internally by ordinal: their position
//! in id-sorted order. Posting lists hold ordinals, so sorting by ordinal is
//! sorting by id.
//!
//! On disk a bundle is a directory holding `manifest.json` plus one bincode
//! file per structure. Every map is a `BTreeMap`, so two builds from the
//! same input serialize to identical bytes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::IndexError;
use crate::model::{CategoryId, CorpusTable, EntityId, EntityRecord, TableId};
use crate::scoring::TermVector;
use crate::text::{normalize_label, tokenize};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

const TABLES_FILE: &str = "tables.bin";
const ENTITIES_FILE: &str = "entities.bin";
const CATEGORIES_FILE: &str = "categories.bin";
const STATS_FILE: &str = "stats.bin";

/// Text fields of a corpus table that get term postings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TableField {
    Caption,
    PageTitle,
    SectionTitle,
    Labels,
}

impl TableField {
    pub const ALL: [TableField; 4] = [
        TableField::Caption,
        TableField::PageTitle,
        TableField::SectionTitle,
        TableField::Labels,
    ];

    fn slot(self) -> usize {
        self as usize
    }

    fn tokens(self, t: &CorpusTable) -> Vec<String> {
        match self {
            TableField::Caption => tokenize(&t.caption),
            TableField::PageTitle => tokenize(&t.page_title),
            TableField::SectionTitle => tokenize(&t.section_title),
            TableField::Labels => t.labels.iter().flat_map(|l| tokenize(l)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub table: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldIndex {
    postings: BTreeMap<String, Vec<Posting>>,
    lengths: Vec<u32>,
    avg_len: f64,
}

impl FieldIndex {
    pub fn postings(&self, term: &str) -> Option<&[Posting]> {
        self.postings.get(term).map(Vec::as_slice)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &[Posting])> {
        self.postings.iter().map(|(t, p)| (t.as_str(), p.as_slice()))
    }

    pub fn length(&self, table: u32) -> u32 {
        self.lengths.get(table as usize).copied().unwrap_or(0)
    }

    pub fn lengths(&self) -> &[u32] {
        &self.lengths
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableIndex {
    tables: Vec<CorpusTable>,
    fields: [FieldIndex; 4],
    /// Entity ordinal → tables holding it in the core column.
    entity_postings: Vec<Vec<u32>>,
    /// Normalized label → tables carrying it as a heading.
    label_postings: BTreeMap<String, Vec<u32>>,
    /// Normalized label → most frequent raw form across the corpus.
    label_display: BTreeMap<String, String>,
    /// Per table: distinct normalized labels in heading order.
    table_labels: Vec<Vec<String>>,
    /// Per table: core-column entity ordinals, ascending.
    table_entities: Vec<Vec<u32>>,
}

impl TableIndex {
    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn ordinal(&self, id: &str) -> Option<u32> {
        self.tables
            .binary_search_by(|t| t.id.as_str().cmp(id))
            .ok()
            .map(|i| i as u32)
    }

    pub fn table(&self, ordinal: u32) -> &CorpusTable {
        &self.tables[ordinal as usize]
    }

    pub fn tables(&self) -> &[CorpusTable] {
        &self.tables
    }

    pub fn field(&self, field: TableField) -> &FieldIndex {
        &self.fields[field.slot()]
    }

    pub fn entity_postings(&self, entity: u32) -> &[u32] {
        self.entity_postings
            .get(entity as usize)
            .map_or(&[], Vec::as_slice)
    }

    /// Tables carrying the normalized label `label`.
    pub fn label_postings(&self, label: &str) -> &[u32] {
        self.label_postings.get(label).map_or(&[], Vec::as_slice)
    }

    pub fn label_vocabulary(&self) -> impl Iterator<Item = (&str, &[u32])> {
        self.label_postings
            .iter()
            .map(|(l, p)| (l.as_str(), p.as_slice()))
    }

    pub fn label_display(&self, label: &str) -> Option<&str> {
        self.label_display.get(label).map(String::as_str)
    }

    pub fn table_labels(&self, table: u32) -> &[String] {
        &self.table_labels[table as usize]
    }

    pub fn table_entities(&self, table: u32) -> &[u32] {
        &self.table_entities[table as usize]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EntityIndex {
    records: Vec<EntityRecord>,
    /// Term counts of each entity's abstract.
    abstract_terms: Vec<TermVector>,
    /// Label-token counts over the headings of every table holding the entity.
    label_terms: Vec<TermVector>,
    /// Token of the normalized canonical name → entity ordinals.
    name_postings: BTreeMap<String, Vec<u32>>,
    normalized_names: Vec<String>,
}

impl EntityIndex {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ordinal(&self, id: &str) -> Option<u32> {
        self.records
            .binary_search_by(|r| r.id.as_str().cmp(id))
            .ok()
            .map(|i| i as u32)
    }

    pub fn record(&self, ordinal: u32) -> &EntityRecord {
        &self.records[ordinal as usize]
    }

    pub fn get(&self, id: &str) -> Option<&EntityRecord> {
        self.ordinal(id).map(|o| self.record(o))
    }

    pub fn records(&self) -> &[EntityRecord] {
        &self.records
    }

    pub fn abstract_terms(&self, ordinal: u32) -> &TermVector {
        &self.abstract_terms[ordinal as usize]
    }

    pub fn label_terms(&self, ordinal: u32) -> &TermVector {
        &self.label_terms[ordinal as usize]
    }

    pub fn name_postings(&self) -> &BTreeMap<String, Vec<u32>> {
        &self.name_postings
    }

    pub fn normalized_name(&self, ordinal: u32) -> &str {
        &self.normalized_names[ordinal as usize]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryIndex {
    members: BTreeMap<CategoryId, Vec<u32>>,
}

impl CategoryIndex {
    /// Ordinals of the members of `category`, ascending.
    pub fn members(&self, category: &str) -> &[u32] {
        self.members.get(category).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CollectionStats {
    /// Token counts over the concatenated headings of all tables.
    pub label_lm: TermVector,
    /// Token counts over all entity abstracts.
    pub abstract_lm: TermVector,
    /// Per entity ordinal: caption term → number of tables holding the
    /// entity in the core column and the term in the caption.
    caption_cooccurrence: Vec<TermVector>,
    pub table_count: usize,
}

impl CollectionStats {
    /// `#(t, e)`.
    pub fn caption_cooccurrence(&self, entity: u32, term: &str) -> u32 {
        self.caption_cooccurrence
            .get(entity as usize)
            .map_or(0, |tv| tv.tf(term))
    }
}

/// Content hashes of the files a bundle was built from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuiltFrom {
    pub corpus: String,
    pub kb: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub format_version: u32,
    pub tables: usize,
    pub entities: usize,
    pub built_from: BuiltFrom,
    /// File name → SHA-256 of its bytes.
    pub files: BTreeMap<String, String>,
}

/// The three inverted indices and the collection statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndexBundle {
    pub tables: TableIndex,
    pub entities: EntityIndex,
    pub categories: CategoryIndex,
    pub stats: CollectionStats,
    pub built_from: BuiltFrom,
}

impl IndexBundle {
    /// Builds every structure from validated ingestion output.
    ///
    /// Output is independent of input order. Core-column ids that do not
    /// resolve against `entities` are ignored; on duplicate ids the last
    /// record wins.
    pub fn build(
        tables: impl IntoIterator<Item = CorpusTable>,
        entities: impl IntoIterator<Item = EntityRecord>,
    ) -> Self {
        let records = dedup_sorted(entities.into_iter().collect(), |r: &EntityRecord| {
            r.id.clone()
        });
        let mut tables = dedup_sorted(tables.into_iter().collect(), |t: &CorpusTable| {
            t.id.clone()
        });

        let ordinal: HashMap<&str, u32> = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.as_str(), i as u32))
            .collect();
        for t in &mut tables {
            t.core_entities.retain(|e| ordinal.contains_key(e.as_str()));
        }

        let n_entities = records.len();
        let mut fields: [FieldIndex; 4] = Default::default();
        let mut entity_postings = vec![Vec::new(); n_entities];
        let mut label_postings: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        let mut raw_forms: BTreeMap<String, BTreeMap<&str, (usize, u32)>> = BTreeMap::new();
        let mut table_labels = Vec::with_capacity(tables.len());
        let mut table_entities = Vec::with_capacity(tables.len());
        let mut label_lm = TermVector::new();
        let mut label_terms = vec![TermVector::new(); n_entities];
        let mut caption_cooccurrence = vec![TermVector::new(); n_entities];

        for (ti, table) in tables.iter().enumerate() {
            let ti = ti as u32;
            for field in TableField::ALL {
                let tokens = field.tokens(table);
                let f = &mut fields[field.slot()];
                f.lengths.push(tokens.len() as u32);
                for (term, tf) in TermVector::from_terms(tokens).iter() {
                    f.postings
                        .entry(term.to_owned())
                        .or_default()
                        .push(Posting { table: ti, tf });
                }
            }

            let mut labels: Vec<String> = Vec::new();
            for raw in &table.labels {
                let norm = normalize_label(raw);
                if norm.is_empty() {
                    continue;
                }
                raw_forms
                    .entry(norm.clone())
                    .or_default()
                    .entry(raw.as_str())
                    .or_insert((0, ti))
                    .0 += 1;
                if !labels.contains(&norm) {
                    label_postings.entry(norm.clone()).or_default().push(ti);
                    labels.push(norm);
                }
            }
            table_labels.push(labels);

            let label_tokens: Vec<String> =
                table.labels.iter().flat_map(|l| tokenize(l)).collect();
            for t in &label_tokens {
                label_lm.add(t.as_str(), 1);
            }
            let caption_terms: BTreeSet<String> = tokenize(&table.caption).into_iter().collect();

            let mut ents: Vec<u32> = table
                .core_entities
                .iter()
                .map(|e| ordinal[e.as_str()])
                .collect();
            ents.sort_unstable();
            ents.dedup();
            for &e in &ents {
                entity_postings[e as usize].push(ti);
                let tv = &mut label_terms[e as usize];
                for t in &label_tokens {
                    tv.add(t.as_str(), 1);
                }
                let cc = &mut caption_cooccurrence[e as usize];
                for t in &caption_terms {
                    cc.add(t.as_str(), 1);
                }
            }
            table_entities.push(ents);
        }

        for f in &mut fields {
            let sum: u64 = f.lengths.iter().map(|&l| u64::from(l)).sum();
            f.avg_len = if f.lengths.is_empty() {
                0.0
            } else {
                sum as f64 / f.lengths.len() as f64
            };
        }

        // Most frequent raw form; ties go to the form seen in the lowest table.
        let label_display = raw_forms
            .into_iter()
            .map(|(norm, forms)| {
                let best = forms
                    .iter()
                    .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
                    .map(|(raw, _)| raw.to_string())
                    .unwrap_or_else(|| norm.clone());
                (norm, best)
            })
            .collect();

        let mut abstract_lm = TermVector::new();
        let mut abstract_terms = Vec::with_capacity(n_entities);
        let mut name_postings: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        let mut normalized_names = Vec::with_capacity(n_entities);
        let mut members: BTreeMap<CategoryId, Vec<u32>> = BTreeMap::new();
        for (ei, rec) in records.iter().enumerate() {
            let ei = ei as u32;
            let tv = TermVector::from_terms(tokenize(&rec.abstract_text));
            for (t, n) in tv.iter() {
                abstract_lm.add(t, n);
            }
            abstract_terms.push(tv);

            let name = normalize_label(&rec.label);
            let name_tokens: BTreeSet<String> = tokenize(&name).into_iter().collect();
            for t in name_tokens {
                name_postings.entry(t).or_default().push(ei);
            }
            normalized_names.push(name);

            for c in &rec.categories {
                members.entry(c.clone()).or_default().push(ei);
            }
        }

        let table_count = tables.len();
        IndexBundle {
            tables: TableIndex {
                tables,
                fields,
                entity_postings,
                label_postings,
                label_display,
                table_labels,
                table_entities,
            },
            entities: EntityIndex {
                records,
                abstract_terms,
                label_terms,
                name_postings,
                normalized_names,
            },
            categories: CategoryIndex { members },
            stats: CollectionStats {
                label_lm,
                abstract_lm,
                caption_cooccurrence,
                table_count,
            },
            built_from: BuiltFrom::default(),
        }
    }

    pub fn entity_ordinal(&self, id: &str) -> Option<u32> {
        self.entities.ordinal(id)
    }

    /// Tables whose core column contains `entity`, sorted by table id.
    pub fn tables_with_entity(&self, entity: &str) -> Vec<&TableId> {
        match self.entity_ordinal(entity) {
            Some(e) => self
                .tables
                .entity_postings(e)
                .iter()
                .map(|&t| &self.tables.table(t).id)
                .collect(),
            None => Vec::new(),
        }
    }

    /// Members of `category`.
    pub fn entities_in_category(&self, category: &str) -> BTreeSet<&EntityId> {
        self.categories
            .members(category)
            .iter()
            .map(|&e| &self.entities.record(e).id)
            .collect()
    }

    /// `#(e)`: number of tables holding the entity in the core column.
    pub fn entity_table_count(&self, entity: u32) -> usize {
        self.tables.entity_postings(entity).len()
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            format_version: FORMAT_VERSION,
            tables: self.tables.len(),
            entities: self.entities.len(),
            built_from: self.built_from.clone(),
            files: BTreeMap::new(),
        }
    }

    /// Writes the bundle into `dir`, creating it if needed.
    pub fn persist(&self, dir: &Path) -> Result<(), IndexError> {
        fs::create_dir_all(dir).map_err(|source| IndexError::Io {
            structure: format!("index directory {}", dir.display()),
            source,
        })?;
        let mut manifest = self.manifest();
        let parts: [(&str, Vec<u8>); 4] = [
            (TABLES_FILE, encode(TABLES_FILE, &self.tables)?),
            (ENTITIES_FILE, encode(ENTITIES_FILE, &self.entities)?),
            (CATEGORIES_FILE, encode(CATEGORIES_FILE, &self.categories)?),
            (STATS_FILE, encode(STATS_FILE, &self.stats)?),
        ];
        for (name, bytes) in &parts {
            write(dir, name, bytes)?;
            manifest
                .files
                .insert((*name).to_owned(), hex::encode(Sha256::digest(bytes)));
        }
        let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        write(dir, MANIFEST, &json)
    }

    /// Reads and verifies a bundle written by [`IndexBundle::persist`].
    pub fn load(dir: &Path) -> Result<Self, IndexError> {
        let manifest = read_manifest(dir)?;
        let read = |name: &str| -> Result<Vec<u8>, IndexError> {
            let bytes = fs::read(dir.join(name)).map_err(|source| IndexError::Io {
                structure: name.to_owned(),
                source,
            })?;
            match manifest.files.get(name) {
                Some(sum) if *sum == hex::encode(Sha256::digest(&bytes)) => Ok(bytes),
                _ => Err(IndexError::Checksum {
                    file: name.to_owned(),
                }),
            }
        };
        let bundle = IndexBundle {
            tables: decode(TABLES_FILE, &read(TABLES_FILE)?)?,
            entities: decode(ENTITIES_FILE, &read(ENTITIES_FILE)?)?,
            categories: decode(CATEGORIES_FILE, &read(CATEGORIES_FILE)?)?,
            stats: decode(STATS_FILE, &read(STATS_FILE)?)?,
            built_from: manifest.built_from.clone(),
        };
        if bundle.tables.len() != manifest.tables || bundle.entities.len() != manifest.entities {
            return Err(IndexError::BadManifest(format!(
                "manifest declares {} tables / {} entities, files hold {} / {}",
                manifest.tables,
                manifest.entities,
                bundle.tables.len(),
                bundle.entities.len()
            )));
        }
        Ok(bundle)
    }
}

/// Parses the manifest of `dir`, checking the format version before
/// anything else.
pub fn read_manifest(dir: &Path) -> Result<Manifest, IndexError> {
    let path = dir.join(MANIFEST);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(IndexError::MissingManifest(dir.to_owned()))
        }
        Err(source) => {
            return Err(IndexError::Io {
                structure: MANIFEST.to_owned(),
                source,
            })
        }
    };
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| IndexError::BadManifest(e.to_string()))?;
    let found = value
        .get("formatVersion")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| IndexError::BadManifest("missing formatVersion".into()))?;
    if found != u64::from(FORMAT_VERSION) {
        return Err(IndexError::VersionMismatch {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    serde_json::from_value(value).map_err(|e| IndexError::BadManifest(e.to_string()))
}

/// Sorts by key and keeps the last of each run of equal keys.
fn dedup_sorted<T, K: Ord>(mut items: Vec<T>, key: impl Fn(&T) -> K) -> Vec<T> {
    // Stable sort keeps input order within equal keys.
    items.sort_by_key(|x| key(x));
    let mut out: Vec<T> = Vec::with_capacity(items.len());
    for item in items {
        if out.last().is_some_and(|prev| key(prev) == key(&item)) {
            *out.last_mut().unwrap() = item;
        } else {
            out.push(item);
        }
    }
    out
}

fn encode<T: Serialize>(name: &str, value: &T) -> Result<Vec<u8>, IndexError> {
    bincode::serialize(value).map_err(|source| IndexError::Codec {
        structure: name.to_owned(),
        source,
    })
}

fn decode<T: serde::de::DeserializeOwned>(name: &str, bytes: &[u8]) -> Result<T, IndexError> {
    bincode::deserialize(bytes).map_err(|source| IndexError::Codec {
        structure: name.to_owned(),
        source,
    })
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), IndexError> {
    fs::write(dir.join(name), bytes).map_err(|source| IndexError::Io {
        structure: name.to_owned(),
        source,
    })
}

/// Hex SHA-256 of a file's bytes, used for [`BuiltFrom`].
pub fn file_digest(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}
