//! Readers for the knowledge-base and table-corpus JSON Lines files.
//!
//! Both readers follow the same per-line policy: a line that is not valid
//! UTF-8 or not a valid record is reported as a [`LineError`] and skipped,
//! and processing continues. Only an unreadable file is fatal.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::IngestError;
use crate::model::{CategoryId, Cell, CorpusTable, EntityId, EntityRecord, TableId};
use crate::text::normalize_label;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

/// Knowledge-base line format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntityLine {
    pub id: String,
    pub label: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: Option<String>,
    #[serde(default)]
    pub categories: Vec<String>,
}

/// Corpus line format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TableLine {
    pub id: String,
    #[serde(default)]
    pub page_title: String,
    #[serde(default)]
    pub section_title: String,
    #[serde(default)]
    pub caption: String,
    #[serde(default)]
    pub headers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub core_column_index: Option<usize>,
    #[serde(default)]
    pub rows: Vec<Vec<Cell>>,
}

impl From<&CorpusTable> for TableLine {
    fn from(t: &CorpusTable) -> Self {
        Self {
            id: t.id.0.clone(),
            page_title: t.page_title.clone(),
            section_title: t.section_title.clone(),
            caption: t.caption.clone(),
            headers: t.labels.clone(),
            core_column_index: Some(t.core_column),
            rows: t.cells.clone(),
        }
    }
}

#[derive(Debug, Default)]
pub struct KbLoad {
    pub entities: Vec<EntityRecord>,
    /// Entities skipped for lacking an abstract.
    pub dropped_entities: usize,
    /// Records that replaced an earlier record with the same id.
    pub duplicate_ids: usize,
    pub line_errors: Vec<LineError>,
    /// Non-blank input lines.
    pub lines: usize,
}

impl KbLoad {
    pub fn ids(&self) -> HashSet<EntityId> {
        self.entities.iter().map(|e| e.id.clone()).collect()
    }
}

#[derive(Debug, Default)]
pub struct CorpusLoad {
    pub tables: Vec<CorpusTable>,
    /// Entity links cleared because the target is not in the knowledge base.
    pub dangling_links: usize,
    pub duplicate_ids: usize,
    pub line_errors: Vec<LineError>,
    pub lines: usize,
}

/// Per-run ingestion counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CorpusStats {
    pub table_count: usize,
    pub entity_count: usize,
    pub dropped_entities: usize,
    pub dangling_links: usize,
    pub label_vocabulary_size: usize,
    pub duplicate_tables: usize,
    pub duplicate_entities: usize,
    pub kb_line_errors: usize,
    pub corpus_line_errors: usize,
}

impl CorpusStats {
    pub fn new(kb: &KbLoad, corpus: &CorpusLoad) -> Self {
        let vocab: HashSet<String> = corpus
            .tables
            .iter()
            .flat_map(|t| t.labels.iter().map(|l| normalize_label(l)))
            .filter(|l| !l.is_empty())
            .collect();
        Self {
            table_count: corpus.tables.len(),
            entity_count: kb.entities.len(),
            dropped_entities: kb.dropped_entities,
            dangling_links: corpus.dangling_links,
            label_vocabulary_size: vocab.len(),
            duplicate_tables: corpus.duplicate_ids,
            duplicate_entities: kb.duplicate_ids,
            kb_line_errors: kb.line_errors.len(),
            corpus_line_errors: corpus.line_errors.len(),
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, IngestError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| IngestError::Io {
            path: path.to_owned(),
            source,
        })
}

/// Yields `(line_number, Result<text, error_message>)` for non-blank lines.
fn lines<R: BufRead>(
    reader: R,
) -> impl Iterator<Item = std::io::Result<(usize, Result<String, String>)>> {
    reader
        .split(b'\n')
        .enumerate()
        .filter_map(|(i, chunk)| match chunk {
            Err(e) => Some(Err(e)),
            Ok(mut bytes) => {
                if bytes.last() == Some(&b'\r') {
                    bytes.pop();
                }
                if bytes.iter().all(u8::is_ascii_whitespace) {
                    return None;
                }
                let text = String::from_utf8(bytes).map_err(|e| format!("invalid UTF-8: {e}"));
                Some(Ok((i + 1, text)))
            }
        })
}

pub fn load_kb(path: &Path) -> Result<KbLoad, IngestError> {
    read_kb(open(path)?).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn read_kb<R: BufRead>(reader: R) -> std::io::Result<KbLoad> {
    let mut out = KbLoad::default();
    let mut slot: HashMap<EntityId, usize> = HashMap::new();
    for item in lines(reader) {
        let (line, text) = item?;
        out.lines += 1;
        let parsed = text.and_then(|t| {
            serde_json::from_str::<EntityLine>(&t).map_err(|e| format!("malformed record: {e}"))
        });
        let rec = match parsed {
            Ok(r) if r.id.is_empty() => {
                out.line_errors.push(LineError {
                    line,
                    message: "empty entity id".into(),
                });
                continue;
            }
            Ok(r) => r,
            Err(message) => {
                out.line_errors.push(LineError { line, message });
                continue;
            }
        };
        let abstract_text = rec.abstract_text.unwrap_or_default();
        if abstract_text.trim().is_empty() {
            out.dropped_entities += 1;
            continue;
        }
        let record = EntityRecord {
            id: EntityId(rec.id),
            label: rec.label,
            abstract_text,
            categories: rec
                .categories
                .into_iter()
                .filter(|c| !c.is_empty())
                .map(CategoryId)
                .collect(),
        };
        match slot.get(&record.id) {
            Some(&i) => {
                out.duplicate_ids += 1;
                out.entities[i] = record;
            }
            None => {
                slot.insert(record.id.clone(), out.entities.len());
                out.entities.push(record);
            }
        }
    }
    Ok(out)
}

pub fn load_corpus(path: &Path, kb: &HashSet<EntityId>) -> Result<CorpusLoad, IngestError> {
    read_corpus(open(path)?, kb).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn read_corpus<R: BufRead>(reader: R, kb: &HashSet<EntityId>) -> std::io::Result<CorpusLoad> {
    let mut out = CorpusLoad::default();
    let mut slot: HashMap<TableId, usize> = HashMap::new();
    for item in lines(reader) {
        let (line, text) = item?;
        out.lines += 1;
        let parsed = text
            .and_then(|t| {
                serde_json::from_str::<TableLine>(&t).map_err(|e| format!("malformed record: {e}"))
            })
            .and_then(|t| to_table(t, kb, &mut out.dangling_links));
        let table = match parsed {
            Ok(t) => t,
            Err(message) => {
                out.line_errors.push(LineError { line, message });
                continue;
            }
        };
        match slot.get(&table.id) {
            Some(&i) => {
                out.duplicate_ids += 1;
                out.tables[i] = table;
            }
            None => {
                slot.insert(table.id.clone(), out.tables.len());
                out.tables.push(table);
            }
        }
    }
    Ok(out)
}

fn to_table(
    line: TableLine,
    kb: &HashSet<EntityId>,
    dangling: &mut usize,
) -> Result<CorpusTable, String> {
    if line.id.is_empty() {
        return Err("empty table id".into());
    }
    let mut rows = line.rows;
    let mut cleared = 0;
    for cell in rows.iter_mut().flatten() {
        match &cell.entity_id {
            Some(id) if id.0.is_empty() => cell.entity_id = None,
            Some(id) if !kb.contains(id) => {
                cell.entity_id = None;
                cleared += 1;
            }
            _ => {}
        }
    }
    let width = rows
        .iter()
        .map(Vec::len)
        .max()
        .unwrap_or(0)
        .max(line.headers.len());
    let core_column = match line.core_column_index {
        Some(c) if width > 0 && c >= width => {
            return Err(format!(
                "coreColumnIndex {c} out of range for {width} columns"
            ))
        }
        Some(c) => c,
        None => guess_core_column(&rows, width),
    };
    *dangling += cleared;

    let mut core_entities: Vec<EntityId> = Vec::new();
    let mut seen = HashSet::new();
    for row in &rows {
        if let Some(id) = row.get(core_column).and_then(|c| c.entity_id.as_ref()) {
            if seen.insert(id.clone()) {
                core_entities.push(id.clone());
            }
        }
    }
    Ok(CorpusTable {
        id: TableId(line.id),
        page_title: line.page_title,
        section_title: line.section_title,
        caption: line.caption,
        labels: line.headers,
        core_entities,
        core_column,
        cells: rows,
    })
}

/// Leftmost column with the highest fraction of entity-linked cells.
fn guess_core_column(rows: &[Vec<Cell>], width: usize) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let mut best = (0usize, 0usize);
    for col in 0..width {
        let linked = rows
            .iter()
            .filter(|r| r.get(col).is_some_and(|c| c.entity_id.is_some()))
            .count();
        if linked > best.1 {
            best = (col, linked);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kb_ids(ids: &[&str]) -> HashSet<EntityId> {
        ids.iter().map(|&s| s.into()).collect()
    }

    #[test]
    fn kb_pass_through_and_drop() {
        let input = concat!(
            r#"{"id":"E1","label":"Norway","abstract":"A country.","categories":["C1"]}"#,
            "\n",
            r#"{"id":"E2","label":"X","abstract":"","categories":[]}"#,
            "\n",
            r#"{"id":"E3","label":"Y","categories":[]}"#,
            "\n"
        );
        let kb = read_kb(input.as_bytes()).unwrap();
        assert_eq!(kb.entities.len(), 1);
        assert_eq!(kb.entities[0].id.as_str(), "E1");
        assert_eq!(kb.entities[0].abstract_text, "A country.");
        assert!(kb.entities[0].categories.contains("C1"));
        assert_eq!(kb.dropped_entities, 2);
        assert!(kb.line_errors.is_empty());
    }

    #[test]
    fn kb_malformed_line_is_reported_and_skipped() {
        let input = concat!(
            r#"{"id":"E1","label":"a","abstract":"x","categories":[]}"#,
            "\n",
            r#"{"id":"E2","label":"b","abstract":"y","categories":[]}"#,
            "\n",
            "{not json\n",
            r#"{"id":"E3","label":"c","abstract":"z","categories":[]}"#,
            "\n",
        );
        let kb = read_kb(input.as_bytes()).unwrap();
        assert_eq!(kb.entities.len(), 3);
        assert_eq!(kb.line_errors.len(), 1);
        assert_eq!(kb.line_errors[0].line, 3);
    }

    #[test]
    fn kb_duplicate_last_wins() {
        let input = concat!(
            r#"{"id":"E1","label":"old","abstract":"x","categories":[]}"#,
            "\n",
            r#"{"id":"E1","label":"new","abstract":"y","categories":[]}"#,
        );
        let kb = read_kb(input.as_bytes()).unwrap();
        assert_eq!(kb.entities.len(), 1);
        assert_eq!(kb.entities[0].label, "new");
        assert_eq!(kb.duplicate_ids, 1);
    }

    #[test]
    fn invalid_utf8_is_a_line_error() {
        let mut input = br#"{"id":"E1","label":"a","abstract":"x","categories":[]}"#.to_vec();
        input.extend_from_slice(b"\n{\"id\":\"E\xff\"}\n");
        let kb = read_kb(input.as_slice()).unwrap();
        assert_eq!(kb.entities.len(), 1);
        assert_eq!(kb.line_errors.len(), 1);
        assert!(kb.line_errors[0].message.contains("UTF-8"));
    }

    #[test]
    fn dangling_links_become_text() {
        let input = r#"{"id":"T1","pageTitle":"p","sectionTitle":"s","caption":"c","headers":["a","b"],"coreColumnIndex":0,"rows":[[{"text":"Foo","entityId":"MISSING"},{"text":"1"}],[{"text":"Bar","entityId":"E1"},{"text":"2","entityId":null}]]}"#;
        let corpus = read_corpus(input.as_bytes(), &kb_ids(&["E1"])).unwrap();
        let t = &corpus.tables[0];
        assert_eq!(t.cells[0][0], Cell::text("Foo"));
        assert_eq!(corpus.dangling_links, 1);
        assert_eq!(t.core_entities, vec![EntityId::from("E1")]);
    }

    #[test]
    fn core_entities_dedup_in_first_occurrence_order() {
        let input = r#"{"id":"T1","headers":["n"],"coreColumnIndex":0,"rows":[[{"text":"b","entityId":"E2"}],[{"text":"a","entityId":"E1"}],[{"text":"b","entityId":"E2"}]]}"#;
        let corpus = read_corpus(input.as_bytes(), &kb_ids(&["E1", "E2"])).unwrap();
        let got: Vec<&str> = corpus.tables[0]
            .core_entities
            .iter()
            .map(EntityId::as_str)
            .collect();
        assert_eq!(got, ["E2", "E1"]);
    }

    #[test]
    fn core_column_fallback_prefers_most_linked_leftmost() {
        let input = r##"{"id":"T1","headers":["#","name","x"],"rows":[[{"text":"1"},{"text":"a","entityId":"E1"},{"text":"q","entityId":"E2"}],[{"text":"2"},{"text":"b","entityId":"E2"},{"text":"r","entityId":"E1"}]]}"##;
        let corpus = read_corpus(input.as_bytes(), &kb_ids(&["E1", "E2"])).unwrap();
        assert_eq!(corpus.tables[0].core_column, 1);
        assert_eq!(
            corpus.tables[0].core_entities,
            vec![EntityId::from("E1"), EntityId::from("E2")]
        );
    }

    #[test]
    fn core_column_out_of_range_is_line_error() {
        let input = r#"{"id":"T1","headers":["a"],"coreColumnIndex":3,"rows":[[{"text":"x"}]]}"#;
        let corpus = read_corpus(input.as_bytes(), &HashSet::new()).unwrap();
        assert!(corpus.tables.is_empty());
        assert_eq!(corpus.line_errors.len(), 1);
    }

    #[test]
    fn table_count_plus_errors_equals_lines() {
        let input = concat!(
            r#"{"id":"T1","headers":["a"],"coreColumnIndex":0,"rows":[]}"#,
            "\n\n",
            "garbage\n",
            r#"{"id":"T2","headers":["a"],"coreColumnIndex":0,"rows":[]}"#,
            "\n"
        );
        let corpus = read_corpus(input.as_bytes(), &HashSet::new()).unwrap();
        assert_eq!(corpus.tables.len() + corpus.line_errors.len(), corpus.lines);
        assert_eq!(corpus.lines, 3);
    }

    #[test]
    fn unreadable_file_is_fatal() {
        let err = load_kb(Path::new("/definitely/not/here.jsonl")).unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here.jsonl"));
    }
}
