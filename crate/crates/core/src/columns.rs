//! Column population: suggest heading labels for the seed table.
//!
//! A candidate label scores the summed relevance of the related tables that
//! carry it, where a table's relevance is the product of its entity
//! coverage, caption BM25 and label overlap (see [`RelatedTable`]).

use std::collections::{BTreeMap, HashMap};

use crate::error::QueryError;
use crate::index::IndexBundle;
use crate::model::{ScoringParams, SeedTable, Suggestion};
use crate::retrieval::{related_for, RelatedTable, RelatedTableSet, ResolvedSeed};

pub const TABLE_RELEVANCE: &str = "table-relevance";

struct Candidate<'a> {
    score: f64,
    /// Raw form → (tables using it, first table ordinal).
    forms: HashMap<&'a str, (usize, u32)>,
}

/// Ranks the labels of `related` that the seed does not already have.
///
/// Ties break by normalized label. The suggestion target is the most
/// frequent raw form among the related tables, ties to the form seen first.
pub fn rank_labels(
    seed: &SeedTable,
    related: &RelatedTableSet,
    bundle: &IndexBundle,
    limit: usize,
) -> Vec<Suggestion> {
    if limit == 0 {
        return Vec::new();
    }
    let seed_labels = seed.normalized_labels();
    let mut candidates: BTreeMap<&str, Candidate<'_>> = BTreeMap::new();
    for t in &related.tables {
        let relevance = t.relevance();
        let table = bundle.tables.table(t.ordinal);
        let normalized = bundle.tables.table_labels(t.ordinal);
        for label in normalized {
            if seed_labels.contains(label) {
                continue;
            }
            candidates
                .entry(label.as_str())
                .or_insert_with(|| Candidate {
                    score: 0.0,
                    forms: HashMap::new(),
                })
                .score += relevance;
        }
        for raw in &table.labels {
            let norm = crate::text::normalize_label(raw);
            if let Some(c) = candidates.get_mut(norm.as_str()) {
                c.forms.entry(raw.as_str()).or_insert((0, t.ordinal)).0 += 1;
            }
        }
    }

    let mut ranked: Vec<(&str, Candidate<'_>)> = candidates.into_iter().collect();
    ranked.sort_by(|a, b| b.1.score.total_cmp(&a.1.score).then(a.0.cmp(b.0)));
    ranked.truncate(limit);
    ranked
        .into_iter()
        .map(|(norm, c)| {
            let display = c
                .forms
                .iter()
                .max_by(|a, b| {
                    a.1 .0
                        .cmp(&b.1 .0)
                        .then(b.1 .1.cmp(&a.1 .1))
                        .then(b.0.cmp(a.0))
                })
                .map_or(norm, |(raw, _)| *raw);
            Suggestion::from_components(display, [(TABLE_RELEVANCE, c.score)])
        })
        .collect()
}

/// Related-table retrieval followed by label ranking.
pub fn suggest_columns(
    seed: &SeedTable,
    bundle: &IndexBundle,
    params: &ScoringParams,
    limit: usize,
) -> Result<Vec<Suggestion>, QueryError> {
    let resolved = ResolvedSeed::new(seed, bundle)?;
    if resolved.is_empty() {
        return Err(QueryError::EmptySeed);
    }
    let related = related_for(&resolved, bundle, params);
    Ok(rank_labels(seed, &related, bundle, limit))
}

/// Supporting tables of a label, with their relevance, best first.
pub fn supporting_tables<'a>(
    label: &str,
    related: &'a RelatedTableSet,
    bundle: &IndexBundle,
) -> Vec<&'a RelatedTable> {
    let norm = crate::text::normalize_label(label);
    let mut out: Vec<&RelatedTable> = related
        .tables
        .iter()
        .filter(|t| bundle.tables.table_labels(t.ordinal).contains(&norm))
        .collect();
    out.sort_by(|a, b| b.relevance().total_cmp(&a.relevance()).then(a.id.cmp(&b.id)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CorpusTable, EntityRecord};
    use crate::retrieval::find_related_tables;

    fn table(id: &str, caption: &str, labels: &[&str], ents: &[&str]) -> CorpusTable {
        CorpusTable {
            id: id.into(),
            page_title: String::new(),
            section_title: String::new(),
            caption: caption.into(),
            labels: labels.iter().map(|&s| s.into()).collect(),
            core_entities: ents.iter().map(|&s| s.into()).collect(),
            core_column: 0,
            cells: vec![],
        }
    }

    fn entity(id: &str) -> EntityRecord {
        EntityRecord {
            id: id.into(),
            label: id.into(),
            abstract_text: "x".into(),
            categories: Default::default(),
        }
    }

    fn seed(caption: &str, ents: &[&str], labels: &[&str]) -> SeedTable {
        SeedTable::new(
            caption,
            ents.iter().map(|&s| s.into()).collect(),
            labels.iter().map(|&s| s.into()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_table_neutral_factors() {
        let b = IndexBundle::build(
            vec![table("T1", "", &["Name", "Points"], &["E1"])],
            vec![entity("E1")],
        );
        let s = seed("", &["E1"], &["name"]);
        let params = ScoringParams::default();
        let related = find_related_tables(&s, &b, &params).unwrap();
        let out = rank_labels(&s, &related, &b, 10);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].target, "Points");
        assert_eq!(out[0].score, 1.0);
    }

    #[test]
    fn scores_sum_over_tables() {
        let b = IndexBundle::build(
            vec![
                table("T1", "", &["wins", "coach"], &["E1"]),
                table("T2", "", &["wins"], &["E1", "E2"]),
            ],
            vec![entity("E1"), entity("E2")],
        );
        let s = seed("", &["E1", "E2"], &[]);
        let out = suggest_columns(&s, &b, &Default::default(), 10).unwrap();
        // T1 covers half the seed entities, T2 all of them.
        assert_eq!(out[0].target, "wins");
        assert_eq!(out[0].score, 1.5);
        assert_eq!(out[1].target, "coach");
        assert_eq!(out[1].score, 0.5);
    }

    #[test]
    fn display_form_is_most_frequent_raw() {
        let b = IndexBundle::build(
            vec![
                table("T1", "", &["Team", "goals"], &["E1"]),
                table("T2", "", &["team", "Goals"], &["E1"]),
                table("T3", "", &["team"], &["E1"]),
            ],
            vec![entity("E1")],
        );
        let out = suggest_columns(&seed("", &["E1"], &[]), &b, &Default::default(), 10).unwrap();
        let targets: Vec<&str> = out.iter().map(|s| s.target.as_str()).collect();
        assert_eq!(targets, ["team", "goals"]);
    }

    #[test]
    fn seed_labels_never_suggested() {
        let b = IndexBundle::build(
            vec![table("T1", "", &["Team", "Wins"], &[])],
            vec![],
        );
        let out = suggest_columns(&seed("", &[], &[" TEAM"]), &b, &Default::default(), 10).unwrap();
        assert!(out.iter().all(|s| s.target.to_lowercase() != "team"));
        assert!(suggest_columns(&seed("", &[], &["x"]), &b, &Default::default(), 0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn supporting_tables_ranked() {
        let b = IndexBundle::build(
            vec![
                table("T1", "", &["wins"], &["E1"]),
                table("T2", "", &["wins"], &["E1", "E2"]),
            ],
            vec![entity("E1"), entity("E2")],
        );
        let s = seed("", &["E1", "E2"], &[]);
        let related = find_related_tables(&s, &b, &Default::default()).unwrap();
        let ids: Vec<&str> = supporting_tables("Wins", &related, &b)
            .iter()
            .map(|t| t.id.as_str())
            .collect();
        assert_eq!(ids, ["T2", "T1"]);
    }
}
