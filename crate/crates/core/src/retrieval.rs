//! Retrieval of corpus tables related to a seed table.
//!
//! Three routes feed the related set, each capped at
//! [`ScoringParams::top_k_tables`]:
//!
//! * caption: BM25 of the seed caption against table captions, positive
//!   scores only, best first;
//! * entity: tables whose core column holds at least one seed entity, most
//!   shared seed entities first;
//! * label: tables carrying at least one seed label, most shared labels
//!   first.
//!
//! Ties inside a route go to the smaller table id. Row population harvests
//! candidate entities from the union; column population harvests candidate
//! labels and weighs every table by its relevance components.

use std::collections::{BTreeSet, HashMap};

use crate::error::QueryError;
use crate::index::{IndexBundle, TableField};
use crate::model::{ScoringParams, SeedTable, TableId};
use crate::scoring::{bm25_score_ordinal, sorted_intersection_len};
use crate::text::tokenize;

/// A seed table resolved against an index.
#[derive(Debug, Clone)]
pub(crate) struct ResolvedSeed<'a> {
    /// Entity ordinals in seed order.
    pub entities: Vec<u32>,
    /// Entity ordinals, ascending.
    pub entities_sorted: Vec<u32>,
    pub caption_terms: Vec<String>,
    pub labels: &'a [String],
    pub normalized_labels: &'a [String],
}

impl<'a> ResolvedSeed<'a> {
    pub fn new(seed: &'a SeedTable, bundle: &IndexBundle) -> Result<Self, QueryError> {
        let mut entities = Vec::with_capacity(seed.entities().len());
        let mut unknown = Vec::new();
        for e in seed.entities() {
            match bundle.entity_ordinal(e.as_str()) {
                Some(o) => entities.push(o),
                None => unknown.push(e.0.clone()),
            }
        }
        if !unknown.is_empty() {
            return Err(QueryError::UnknownEntities(unknown));
        }
        let mut entities_sorted = entities.clone();
        entities_sorted.sort_unstable();
        Ok(Self {
            entities,
            entities_sorted,
            caption_terms: tokenize(seed.caption()),
            labels: seed.labels(),
            normalized_labels: seed.normalized_labels(),
        })
    }

    /// True when no route can fire: no caption terms, entities or labels.
    pub fn is_empty(&self) -> bool {
        self.caption_terms.is_empty() && self.entities.is_empty() && self.labels.is_empty()
    }
}

/// A related table with its three relevance components.
#[derive(Debug, Clone, PartialEq)]
pub struct RelatedTable {
    pub id: TableId,
    pub(crate) ordinal: u32,
    /// Fraction of seed entities present in the table's core column; 1 when
    /// the seed has no entities.
    pub entity_coverage: f64,
    /// BM25 of the seed caption against the table caption; 1 when the seed
    /// caption has no terms.
    pub caption_score: f64,
    /// Fraction of seed labels among the table's labels; 1 when the seed has
    /// no labels.
    pub label_overlap: f64,
}

impl RelatedTable {
    pub fn relevance(&self) -> f64 {
        self.entity_coverage * self.caption_score * self.label_overlap
    }
}

/// Related tables in ascending table-id order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelatedTableSet {
    pub tables: Vec<RelatedTable>,
}

impl RelatedTableSet {
    pub fn ids(&self) -> BTreeSet<&TableId> {
        self.tables.iter().map(|t| &t.id).collect()
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }
}

/// Caption route: tables with positive BM25, best first, at most `k`.
pub fn caption_top_k(
    terms: &[String],
    bundle: &IndexBundle,
    params: &ScoringParams,
    k: usize,
) -> Vec<(u32, f64)> {
    if terms.is_empty() {
        return Vec::new();
    }
    let field = bundle.tables.field(TableField::Caption);
    let n = bundle.tables.len();
    let mut acc: HashMap<u32, f64> = HashMap::new();
    for t in terms {
        let Some(list) = field.postings(t) else {
            continue;
        };
        let idf = crate::scoring::bm25_idf(n, list.len());
        for p in list {
            let w = crate::scoring::bm25_tf(
                p.tf,
                field.length(p.table),
                field.avg_len(),
                params.bm25_k1,
                params.bm25_b,
            );
            *acc.entry(p.table).or_insert(0.0) += idf * w;
        }
    }
    let mut scored: Vec<(u32, f64)> = acc.into_iter().filter(|&(_, s)| s > 0.0).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Ranks the union of `lists` by how many lists contain each table, keeping
/// the top `k`.
fn shared_count_top_k<'a>(lists: impl Iterator<Item = &'a [u32]>, k: usize) -> Vec<u32> {
    let mut counts: HashMap<u32, u32> = HashMap::new();
    for list in lists {
        for &t in list {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(u32, u32)> = counts.into_iter().collect();
    if ranked.len() > k {
        ranked.select_nth_unstable_by(k - 1, |a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
    }
    ranked.into_iter().map(|(t, _)| t).collect()
}

/// Union of the three routes as ascending table ordinals.
pub(crate) fn related_ordinals(
    seed: &ResolvedSeed<'_>,
    bundle: &IndexBundle,
    params: &ScoringParams,
) -> Vec<u32> {
    let k = params.top_k_tables;
    let mut out: Vec<u32> = caption_top_k(&seed.caption_terms, bundle, params, k)
        .into_iter()
        .map(|(t, _)| t)
        .collect();
    out.extend(shared_count_top_k(
        seed.entities
            .iter()
            .map(|&e| bundle.tables.entity_postings(e)),
        k,
    ));
    out.extend(shared_count_top_k(
        seed.normalized_labels
            .iter()
            .map(|l| bundle.tables.label_postings(l)),
        k,
    ));
    out.sort_unstable();
    out.dedup();
    out
}

pub(crate) fn annotate(
    seed: &ResolvedSeed<'_>,
    bundle: &IndexBundle,
    params: &ScoringParams,
    table: u32,
) -> RelatedTable {
    let entity_coverage = if seed.entities_sorted.is_empty() {
        1.0
    } else {
        sorted_intersection_len(bundle.tables.table_entities(table), &seed.entities_sorted) as f64
            / seed.entities_sorted.len() as f64
    };
    let caption_score = if seed.caption_terms.is_empty() {
        1.0
    } else {
        bm25_score_ordinal(
            &seed.caption_terms,
            TableField::Caption,
            table,
            &bundle.tables,
            params,
        )
    };
    let label_overlap = if seed.normalized_labels.is_empty() {
        1.0
    } else {
        let table_labels = bundle.tables.table_labels(table);
        seed.normalized_labels
            .iter()
            .filter(|l| table_labels.contains(l))
            .count() as f64
            / seed.normalized_labels.len() as f64
    };
    RelatedTable {
        id: bundle.tables.table(table).id.clone(),
        ordinal: table,
        entity_coverage,
        caption_score,
        label_overlap,
    }
}

/// Tables related to `seed` by caption, entity or label match, each
/// annotated with its relevance components.
pub fn find_related_tables(
    seed: &SeedTable,
    bundle: &IndexBundle,
    params: &ScoringParams,
) -> Result<RelatedTableSet, QueryError> {
    let resolved = ResolvedSeed::new(seed, bundle)?;
    if resolved.is_empty() {
        return Err(QueryError::EmptySeed);
    }
    Ok(related_for(&resolved, bundle, params))
}

pub(crate) fn related_for(
    seed: &ResolvedSeed<'_>,
    bundle: &IndexBundle,
    params: &ScoringParams,
) -> RelatedTableSet {
    RelatedTableSet {
        tables: related_ordinals(seed, bundle, params)
            .into_iter()
            .map(|t| annotate(seed, bundle, params, t))
            .collect(),
    }
}
