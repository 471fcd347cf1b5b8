//! Type-ahead search over entity names and the heading-label vocabulary.
//!
//! Both searches compare normalized forms. A name matches a query when it
//! equals the query, starts with it, or when every query token is a prefix of
//! some name token. Entities rank by that match tier, then id; labels rank by
//! table count, then label.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::index::IndexBundle;
use crate::text::{normalize_label, tokenize};

const SNIPPET_CHARS: usize = 160;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MatchTier {
    Exact,
    Prefix,
    Tokens,
}

/// Classifies how `name` (normalized) matches the normalized query.
pub fn match_tier(name: &str, query: &str, query_tokens: &[String]) -> Option<MatchTier> {
    if query.is_empty() {
        return None;
    }
    if name == query {
        return Some(MatchTier::Exact);
    }
    if name.starts_with(query) {
        return Some(MatchTier::Prefix);
    }
    if query_tokens.is_empty() {
        return None;
    }
    let name_tokens = tokenize(name);
    query_tokens
        .iter()
        .all(|q| name_tokens.iter().any(|n| n.starts_with(q.as_str())))
        .then_some(MatchTier::Tokens)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EntityHit {
    pub id: String,
    pub label: String,
    pub abstract_snippet: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LabelHit {
    pub label: String,
    pub table_count: usize,
}

pub fn search_entities(bundle: &IndexBundle, query: &str, limit: usize) -> Vec<EntityHit> {
    let q = normalize_label(query);
    let q_tokens = tokenize(&q);
    let ents = &bundle.entities;

    // Any match implies some name token starts with the first query token.
    let pool: Box<dyn Iterator<Item = u32>> = match q_tokens.first() {
        Some(first) => {
            let mut set = BTreeSet::new();
            for (term, list) in ents.name_postings().range(first.clone()..) {
                if !term.starts_with(first.as_str()) {
                    break;
                }
                set.extend(list.iter().copied());
            }
            Box::new(set.into_iter())
        }
        None => Box::new(0..ents.len() as u32),
    };

    let mut hits: Vec<(MatchTier, u32)> = pool
        .filter_map(|e| match_tier(ents.normalized_name(e), &q, &q_tokens).map(|m| (m, e)))
        .collect();
    hits.sort_unstable();
    hits.truncate(limit);
    hits.into_iter()
        .map(|(_, e)| {
            let r = ents.record(e);
            EntityHit {
                id: r.id.0.clone(),
                label: r.label.clone(),
                abstract_snippet: snippet(&r.abstract_text),
            }
        })
        .collect()
}

pub fn search_labels(bundle: &IndexBundle, query: &str, limit: usize) -> Vec<LabelHit> {
    let q = normalize_label(query);
    let q_tokens = tokenize(&q);
    let mut hits: Vec<(&str, usize)> = bundle
        .tables
        .label_vocabulary()
        .filter(|(label, _)| match_tier(label, &q, &q_tokens).is_some())
        .map(|(label, tables)| (label, tables.len()))
        .collect();
    hits.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    hits.truncate(limit);
    hits.into_iter()
        .map(|(label, n)| LabelHit {
            label: bundle.tables.label_display(label).unwrap_or(label).to_owned(),
            table_count: n,
        })
        .collect()
}

fn snippet(text: &str) -> String {
    match text.char_indices().nth(SNIPPET_CHARS) {
        Some((cut, _)) => format!("{}…", text[..cut].trim_end()),
        None => text.to_owned(),
    }
}
