//! Statistical estimators composed by the population models: Jaccard
//! similarity, Dirichlet-smoothed language models, BM25 and overlap ratios.
//!
//! None of these normalize into true probabilities; ranking downstream only
//! needs scores up to a constant.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::index::{IndexBundle, TableField, TableIndex};
use crate::model::ScoringParams;
use crate::text::tokenize;

/// Term frequencies with their exact sum. Zero counts are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermVector {
    counts: BTreeMap<String, u32>,
    total: u64,
}

impl TermVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tv = Self::new();
        for t in terms {
            tv.add(t, 1);
        }
        tv
    }

    pub fn add(&mut self, term: impl Into<String>, n: u32) {
        if n == 0 {
            return;
        }
        *self.counts.entry(term.into()).or_insert(0) += n;
        self.total += u64::from(n);
    }

    pub fn tf(&self, term: &str) -> u32 {
        self.counts.get(term).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Maximum-likelihood probability of `term`; 0 for an empty vector.
    pub fn prob(&self, term: &str) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            f64::from(self.tf(term)) / self.total as f64
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.counts.iter().map(|(t, &n)| (t.as_str(), n))
    }
}

/// `|a ∩ b| / |a ∪ b|`, with two empty sets scoring 0.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// `|source ∩ reference| / |reference|`; 0 when the reference is empty.
pub fn overlap_ratio<T: Ord>(source: &BTreeSet<T>, reference: &BTreeSet<T>) -> f64 {
    if reference.is_empty() {
        0.0
    } else {
        reference.intersection(source).count() as f64 / reference.len() as f64
    }
}

/// Intersection size of two ascending, duplicate-free slices.
pub(crate) fn sorted_intersection_len<T: Ord>(a: &[T], b: &[T]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// `(tf + mu * p_collection) / (total + mu)`.
pub fn dirichlet_smoothed(tf: u32, total: u64, p_collection: f64, mu: f64) -> f64 {
    (f64::from(tf) + mu * p_collection) / (total as f64 + mu)
}

/// Dirichlet-smoothed probability of `term` under the document vector `tv`,
/// backed off to the `collection` distribution. Terms unseen in the
/// collection get no background mass.
pub fn dirichlet_lm_prob(term: &str, tv: &TermVector, collection: &TermVector, mu: f64) -> f64 {
    dirichlet_smoothed(tv.tf(term), tv.total(), collection.prob(term), mu)
}

/// Column-labels likelihood of an entity: the sum over labels of the product
/// over each label's tokens of the smoothed label-LM probability.
///
/// The entity's term vector is built from the heading labels of every corpus
/// table holding the entity in its core column. Unknown entities fall back to
/// the collection model.
pub fn column_labels_likelihood(
    labels: &[String],
    entity: &str,
    bundle: &IndexBundle,
    params: &ScoringParams,
) -> f64 {
    let empty = TermVector::new();
    let tv = bundle
        .entity_ordinal(entity)
        .map_or(&empty, |e| bundle.entities.label_terms(e));
    let collection = &bundle.stats.label_lm;
    labels
        .iter()
        .map(|l| {
            tokenize(l)
                .iter()
                .map(|t| dirichlet_lm_prob(t, tv, collection, params.mu_labels))
                .product::<f64>()
        })
        .sum()
}

/// `ln((n - df + 0.5) / (df + 0.5) + 1)`, never negative.
pub fn bm25_idf(n: usize, df: usize) -> f64 {
    let (n, df) = (n as f64, df as f64);
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

/// Saturated term-frequency part of BM25.
pub fn bm25_tf(tf: u32, len: u32, avg_len: f64, k1: f64, b: f64) -> f64 {
    if tf == 0 {
        return 0.0;
    }
    let tf = f64::from(tf);
    let norm = if avg_len > 0.0 {
        1.0 - b + b * f64::from(len) / avg_len
    } else {
        1.0
    };
    tf * (k1 + 1.0) / (tf + k1 * norm)
}

/// BM25 of `query_terms` against one field of one table. Repeated query
/// terms contribute once per occurrence. Unknown tables score 0.
pub fn bm25_score(
    query_terms: &[String],
    field: TableField,
    table: &str,
    idx: &TableIndex,
    params: &ScoringParams,
) -> f64 {
    match idx.ordinal(table) {
        Some(t) => bm25_score_ordinal(query_terms, field, t, idx, params),
        None => 0.0,
    }
}

pub(crate) fn bm25_score_ordinal(
    query_terms: &[String],
    field: TableField,
    table: u32,
    idx: &TableIndex,
    params: &ScoringParams,
) -> f64 {
    let f = idx.field(field);
    let n = idx.len();
    let len = f.length(table);
    query_terms
        .iter()
        .map(|t| match f.postings(t) {
            Some(list) => {
                let tf = list
                    .binary_search_by_key(&table, |p| p.table)
                    .map_or(0, |i| list[i].tf);
                bm25_idf(n, list.len()) * bm25_tf(tf, len, f.avg_len(), params.bm25_k1, params.bm25_b)
            }
            None => 0.0,
        })
        .sum()
}
